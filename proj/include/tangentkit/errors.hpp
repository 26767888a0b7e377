#pragma once

#include <stdexcept>
#include <string>

namespace tk {

// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class SymmetryError : public Error { using Error::Error; };
class DegenerateError : public Error { using Error::Error; };
class IndexError : public Error { using Error::Error; };
class ValidationError : public Error { using Error::Error; };
class SingularityError : public Error { using Error::Error; };
class PreconditionError : public Error { using Error::Error; };
class RankError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

// Training loss blew past the divergence threshold.
class DivergenceError : public Error { using Error::Error; };

}  // namespace tk
