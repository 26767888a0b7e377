#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace tk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace spectral {

// Eigenvalues below this fraction of the largest one are treated as exact zeros
// in entropy and rank computations.
inline constexpr double kClampRelative = 1e-12;

/// Eigenvalues sorted non-increasing. Indefinite spectra are representable
/// (sym_eig accepts any symmetric matrix); the diagnostics below reject
/// entries under -1e-8*max|lambda|.
class Spectrum {
public:
    Spectrum() = default;
    explicit Spectrum(std::vector<double> values);
    static Spectrum from_vector(const Vector& values);

    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double max() const { return values_.empty() ? 0.0 : values_.front(); }
    double trace() const;

    // Count of eigenvalues above the clamp threshold.
    std::size_t numerical_rank() const;
    // Copy with negatives and sub-threshold entries set to zero.
    std::vector<double> clamped() const;

private:
    std::vector<double> values_;
};

struct EigenSystem {
    Spectrum spectrum;
    Matrix vectors;  // column j pairs with spectrum[j]
};

struct Svd {
    Matrix u;         // m x k, orthonormal columns
    Vector singular;  // k values, non-increasing
    Matrix v;         // n x k, orthonormal columns
};

/// Symmetric eigendecomposition, eigenvalues non-increasing.
/// Throws DimensionError for non-square and SymmetryError for asymmetric input.
EigenSystem sym_eig(const Matrix& a);

/// Eigenvalues only; cheaper for large kernels where vectors are not needed.
Spectrum sym_eigenvalues(const Matrix& a);

/// Thin SVD, M = U diag(s) V^T.
Svd svd(const Matrix& m);

/// exp of the Shannon entropy (natural log) of the trace-normalized clamped spectrum.
double effective_rank(const Spectrum& s);

/// Fraction of the trace carried by the top-k eigenvalues, for each k in ks.
std::vector<double> trace_ratios(const Spectrum& s, std::span<const std::size_t> ks);

struct KernelMatrix {
    Matrix entries;
    std::size_t samples = 0;
    std::size_t classes = 1;

    Eigen::Index dim() const { return entries.rows(); }
};

/// C K C with C = I - 11^T / r.
KernelMatrix center_kernel(const KernelMatrix& k);

/// Centered kernel alignment. Throws DegenerateError if either centered kernel is zero.
double cka(const KernelMatrix& k1, const KernelMatrix& k2);

/// Uncentered alignment <K1,K2>_F / (|K1|_F |K2|_F).
double kernel_alignment(const KernelMatrix& k1, const KernelMatrix& k2);

/// Rank-one label kernel Y Y^T from class indices (one-hot, concatenated
/// sample-major) with `classes` > 1, or from +-1 labels when classes == 1.
KernelMatrix label_kernel(std::span<const int> labels, std::size_t classes);

/// Label kernel from an explicit n x c one-hot (or n x 1 signed) matrix.
KernelMatrix label_kernel(const Matrix& y);

/// |DFT coefficient| for frequencies 0..floor(len/2).
Vector dft_magnitudes(const Vector& v);

/// Index of the largest DFT magnitude.
std::size_t dominant_frequency(const Vector& v);

}  // namespace spectral
}  // namespace tk
