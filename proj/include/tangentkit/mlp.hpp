#pragma once

#include "tangentkit/spectral.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tk::nn {

enum class Activation { relu, tanh };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

// Layer widths run from input dimension to output dimension c. Every hidden
// layer applies the activation; the last layer is always affine.
struct MlpArch {
    std::vector<int> widths;
    Activation activation = Activation::relu;
    bool bias = true;

    std::size_t layers() const { return widths.empty() ? 0 : widths.size() - 1; }
    int input_dim() const { return widths.front(); }
    int output_dim() const { return widths.back(); }
    std::size_t parameter_count() const;
    void validate() const;
};

// Column range [begin, end) of one layer inside the flat parameter vector.
struct LayerSpan {
    std::size_t layer = 0;
    Eigen::Index begin = 0;
    Eigen::Index end = 0;

    Eigen::Index size() const { return end - begin; }
};

/// Weights are stored out x in. The flat view is layer-major: for each layer,
/// the weight matrix in row-major order followed by its bias vector.
struct MlpParams {
    MlpArch arch;
    std::vector<Matrix> weights;
    std::vector<Vector> biases;  // empty vectors when arch.bias is false

    std::size_t size() const { return arch.parameter_count(); }
    Vector flat() const;
    void assign_flat(const Vector& flat);
    static MlpParams from_flat(const MlpArch& arch, const Vector& flat);
    std::vector<LayerSpan> layer_spans() const;
};

// zero: all biases 0. fan_in_uniform: b ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)], drawn after the weights.
enum class BiasInit { zero, fan_in_uniform };

/// He (relu, variance 2/fan_in) or LeCun (tanh, 1/fan_in) Gaussian weights. Zero biases make a
/// relu net positively homogeneous, so 1D inputs of one sign need fan_in_uniform.
MlpParams mlp_init(const MlpArch& arch, std::uint64_t seed, BiasInit bias_init = BiasInit::zero);

MlpParams zeros_like(const MlpArch& arch);

/// Scores for a batch, n x d inputs to n x c outputs.
Matrix forward(const MlpParams& params, const Matrix& x);

// Cached forward pass: pre-activations z_l and layer inputs a_l (a_0 = x), each n x width.
struct ForwardCache {
    std::vector<Matrix> inputs;       // inputs[l] feeds layer l
    std::vector<Matrix> preacts;      // preacts[l] = inputs[l] W_l^T + b_l
    const Matrix& output() const { return preacts.back(); }
};

ForwardCache forward_cached(const MlpParams& params, const Matrix& x);

// Elementwise activation derivative evaluated at pre-activations. relu'(0) = 0.
Matrix activation_derivative(Activation a, const Matrix& z);

enum class Loss { mse, cross_entropy, bce };
enum class Reduction { sum, mean };

Loss parse_loss(const std::string& name);
std::string to_string(Loss l);

/// Scalar loss of n x c scores against targets. mse: real targets, 0.5*(f-y)^2;
/// cross_entropy: one-hot targets with softmax; bce: c == 1, +-1 targets, log(1+exp(-y f)).
double loss_value(Loss loss, const Matrix& scores, const Matrix& targets, Reduction r = Reduction::sum);

/// Gradient of loss_value with respect to the scores, same shape as scores.
Matrix loss_gradient(Loss loss, const Matrix& scores, const Matrix& targets, Reduction r = Reduction::sum);

/// Vector-Jacobian product: gradient of sum_{i,y} g(i,y) f(x_i)[y] w.r.t. the flat
/// parameters, i.e. Phi^T vec(g) without materializing Phi.
Vector parameter_gradient(const MlpParams& params, const Matrix& x, const Matrix& output_grad);

/// Targets matrix for training: +-1 column for binary (classes == 1), one-hot otherwise.
Matrix targets_from_labels(std::span<const int> labels, std::size_t classes);

/// Fraction of correct predictions (sign for c == 1, argmax otherwise).
double accuracy(const Matrix& scores, std::span<const int> labels);

}  // namespace tk::nn
