#pragma once

#include "tangentkit/mlp.hpp"
#include "tangentkit/parallel.hpp"
#include "tangentkit/spectral.hpp"

#include <vector>

namespace tk::tangent {

using spectral::KernelMatrix;

/// Per-example, per-class parameter gradients. Row i*c + y holds the gradient
/// of f(x_i)[y] with respect to the flat parameter vector (sample-major rows).
struct TangentFeatureMatrix {
    RowMatrix rows;
    std::size_t samples = 0;
    std::size_t classes = 1;
    std::vector<nn::LayerSpan> spans;

    Eigen::Index row_index(std::size_t sample, std::size_t cls) const {
        return static_cast<Eigen::Index>(sample * classes + cls);
    }
    Eigen::Index parameters() const { return rows.cols(); }
};

// Row-parallel extraction. Exec::serial runs the identical per-sample routine in a plain loop.
TangentFeatureMatrix tangent_features(const nn::MlpParams& params, const Matrix& x, Exec exec = Exec::parallel);

/// K = Phi Phi^T. The parallel path multiplies fixed-size row blocks, so the
/// result does not depend on the thread count; the serial path is the naive
/// double loop over row pairs and is kept as the reference.
KernelMatrix tangent_kernel(const TangentFeatureMatrix& phi, Exec exec = Exec::parallel);

/// Cross kernel Phi_a Phi_b^T between two feature matrices of the same network.
Matrix cross_kernel(const TangentFeatureMatrix& a, const TangentFeatureMatrix& b);

/// Per-layer kernels built from each layer's column span; they sum to the full kernel.
std::vector<KernelMatrix> layerwise_kernels(const TangentFeatureMatrix& phi);

// Backpropagated signals for every (sample, class) row: deltas[l] is (n*c) x width_{l+1},
// inputs[l] is n x width_l. A weight gradient row is the outer product of the two.
struct LayerSignals {
    std::vector<Matrix> deltas;
    std::vector<Matrix> inputs;
    std::size_t samples = 0;
    std::size_t classes = 1;
    bool bias = true;
};

LayerSignals layer_signals(const nn::MlpParams& params, const Matrix& x);

/// Layer-wise kernels without materializing Phi:
/// K^l((i,y),(j,y')) = <delta_l(i,y), delta_l(j,y')> * (<a_l(i), a_l(j)> + [bias]).
std::vector<KernelMatrix> layerwise_kernels(const nn::MlpParams& params, const Matrix& x);

/// Sum of the factored layer-wise kernels.
KernelMatrix tangent_kernel(const nn::MlpParams& params, const Matrix& x);

/// Factored cross kernel between batches xa (rows) and xb (columns).
Matrix cross_kernel(const nn::MlpParams& params, const Matrix& xa, const Matrix& xb);

/// ||Phi||_F on a batch, computed from layer signals.
double feature_frobenius_norm(const nn::MlpParams& params, const Matrix& x);

enum class Centering { joint, per_class };

/// Subtract the feature mean. joint: mean over all (i, y) rows; per_class: mean over
/// the rows sharing the same class index. Needs at least two samples.
TangentFeatureMatrix center_features(const TangentFeatureMatrix& phi, Centering mode = Centering::joint);

struct PrincipalComponents {
    spectral::Spectrum spectrum;  // eigenvalues of the defining kernel
    Matrix in_sample;             // defining-batch eigenvectors, (n*c) x count
    Matrix values;                // component values at evaluation points, (m*c) x count
};

/// u_J(x)[y] = <v_J, Phi(x)[y]> / sqrt(lambda_J), evaluated through the kernel as
/// (1/lambda_J) sum_r u_J(r) k(x, r). Throws RankError if count exceeds the numerical rank.
PrincipalComponents principal_components(const KernelMatrix& defining, const Matrix& eval_cross, std::size_t count);
PrincipalComponents principal_components(const TangentFeatureMatrix& defining, const TangentFeatureMatrix& eval,
                                         std::size_t count);
PrincipalComponents principal_components(const nn::MlpParams& params, const Matrix& x_defining,
                                         const Matrix& x_eval, std::size_t count);

struct SpectralBias {
    spectral::EigenSystem eigen;
    Vector coefficients;  // delta f_J = -eta * lambda_J * (u_J^T grad)

    // sum_J delta f_J u_J on the sample points
    Vector reconstruct() const;
};

SpectralBias spectral_bias_decomposition(const KernelMatrix& k, const Vector& loss_grad, double eta);
SpectralBias spectral_bias_decomposition(const TangentFeatureMatrix& phi, const Vector& loss_grad, double eta);

/// Flatten an n x c score-gradient matrix sample-major, matching Phi rows.
Vector flatten_sample_major(const Matrix& g);

struct GdStep {
    nn::MlpParams params;
    Vector velocity;
    Vector delta;  // realized flat parameter change
};

/// v' = mu v - eta grad L, w' = w + v'. mu = 0 is plain gradient descent.
GdStep gd_step(const nn::MlpParams& params, const Matrix& x, const Matrix& targets, nn::Loss loss, double eta,
               double momentum, const Vector& velocity, nn::Reduction reduction = nn::Reduction::sum);

/// ||f(w + eps v) - f(w)||_F over the evaluation batch, per unit direction v.
std::vector<double> perturbation_response(const nn::MlpParams& params, const Matrix& x_eval,
                                          const std::vector<Vector>& directions, double magnitude);

}  // namespace tk::tangent
