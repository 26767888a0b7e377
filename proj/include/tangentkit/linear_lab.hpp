#pragma once

#include "tangentkit/mlp.hpp"
#include "tangentkit/spectral.hpp"
#include "tangentkit/trajectory.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace tk::linear {

// Singular values below this fraction of the largest are dropped.
inline constexpr double kRankCutoff = 1e-10;
// Kernels with condition number at or above this need the pseudo-inverse flag.
inline constexpr double kMaxCondition = 1e12;
// Divergence threshold on the training loss.
inline constexpr double kDivergenceLoss = 1e12;

/// Feature matrix with its thin SVD truncated at the numerical rank.
struct LinearFeatures {
    Matrix phi;  // n x P
    Matrix u;    // n x r
    Vector s;    // r singular values, non-increasing
    Matrix v;    // P x r

    static LinearFeatures from_matrix(Matrix phi);
    // Rebuilds phi = u diag(s) v^T; entries of s under the cutoff are dropped.
    static LinearFeatures from_svd(Matrix u, Vector s, Matrix v);

    std::size_t samples() const { return static_cast<std::size_t>(phi.rows()); }
    std::size_t parameters() const { return static_cast<std::size_t>(phi.cols()); }
    std::size_t rank() const { return static_cast<std::size_t>(s.size()); }
    Vector eigenvalues() const { return s.array().square().matrix(); }  // of K = phi phi^T
    Matrix kernel() const { return phi * phi.transpose(); }
};

/// w* = Phi^T K^{-1} y. With `pseudo_inverse` the truncated SVD is used for any rank;
/// otherwise a rank-deficient or ill-conditioned K raises SingularityError.
Vector min_norm_interpolator(const LinearFeatures& f, const Vector& y, bool pseudo_inverse = false);

struct ModeDynamics {
    Vector eigenvalues;  // lambda_j = s_j^2
    Vector initial;      // f_j0 = u_j^T Phi w0
    Vector target;       // f_j* = u_j^T y
    Vector coefficients; // f_jt

    Vector outputs(const LinearFeatures& f) const { return f.u * coefficients; }
};

/// f_jt = f_j* + (1 - eta lambda_j)^t (f_j0 - f_j*) for GD on 1/2 ||Phi w - y||^2.
/// w0 must lie in the row span of Phi.
ModeDynamics mode_dynamics(const LinearFeatures& f, const Vector& y, const Vector& w0, double eta, std::int64_t t);

enum class LinearLoss { mse };

struct LinearRun {
    traj::TrainingTrace trace;
    std::vector<Vector> weights;  // w_0 .. w_T
    Vector final_weights;
};

/// Plain GD, delta w = -eta Phi^T (Phi w - y) (divided by n under the mean reduction).
/// Stores every iterate when `keep_weights` is set.
LinearRun gd_train_linear(const LinearFeatures& f, const Vector& y, LinearLoss loss, double eta, std::int64_t steps,
                          const std::optional<Vector>& w0 = std::nullopt, nn::Reduction reduction = nn::Reduction::sum,
                          bool keep_weights = true);

/// Per-mode rescaling factors nu_j in the class A_nu = sum_j sqrt(nu_j) v_j v_j^T + Id on the complement.
struct NuResult {
    Vector nu;
    double kappa = 0.0;
    std::vector<bool> flagged;  // clamped (SuperNat) or dropped (norm) modes
    bool any_flagged() const;
};

/// nu_j = kappa / |u_j^T g|, kappa fixed by sum_j lambda_j / nu_j = sum_j lambda_j, so the
/// rescaled features keep their Frobenius norm. Zero components are clamped to 1e-12 of the
/// largest; an all-zero gradient yields nu = 1.
NuResult optimal_nu_supernat(const LinearFeatures& f, const Vector& loss_grad);

/// ||delta w_GD||_{A_nu} * ||A_nu^{-1} Phi^T||_F with delta w_GD = -eta Phi^T g.
double supernat_objective(const LinearFeatures& f, const Vector& loss_grad, const Vector& nu, double eta = 1.0);

/// Weights are held per mode in the original representation: w_orig = V c + w_perp, so that
/// outputs are U diag(s0) c. Rescaling leaves c untouched. A mode whose singular value drops
/// below kRankCutoff of the largest leaves the numerical rank: its s_j is set to zero and the
/// mode stays frozen from then on.
struct SuperNatState {
    LinearFeatures features;  // current (rescaled) features; mode order fixed by the initial SVD
    Vector initial_singular;  // s0, singular values before the first step
    Vector coords;            // c, original-representation weight coordinates along V
    Vector complement;        // weight component orthogonal to the feature span (never updated)
    std::vector<Vector> scale_history;
    std::int64_t step = 0;

    static SuperNatState start(LinearFeatures features, std::optional<Vector> w0 = std::nullopt);
    // Weights in the current representation, V (c s0 / s) + w_perp. Frozen modes carry no
    // weight there; their contribution survives only through predict() and outputs().
    Vector weights() const;
    Vector original_weights() const { return features.v * coords + complement; }
    // Maps raw feature rows (m x P) into the current representation.
    Matrix transform(const Matrix& raw) const;
    // Predictions on raw feature rows; equals transform(raw) * weights() while no mode is frozen.
    Vector predict(const Matrix& raw) const;
    Vector outputs() const { return features.u * initial_singular.cwiseProduct(coords); }
};

/// One gradient step followed by the optimal singular-value rescaling. Sample outputs after
/// the step equal a plain GD step taken in the pre-step representation.
SuperNatState supernat_step(const SuperNatState& state, const Vector& y, double eta,
                            nn::Reduction reduction = nn::Reduction::sum);

struct NoisyRegression {
    LinearFeatures features;  // n x (d+1): [phi, phi_noise]
    Vector y;
    Matrix validation_phi;
    Vector validation_y;       // labels drawn like y, noise coupled across the validation set
    Vector validation_signal;  // noise-free target phi on the validation inputs
};

/// phi ~ N(0,1), phi_noise ~ N(0, 1/d), y = phi + phi_noise phi_noise^T eps with eps ~ N(0, sigma2).
/// The validation set is an independent draw of the same process.
NoisyRegression noisy_feature_regression_setup(std::size_t d, std::size_t n, double sigma2, std::uint64_t seed,
                                               std::size_t validation = 500);

struct RademacherBoundInput {
    double radius = 1.0;  // M_A
    Matrix kernel;        // K_A
    std::size_t samples = 0;
    std::optional<double> margin;
    std::optional<std::size_t> classes;
};

/// (M/n) sqrt(Tr K), or c^{3/2} M/(gamma n) sqrt(Tr K) when a margin is given.
double rademacher_bound(const RademacherBoundInput& b);

/// (M/n) E_sigma sqrt(sigma^T K sigma) over `draws` Rademacher sign vectors.
double rademacher_monte_carlo(double radius, const Matrix& kernel, std::size_t samples, std::size_t draws,
                              std::uint64_t seed);

/// sum_t (m_t/n) sqrt(Tr K_t).
double flow_bound(std::span<const double> ms, std::span<const Matrix> kernels, std::size_t samples);

/// nu_j = kappa lambda_j / |u_j^T y| with kappa = sum|u_j^T y| / sum lambda_j. Modes with a zero
/// label component are dropped (nu_j = +inf) and flagged.
NuResult optimal_norm_nu(const LinearFeatures& f, const Vector& y);

/// ||w*||_{A_nu} * sqrt(Tr K_{A_nu}); an infinite nu_j removes mode j from both factors.
double norm_objective(const LinearFeatures& f, const Vector& y, const Vector& nu);

/// Bound (1/n) ||w*||_{A_nu} sqrt(Tr K_{A_nu}); nu = 1 gives the plain l2 bound.
double min_norm_bound(const LinearFeatures& f, const Vector& y, const std::optional<Vector>& nu = std::nullopt);

struct RbfSetup {
    Matrix x;           // N x 1 grid on [-a, a]
    Matrix raw;         // N x P random Fourier features
    LinearFeatures features;  // rescaled
    Vector y;           // sign of the label component, +-1
};

/// Random Fourier features z(x) = sqrt(2/P) cos(x w + b), w ~ N(0, 2 gamma), b ~ U[0, 2 pi].
/// Kernel eigenvalues l_j are interpolated as 1 + c (l_j - 1); labels are the sign of left
/// singular vector `label_index` (sign fixed so its largest-magnitude entry is positive).
RbfSetup rbf_anisotropy_setup(std::size_t points, std::size_t features, double a, double c, std::uint64_t seed,
                              double gamma = 1.0, std::size_t label_index = 0);

}  // namespace tk::linear
