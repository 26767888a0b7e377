#include "tangentkit/linear_lab.hpp"

#include "tangentkit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace tk::linear {

namespace {

std::size_t numerical_rank(const Vector& s) {
    if (s.size() == 0 || !(s(0) > 0.0)) return 0;
    const double cut = kRankCutoff * s(0);
    std::size_t r = 0;
    while (r < static_cast<std::size_t>(s.size()) && s(static_cast<Eigen::Index>(r)) > cut) ++r;
    return r;
}

void require_samples(const LinearFeatures& f, const Vector& y, const char* who) {
    if (static_cast<std::size_t>(y.size()) != f.samples()) {
        throw DimensionError(std::string(who) + ": label length does not match feature rows");
    }
}

double require_trace(const Matrix& k, const char* who) {
    if (k.rows() != k.cols()) throw DimensionError(std::string(who) + ": kernel must be square");
    const double tr = k.trace();
    if (!std::isfinite(tr)) throw ValidationError(std::string(who) + ": non-finite kernel trace");
    if (tr < 0.0) throw ValidationError(std::string(who) + ": negative kernel trace (not PSD)");
    return tr;
}

double loss_of(const Vector& residual, nn::Reduction reduction) {
    const double sq = 0.5 * residual.squaredNorm();
    return reduction == nn::Reduction::mean ? sq / static_cast<double>(residual.size()) : sq;
}

void check_divergence(double loss, std::int64_t step) {
    if (!std::isfinite(loss) || loss > kDivergenceLoss) {
        throw DivergenceError("training diverged at step " + std::to_string(step) + " (loss " + std::to_string(loss) +
                              ")");
    }
}

}  // namespace

LinearFeatures LinearFeatures::from_matrix(Matrix phi) {
    const auto dec = spectral::svd(phi);
    const auto r = static_cast<Eigen::Index>(numerical_rank(dec.singular));
    LinearFeatures f;
    f.phi = std::move(phi);
    f.u = dec.u.leftCols(r);
    f.s = dec.singular.head(r);
    f.v = dec.v.leftCols(r);
    return f;
}

LinearFeatures LinearFeatures::from_svd(Matrix u, Vector s, Matrix v) {
    if (u.cols() != s.size() || v.cols() != s.size()) throw DimensionError("from_svd: factor shapes disagree");
    const auto r = static_cast<Eigen::Index>(numerical_rank(s));
    LinearFeatures f;
    f.u = u.leftCols(r);
    f.s = s.head(r);
    f.v = v.leftCols(r);
    f.phi = f.u * f.s.asDiagonal() * f.v.transpose();
    return f;
}

Vector min_norm_interpolator(const LinearFeatures& f, const Vector& y, bool pseudo_inverse) {
    require_samples(f, y, "min_norm_interpolator");
    if (!pseudo_inverse) {
        if (f.rank() < f.samples()) throw SingularityError("min_norm_interpolator: kernel is rank deficient");
        const double ratio = f.s(0) / f.s(f.s.size() - 1);
        if (ratio * ratio >= kMaxCondition) {
            throw SingularityError("min_norm_interpolator: kernel condition number exceeds 1e12");
        }
    }
    return f.v * (f.u.transpose() * y).cwiseQuotient(f.s);
}

ModeDynamics mode_dynamics(const LinearFeatures& f, const Vector& y, const Vector& w0, double eta, std::int64_t t) {
    require_samples(f, y, "mode_dynamics");
    if (static_cast<std::size_t>(w0.size()) != f.parameters()) throw DimensionError("mode_dynamics: w0 length");
    if (t < 0) throw ValidationError("mode_dynamics: negative step count");
    const Vector residual = w0 - f.v * (f.v.transpose() * w0);
    if (residual.norm() > 1e-8 * std::max(1.0, w0.norm())) {
        throw PreconditionError("mode_dynamics: w0 is not in the feature span");
    }
    ModeDynamics m;
    m.eigenvalues = f.eigenvalues();
    m.initial = f.u.transpose() * (f.phi * w0);
    m.target = f.u.transpose() * y;
    m.coefficients.resize(m.eigenvalues.size());
    for (Eigen::Index j = 0; j < m.eigenvalues.size(); ++j) {
        const double decay = std::pow(1.0 - eta * m.eigenvalues(j), static_cast<double>(t));
        // Weighted form so t = 0 returns f_j0 exactly.
        m.coefficients(j) = decay * m.initial(j) + (1.0 - decay) * m.target(j);
    }
    return m;
}

LinearRun gd_train_linear(const LinearFeatures& f, const Vector& y, LinearLoss, double eta, std::int64_t steps,
                          const std::optional<Vector>& w0, nn::Reduction reduction, bool keep_weights) {
    require_samples(f, y, "gd_train_linear");
    if (!(eta > 0.0)) throw ValidationError("gd_train_linear: learning rate must be positive");
    if (steps < 0) throw ValidationError("gd_train_linear: negative step count");
    Vector w = w0 ? *w0 : Vector::Zero(f.phi.cols());
    if (static_cast<std::size_t>(w.size()) != f.parameters()) throw DimensionError("gd_train_linear: w0 length");

    const double scale = reduction == nn::Reduction::mean ? 1.0 / static_cast<double>(f.samples()) : 1.0;
    const double phi_norm = f.phi.norm();
    LinearRun run;
    if (keep_weights) run.weights.push_back(w);
    for (std::int64_t t = 0; t < steps; ++t) {
        const Vector r = f.phi * w - y;
        check_divergence(loss_of(r, reduction), t);
        const Vector dw = -eta * scale * (f.phi.transpose() * r);
        traj::record_step(run.trace, dw, phi_norm);
        w += dw;
        if (keep_weights) run.weights.push_back(w);
    }
    check_divergence(loss_of(f.phi * w - y, reduction), steps);
    run.final_weights = std::move(w);
    return run;
}

bool NuResult::any_flagged() const { return std::find(flagged.begin(), flagged.end(), true) != flagged.end(); }

NuResult optimal_nu_supernat(const LinearFeatures& f, const Vector& loss_grad) {
    require_samples(f, loss_grad, "optimal_nu_supernat");
    const Vector lam = f.eigenvalues();
    Vector g = (f.u.transpose() * loss_grad).cwiseAbs();
    NuResult out;
    out.flagged.assign(static_cast<std::size_t>(g.size()), false);
    const double gmax = g.size() ? g.maxCoeff() : 0.0;
    if (!(gmax > 0.0)) {
        out.nu = Vector::Ones(g.size());
        out.kappa = 0.0;
        std::fill(out.flagged.begin(), out.flagged.end(), true);
        return out;
    }
    const double floor = spectral::kClampRelative * gmax;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
        if (g(j) < floor) {
            g(j) = floor;
            out.flagged[static_cast<std::size_t>(j)] = true;
        }
    }
    const double lam_sum = lam.sum();
    out.kappa = lam_sum > 0.0 ? lam.dot(g) / lam_sum : g.mean();
    out.nu = g.cwiseInverse() * out.kappa;
    return out;
}

double supernat_objective(const LinearFeatures& f, const Vector& loss_grad, const Vector& nu, double eta) {
    require_samples(f, loss_grad, "supernat_objective");
    if (static_cast<std::size_t>(nu.size()) != f.rank()) throw DimensionError("supernat_objective: nu length");
    const Vector lam = f.eigenvalues();
    const Vector a = f.u.transpose() * loss_grad;
    double step_sq = 0.0;
    double trace = 0.0;
    for (Eigen::Index j = 0; j < lam.size(); ++j) {
        step_sq += nu(j) * lam(j) * a(j) * a(j);
        trace += lam(j) / nu(j);
    }
    return eta * std::sqrt(step_sq) * std::sqrt(trace);
}

SuperNatState SuperNatState::start(LinearFeatures features, std::optional<Vector> w0) {
    SuperNatState s;
    const Vector w = w0 ? std::move(*w0) : Vector::Zero(features.phi.cols());
    if (static_cast<std::size_t>(w.size()) != features.parameters()) throw DimensionError("SuperNatState: w0 length");
    s.coords = features.v.transpose() * w;
    s.complement = w - features.v * s.coords;
    s.initial_singular = features.s;
    s.features = std::move(features);
    return s;
}

Vector SuperNatState::weights() const {
    Vector scaled = coords.cwiseProduct(initial_singular);
    for (Eigen::Index j = 0; j < scaled.size(); ++j) scaled(j) = features.s(j) > 0.0 ? scaled(j) / features.s(j) : 0.0;
    return features.v * scaled + complement;
}

Matrix SuperNatState::transform(const Matrix& raw) const {
    if (static_cast<std::size_t>(raw.cols()) != features.parameters()) {
        throw DimensionError("SuperNatState::transform: feature width");
    }
    const Vector shift = features.s.cwiseQuotient(initial_singular).array() - 1.0;
    return raw + (raw * features.v) * shift.asDiagonal() * features.v.transpose();
}

Vector SuperNatState::predict(const Matrix& raw) const {
    if (static_cast<std::size_t>(raw.cols()) != features.parameters()) {
        throw DimensionError("SuperNatState::predict: feature width");
    }
    return raw * complement + (raw * features.v) * coords;
}

SuperNatState supernat_step(const SuperNatState& state, const Vector& y, double eta, nn::Reduction reduction) {
    const auto& f = state.features;
    require_samples(f, y, "supernat_step");
    if (!(eta > 0.0)) throw ValidationError("supernat_step: learning rate must be positive");

    const Vector r = state.outputs() - y;
    check_divergence(loss_of(r, reduction), state.step);
    const Vector g = reduction == nn::Reduction::mean ? Vector(r / static_cast<double>(r.size())) : r;

    SuperNatState next = state;
    // GD step in the current representation, pulled back to the original one:
    // delta c_j = -eta (s_j^2 / s0_j) u_j^T g.
    const Vector gain = f.s.cwiseProduct(f.s).cwiseQuotient(state.initial_singular);
    next.coords -= eta * gain.cwiseProduct(f.u.transpose() * g);

    const NuResult nu = optimal_nu_supernat(f, g);
    next.features.s = f.s.cwiseQuotient(nu.nu.cwiseSqrt());
    // Modes pushed below the numerical rank of Phi_t are frozen for good.
    const double cutoff = kRankCutoff * next.features.s.maxCoeff();
    for (Eigen::Index j = 0; j < next.features.s.size(); ++j) {
        if (next.features.s(j) < cutoff) next.features.s(j) = 0.0;
    }
    next.features.phi = f.u * next.features.s.asDiagonal() * f.v.transpose();
    next.scale_history.push_back(nu.nu);
    next.step = state.step + 1;
    return next;
}

NoisyRegression noisy_feature_regression_setup(std::size_t d, std::size_t n, double sigma2, std::uint64_t seed,
                                               std::size_t validation) {
    if (d < 1 || n < 1) throw ValidationError("noisy_feature_regression_setup: need d >= 1 and n >= 1");
    if (sigma2 < 0.0) throw ValidationError("noisy_feature_regression_setup: negative noise variance");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double noise_sd = std::sqrt(1.0 / static_cast<double>(d));
    const double eps_sd = std::sqrt(sigma2);

    auto draw = [&](std::size_t rows, Matrix& phi, Vector& y) {
        phi.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d + 1));
        for (Eigen::Index i = 0; i < phi.rows(); ++i) {
            phi(i, 0) = normal(rng);
            for (Eigen::Index k = 1; k < phi.cols(); ++k) phi(i, k) = noise_sd * normal(rng);
        }
        Vector eps(phi.rows());
        for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = eps_sd * normal(rng);
        const auto noise = phi.rightCols(static_cast<Eigen::Index>(d));
        y = phi.col(0) + noise * (noise.transpose() * eps);
    };

    NoisyRegression out;
    Matrix phi;
    draw(n, phi, out.y);
    out.features = LinearFeatures::from_matrix(std::move(phi));
    if (validation > 0) {
        draw(validation, out.validation_phi, out.validation_y);
        out.validation_signal = out.validation_phi.col(0);
    }
    return out;
}

double rademacher_bound(const RademacherBoundInput& b) {
    if (!(b.radius > 0.0)) throw ValidationError("rademacher_bound: radius must be positive");
    if (b.samples == 0) throw ValidationError("rademacher_bound: sample count must be positive");
    const double tr = require_trace(b.kernel, "rademacher_bound");
    const double n = static_cast<double>(b.samples);
    if (!b.margin) return b.radius / n * std::sqrt(tr);
    if (!(*b.margin > 0.0)) throw ValidationError("rademacher_bound: margin must be positive");
    const double c = static_cast<double>(b.classes.value_or(1));
    return std::pow(c, 1.5) * b.radius / (*b.margin * n) * std::sqrt(tr);
}

double rademacher_monte_carlo(double radius, const Matrix& kernel, std::size_t samples, std::size_t draws,
                              std::uint64_t seed) {
    require_trace(kernel, "rademacher_monte_carlo");
    if (samples == 0 || draws == 0) throw ValidationError("rademacher_monte_carlo: need samples and draws");
    std::mt19937_64 rng(seed);
    const Eigen::Index dim = kernel.rows();
    Vector sigma(dim);
    double total = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
        std::uint64_t bits = 0;
        for (Eigen::Index i = 0; i < dim; ++i) {
            if (i % 64 == 0) bits = rng();
            sigma(i) = (bits & 1u) ? 1.0 : -1.0;
            bits >>= 1;
        }
        total += std::sqrt(std::max(0.0, sigma.dot(kernel * sigma)));
    }
    return radius / static_cast<double>(samples) * total / static_cast<double>(draws);
}

double flow_bound(std::span<const double> ms, std::span<const Matrix> kernels, std::size_t samples) {
    if (ms.size() != kernels.size()) throw DimensionError("flow_bound: radius and kernel sequences differ in length");
    if (samples == 0) throw ValidationError("flow_bound: sample count must be positive");
    double total = 0.0;
    for (std::size_t t = 0; t < ms.size(); ++t) {
        if (!(ms[t] >= 0.0)) throw ValidationError("flow_bound: radii must be non-negative");
        total += ms[t] / static_cast<double>(samples) * std::sqrt(require_trace(kernels[t], "flow_bound"));
    }
    return total;
}

NuResult optimal_norm_nu(const LinearFeatures& f, const Vector& y) {
    require_samples(f, y, "optimal_norm_nu");
    const Vector lam = f.eigenvalues();
    const Vector a = (f.u.transpose() * y).cwiseAbs();
    NuResult out;
    out.nu = Vector::Constant(a.size(), std::numeric_limits<double>::infinity());
    out.flagged.assign(static_cast<std::size_t>(a.size()), true);
    const double amax = a.size() ? a.maxCoeff() : 0.0;
    if (!(amax > 0.0)) return out;

    const double floor = spectral::kClampRelative * amax;
    double a_sum = 0.0;
    double lam_sum = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        if (a(j) <= floor) continue;
        out.flagged[static_cast<std::size_t>(j)] = false;
        a_sum += a(j);
        lam_sum += lam(j);
    }
    out.kappa = a_sum / lam_sum;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        if (!out.flagged[static_cast<std::size_t>(j)]) out.nu(j) = out.kappa * lam(j) / a(j);
    }
    return out;
}

double norm_objective(const LinearFeatures& f, const Vector& y, const Vector& nu) {
    require_samples(f, y, "norm_objective");
    if (static_cast<std::size_t>(nu.size()) != f.rank()) throw DimensionError("norm_objective: nu length");
    const Vector lam = f.eigenvalues();
    const Vector a = f.u.transpose() * y;
    double norm_sq = 0.0;
    double trace = 0.0;
    for (Eigen::Index j = 0; j < lam.size(); ++j) {
        if (std::isinf(nu(j))) continue;
        norm_sq += nu(j) / lam(j) * a(j) * a(j);
        trace += lam(j) / nu(j);
    }
    return std::sqrt(norm_sq) * std::sqrt(trace);
}

double min_norm_bound(const LinearFeatures& f, const Vector& y, const std::optional<Vector>& nu) {
    const Vector weights = nu ? *nu : Vector::Ones(static_cast<Eigen::Index>(f.rank()));
    return norm_objective(f, y, weights) / static_cast<double>(f.samples());
}

RbfSetup rbf_anisotropy_setup(std::size_t points, std::size_t features, double a, double c, std::uint64_t seed,
                              double gamma, std::size_t label_index) {
    if (points < 2 || features < 1) throw ValidationError("rbf_anisotropy_setup: need >= 2 points and >= 1 feature");
    if (c < 0.0 || c > 1.0) throw ValidationError("rbf_anisotropy_setup: scaling factor must lie in [0,1]");
    if (!(a > 0.0) || !(gamma > 0.0)) throw ValidationError("rbf_anisotropy_setup: a and gamma must be positive");

    RbfSetup out;
    out.x.resize(static_cast<Eigen::Index>(points), 1);
    const double step = 2.0 * a / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) out.x(static_cast<Eigen::Index>(i), 0) = -a + step * static_cast<double>(i);
    out.x(static_cast<Eigen::Index>(points - 1), 0) = a;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 * gamma));
    std::uniform_real_distribution<double> phase(0.0, 2.0 * 3.14159265358979323846);
    Vector w(static_cast<Eigen::Index>(features));
    Vector b(static_cast<Eigen::Index>(features));
    for (Eigen::Index p = 0; p < w.size(); ++p) w(p) = normal(rng);
    for (Eigen::Index p = 0; p < b.size(); ++p) b(p) = phase(rng);
    const double amp = std::sqrt(2.0 / static_cast<double>(features));
    out.raw = ((out.x * w.transpose()).rowwise() + b.transpose()).array().cos() * amp;

    auto dec = spectral::svd(out.raw);
    if (label_index >= static_cast<std::size_t>(dec.singular.size())) {
        throw IndexError("rbf_anisotropy_setup: label component out of range");
    }
    Vector psi = dec.u.col(static_cast<Eigen::Index>(label_index));
    Eigen::Index peak = 0;
    psi.cwiseAbs().maxCoeff(&peak);
    if (psi(peak) < 0.0) psi = -psi;
    out.y = psi.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });

    const Vector l = dec.singular.array().square();
    const Vector rescaled = (1.0 + c * (l.array() - 1.0)).sqrt();
    out.features = LinearFeatures::from_svd(std::move(dec.u), rescaled, std::move(dec.v));
    return out;
}

}  // namespace tk::linear
