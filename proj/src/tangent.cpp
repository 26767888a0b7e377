#include "tangentkit/tangent.hpp"

#include "tangentkit/errors.hpp"

#include <cmath>

namespace tk::tangent {

std::vector<KernelMatrix> layerwise_kernels(const TangentFeatureMatrix& phi) {
    std::vector<KernelMatrix> out;
    out.reserve(phi.spans.size());
    for (const auto& span : phi.spans) {
        TangentFeatureMatrix part;
        part.rows = phi.rows.middleCols(span.begin, span.size());
        part.samples = phi.samples;
        part.classes = phi.classes;
        out.push_back(tangent_kernel(part));
    }
    return out;
}

TangentFeatureMatrix center_features(const TangentFeatureMatrix& phi, Centering mode) {
    if (phi.samples < 2) throw ValidationError("center_features: need at least 2 samples");
    TangentFeatureMatrix out = phi;
    if (mode == Centering::joint) {
        const Eigen::RowVectorXd mean = phi.rows.colwise().mean();
        out.rows.rowwise() -= mean;
        return out;
    }
    const auto c = static_cast<Eigen::Index>(phi.classes);
    const auto n = static_cast<Eigen::Index>(phi.samples);
    for (Eigen::Index y = 0; y < c; ++y) {
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(phi.rows.cols());
        for (Eigen::Index i = 0; i < n; ++i) mean += phi.rows.row(i * c + y);
        mean /= static_cast<double>(n);
        for (Eigen::Index i = 0; i < n; ++i) out.rows.row(i * c + y) -= mean;
    }
    return out;
}

PrincipalComponents principal_components(const KernelMatrix& defining, const Matrix& eval_cross,
                                         std::size_t count) {
    if (eval_cross.cols() != defining.entries.rows()) {
        throw DimensionError("principal_components: cross kernel columns must match the defining batch");
    }
    spectral::EigenSystem eig = spectral::sym_eig(defining.entries);
    const std::size_t rank = eig.spectrum.numerical_rank();
    if (count > rank) {
        throw RankError("principal_components: requested " + std::to_string(count) +
                        " components but numerical rank is " + std::to_string(rank));
    }
    const auto k = static_cast<Eigen::Index>(count);
    PrincipalComponents pc;
    pc.in_sample = eig.vectors.leftCols(k);
    Vector inv(k);
    for (Eigen::Index j = 0; j < k; ++j) inv(j) = 1.0 / eig.spectrum[static_cast<std::size_t>(j)];
    pc.values = (eval_cross * pc.in_sample) * inv.asDiagonal();
    pc.spectrum = std::move(eig.spectrum);
    return pc;
}

PrincipalComponents principal_components(const TangentFeatureMatrix& defining, const TangentFeatureMatrix& eval,
                                         std::size_t count) {
    return principal_components(tangent_kernel(defining), cross_kernel(eval, defining), count);
}

PrincipalComponents principal_components(const nn::MlpParams& params, const Matrix& x_defining,
                                         const Matrix& x_eval, std::size_t count) {
    return principal_components(tangent_kernel(params, x_defining), cross_kernel(params, x_eval, x_defining), count);
}

Vector SpectralBias::reconstruct() const { return eigen.vectors * coefficients; }

SpectralBias spectral_bias_decomposition(const KernelMatrix& k, const Vector& loss_grad, double eta) {
    if (!(eta > 0.0)) throw PreconditionError("spectral_bias_decomposition: eta must be positive");
    if (loss_grad.size() != k.entries.rows()) {
        throw DimensionError("spectral_bias_decomposition: loss gradient length must equal kernel size");
    }
    SpectralBias out;
    out.eigen = spectral::sym_eig(k.entries);
    const Vector proj = out.eigen.vectors.transpose() * loss_grad;
    out.coefficients.resize(proj.size());
    for (Eigen::Index j = 0; j < proj.size(); ++j) {
        out.coefficients(j) = -eta * out.eigen.spectrum[static_cast<std::size_t>(j)] * proj(j);
    }
    return out;
}

SpectralBias spectral_bias_decomposition(const TangentFeatureMatrix& phi, const Vector& loss_grad, double eta) {
    return spectral_bias_decomposition(tangent_kernel(phi), loss_grad, eta);
}

Vector flatten_sample_major(const Matrix& g) {
    Vector out(g.size());
    for (Eigen::Index i = 0; i < g.rows(); ++i) out.segment(i * g.cols(), g.cols()) = g.row(i).transpose();
    return out;
}

GdStep gd_step(const nn::MlpParams& params, const Matrix& x, const Matrix& targets, nn::Loss loss, double eta,
               double momentum, const Vector& velocity, nn::Reduction reduction) {
    if (!(eta > 0.0)) throw PreconditionError("gd_step: learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw PreconditionError("gd_step: momentum must lie in [0, 1)");
    const Eigen::Index p = static_cast<Eigen::Index>(params.size());
    if (velocity.size() != 0 && velocity.size() != p) throw DimensionError("gd_step: velocity length mismatch");
    if (targets.rows() != x.rows() || targets.cols() != params.arch.output_dim()) {
        throw DimensionError("gd_step: targets must be n x c");
    }

    const Matrix scores = nn::forward(params, x);
    const Matrix g = nn::loss_gradient(loss, scores, targets, reduction);
    const Vector grad = nn::parameter_gradient(params, x, g);

    GdStep out;
    out.velocity = -eta * grad;
    if (velocity.size() == p) out.velocity += momentum * velocity;
    out.delta = out.velocity;
    out.params = params;
    out.params.assign_flat(params.flat() + out.delta);
    return out;
}

std::vector<double> perturbation_response(const nn::MlpParams& params, const Matrix& x_eval,
                                          const std::vector<Vector>& directions, double magnitude) {
    const Matrix base = nn::forward(params, x_eval);
    const Vector w = params.flat();
    std::vector<double> out;
    out.reserve(directions.size());
    nn::MlpParams shifted = params;
    for (const Vector& v : directions) {
        if (v.size() != w.size()) throw DimensionError("perturbation_response: direction length mismatch");
        if (std::abs(v.norm() - 1.0) > 1e-8) throw PreconditionError("perturbation_response: direction not unit norm");
        shifted.assign_flat(w + magnitude * v);
        out.push_back((nn::forward(shifted, x_eval) - base).norm());
    }
    return out;
}

}  // namespace tk::tangent
