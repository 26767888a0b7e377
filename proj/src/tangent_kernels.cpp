// Row-parallel kernels for tangent-feature extraction and Gram assembly.
// Every parallel loop partitions its output into fixed blocks owned by one
// iteration, so results are independent of the OpenMP thread count.

#include "tangentkit/errors.hpp"
#include "tangentkit/tangent.hpp"

namespace tk::tangent {

namespace {

constexpr Eigen::Index kRowBlock = 64;

// Writes the c tangent-feature rows of one sample.
void sample_features(const nn::MlpParams& params, const nn::ForwardCache& cache, Eigen::Index i,
                     const std::vector<nn::LayerSpan>& spans, RowMatrix& out) {
    const std::size_t layers = params.weights.size();
    const Eigen::Index c = params.arch.output_dim();
    const bool bias = params.arch.bias;
    // delta is c x width: row y is d f[y] / d z_l for the current layer.
    Matrix delta = Matrix::Identity(c, c);
    for (std::size_t l = layers; l-- > 0;) {
        const auto a = cache.inputs[l].row(i);
        const Eigen::Index in = a.size();
        const Eigen::Index width = delta.cols();
        const Eigen::Index base = spans[l].begin;
        for (Eigen::Index y = 0; y < c; ++y) {
            auto row = out.row(i * c + y);
            for (Eigen::Index o = 0; o < width; ++o) {
                row.segment(base + o * in, in) = delta(y, o) * a;
            }
            if (bias) row.segment(base + width * in, width) = delta.row(y);
        }
        if (l > 0) {
            const Eigen::RowVectorXd deriv =
                nn::activation_derivative(params.arch.activation, cache.preacts[l - 1].row(i));
            Matrix back = delta * params.weights[l];
            delta = back.array().rowwise() * deriv.array();
        }
    }
}

// out = a b^T, rows split into fixed blocks.
Matrix blocked_gram(const Eigen::Ref<const RowMatrix>& a, const Eigen::Ref<const RowMatrix>& b) {
    const Eigen::Index rows = a.rows();
    Matrix out(rows, b.rows());
    const Eigen::Index blocks = (rows + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index blk = 0; blk < blocks; ++blk) {
        const Eigen::Index r0 = blk * kRowBlock;
        const Eigen::Index len = std::min(kRowBlock, rows - r0);
        out.middleRows(r0, len).noalias() = a.middleRows(r0, len) * b.transpose();
    }
    return out;
}

void mirror_upper(Matrix& k) {
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
        for (Eigen::Index i = j + 1; i < k.rows(); ++i) k(i, j) = k(j, i);
    }
}

}  // namespace

TangentFeatureMatrix tangent_features(const nn::MlpParams& params, const Matrix& x, Exec exec) {
    if (x.rows() == 0) throw DimensionError("tangent_features: empty batch");
    const nn::ForwardCache cache = nn::forward_cached(params, x);
    TangentFeatureMatrix phi;
    phi.samples = static_cast<std::size_t>(x.rows());
    phi.classes = static_cast<std::size_t>(params.arch.output_dim());
    phi.spans = params.layer_spans();
    phi.rows.resize(x.rows() * params.arch.output_dim(), static_cast<Eigen::Index>(params.size()));

    const Eigen::Index n = x.rows();
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (Eigen::Index i = 0; i < n; ++i) sample_features(params, cache, i, phi.spans, phi.rows);
    } else {
        for (Eigen::Index i = 0; i < n; ++i) sample_features(params, cache, i, phi.spans, phi.rows);
    }
    return phi;
}

KernelMatrix tangent_kernel(const TangentFeatureMatrix& phi, Exec exec) {
    const Eigen::Index r = phi.rows.rows();
    KernelMatrix k{Matrix(r, r), phi.samples, phi.classes};
    if (exec == Exec::parallel) {
        k.entries = blocked_gram(phi.rows, phi.rows);
    } else {
        for (Eigen::Index i = 0; i < r; ++i) {
            for (Eigen::Index j = i; j < r; ++j) {
                double s = 0.0;
                for (Eigen::Index p = 0; p < phi.rows.cols(); ++p) s += phi.rows(i, p) * phi.rows(j, p);
                k.entries(i, j) = s;
            }
        }
    }
    mirror_upper(k.entries);
    return k;
}

Matrix cross_kernel(const TangentFeatureMatrix& a, const TangentFeatureMatrix& b) {
    if (a.parameters() != b.parameters()) throw DimensionError("cross_kernel: parameter counts differ");
    return blocked_gram(a.rows, b.rows);
}

LayerSignals layer_signals(const nn::MlpParams& params, const Matrix& x) {
    const nn::ForwardCache cache = nn::forward_cached(params, x);
    const std::size_t layers = params.weights.size();
    const Eigen::Index n = x.rows();
    const Eigen::Index c = params.arch.output_dim();

    LayerSignals sig;
    sig.samples = static_cast<std::size_t>(n);
    sig.classes = static_cast<std::size_t>(c);
    sig.bias = params.arch.bias;
    sig.inputs = cache.inputs;
    sig.deltas.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) sig.deltas[l].resize(n * c, params.arch.widths[l + 1]);

    std::vector<Matrix> derivs(layers);
    for (std::size_t l = 0; l + 1 < layers; ++l) {
        derivs[l] = nn::activation_derivative(params.arch.activation, cache.preacts[l]);
    }

    for (Eigen::Index y = 0; y < c; ++y) {
        Matrix delta = Matrix::Zero(n, c);
        delta.col(y).setOnes();
        for (std::size_t l = layers; l-- > 0;) {
            Matrix& dst = sig.deltas[l];
            for (Eigen::Index i = 0; i < n; ++i) dst.row(i * c + y) = delta.row(i);
            if (l > 0) {
                Matrix back = delta * params.weights[l];
                delta = back.cwiseProduct(derivs[l - 1]);
            }
        }
    }
    return sig;
}

namespace {

// Hadamard product of the delta Gram with the input Gram expanded over classes.
Matrix layer_kernel(const Matrix& da, const Matrix& aa, const Matrix& db, const Matrix& ab, std::size_t classes,
                    bool bias) {
    const RowMatrix da_r = da;
    const RowMatrix db_r = db;
    Matrix dd = blocked_gram(da_r, db_r);
    Matrix g = aa * ab.transpose();
    if (bias) g.array() += 1.0;
    const auto c = static_cast<Eigen::Index>(classes);
    const Eigen::Index cols = dd.cols();
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < dd.rows(); ++i) dd(i, j) *= g(i / c, j / c);
    }
    return dd;
}

}  // namespace

std::vector<KernelMatrix> layerwise_kernels(const nn::MlpParams& params, const Matrix& x) {
    const LayerSignals sig = layer_signals(params, x);
    std::vector<KernelMatrix> out;
    out.reserve(sig.deltas.size());
    for (std::size_t l = 0; l < sig.deltas.size(); ++l) {
        Matrix k = layer_kernel(sig.deltas[l], sig.inputs[l], sig.deltas[l], sig.inputs[l], sig.classes, sig.bias);
        mirror_upper(k);
        out.push_back(KernelMatrix{std::move(k), sig.samples, sig.classes});
    }
    return out;
}

KernelMatrix tangent_kernel(const nn::MlpParams& params, const Matrix& x) {
    auto layers = layerwise_kernels(params, x);
    KernelMatrix total = std::move(layers.front());
    for (std::size_t l = 1; l < layers.size(); ++l) total.entries += layers[l].entries;
    return total;
}

Matrix cross_kernel(const nn::MlpParams& params, const Matrix& xa, const Matrix& xb) {
    const LayerSignals sa = layer_signals(params, xa);
    const LayerSignals sb = layer_signals(params, xb);
    Matrix total = Matrix::Zero(sa.deltas.front().rows(), sb.deltas.front().rows());
    for (std::size_t l = 0; l < sa.deltas.size(); ++l) {
        total += layer_kernel(sa.deltas[l], sa.inputs[l], sb.deltas[l], sb.inputs[l], sa.classes, sa.bias);
    }
    return total;
}

double feature_frobenius_norm(const nn::MlpParams& params, const Matrix& x) {
    const LayerSignals sig = layer_signals(params, x);
    const auto c = static_cast<Eigen::Index>(sig.classes);
    double total = 0.0;
    for (std::size_t l = 0; l < sig.deltas.size(); ++l) {
        const Vector dn = sig.deltas[l].rowwise().squaredNorm();
        const Vector an = sig.inputs[l].rowwise().squaredNorm();
        for (Eigen::Index r = 0; r < dn.size(); ++r) total += dn(r) * (an(r / c) + (sig.bias ? 1.0 : 0.0));
    }
    return std::sqrt(total);
}

}  // namespace tk::tangent
