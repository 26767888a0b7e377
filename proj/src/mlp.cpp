#include "tangentkit/mlp.hpp"

#include "tangentkit/errors.hpp"

#include <cmath>
#include <random>

namespace tk::nn {

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    throw ValidationError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Loss parse_loss(const std::string& name) {
    if (name == "mse") return Loss::mse;
    if (name == "cross_entropy") return Loss::cross_entropy;
    if (name == "bce") return Loss::bce;
    throw ValidationError("unknown loss '" + name + "' (expected mse, cross_entropy or bce)");
}

std::string to_string(Loss l) {
    switch (l) {
        case Loss::mse: return "mse";
        case Loss::cross_entropy: return "cross_entropy";
        case Loss::bce: return "bce";
    }
    return "?";
}

std::size_t MlpArch::parameter_count() const {
    std::size_t p = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const auto in = static_cast<std::size_t>(widths[l]);
        const auto out = static_cast<std::size_t>(widths[l + 1]);
        p += in * out + (bias ? out : 0);
    }
    return p;
}

void MlpArch::validate() const {
    if (widths.size() < 2) throw ValidationError("MlpArch: need at least input and output widths");
    for (int w : widths) {
        if (w < 1) throw ValidationError("MlpArch: widths must be >= 1");
    }
}

std::vector<LayerSpan> MlpParams::layer_spans() const {
    std::vector<LayerSpan> spans;
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const Eigen::Index count = weights[l].size() + (arch.bias ? biases[l].size() : 0);
        spans.push_back({l, offset, offset + count});
        offset += count;
    }
    return spans;
}

Vector MlpParams::flat() const {
    Vector out(static_cast<Eigen::Index>(size()));
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const Matrix& w = weights[l];
        for (Eigen::Index o = 0; o < w.rows(); ++o) {
            for (Eigen::Index i = 0; i < w.cols(); ++i) out(k++) = w(o, i);
        }
        if (arch.bias) {
            out.segment(k, biases[l].size()) = biases[l];
            k += biases[l].size();
        }
    }
    return out;
}

void MlpParams::assign_flat(const Vector& flat) {
    if (flat.size() != static_cast<Eigen::Index>(size())) {
        throw DimensionError("MlpParams: flat vector has " + std::to_string(flat.size()) + " entries, expected " +
                             std::to_string(size()));
    }
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        Matrix& w = weights[l];
        for (Eigen::Index o = 0; o < w.rows(); ++o) {
            for (Eigen::Index i = 0; i < w.cols(); ++i) w(o, i) = flat(k++);
        }
        if (arch.bias) {
            biases[l] = flat.segment(k, biases[l].size());
            k += biases[l].size();
        }
    }
}

MlpParams MlpParams::from_flat(const MlpArch& arch, const Vector& flat) {
    MlpParams p = zeros_like(arch);
    p.assign_flat(flat);
    return p;
}

MlpParams zeros_like(const MlpArch& arch) {
    arch.validate();
    MlpParams p;
    p.arch = arch;
    for (std::size_t l = 0; l < arch.layers(); ++l) {
        p.weights.push_back(Matrix::Zero(arch.widths[l + 1], arch.widths[l]));
        p.biases.push_back(arch.bias ? Vector::Zero(arch.widths[l + 1]) : Vector());
    }
    return p;
}

MlpParams mlp_init(const MlpArch& arch, std::uint64_t seed, BiasInit bias_init) {
    MlpParams p = zeros_like(arch);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double gain = arch.activation == Activation::relu ? 2.0 : 1.0;
    for (auto& w : p.weights) {
        const double stddev = std::sqrt(gain / static_cast<double>(w.cols()));
        for (Eigen::Index o = 0; o < w.rows(); ++o) {
            for (Eigen::Index i = 0; i < w.cols(); ++i) w(o, i) = stddev * normal(rng);
        }
    }
    if (bias_init == BiasInit::fan_in_uniform && arch.bias) {
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        for (std::size_t l = 0; l < p.biases.size(); ++l) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(p.weights[l].cols()));
            for (Eigen::Index o = 0; o < p.biases[l].size(); ++o) p.biases[l](o) = bound * unit(rng);
        }
    }
    return p;
}

namespace {

void apply_activation(Activation a, Matrix& z) {
    if (a == Activation::relu) {
        z = z.cwiseMax(0.0);
    } else {
        z = z.array().tanh().matrix();
    }
}

void check_input(const MlpParams& params, const Matrix& x) {
    if (x.cols() != params.arch.input_dim()) {
        throw DimensionError("forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                             std::to_string(params.arch.input_dim()));
    }
}

}  // namespace

Matrix activation_derivative(Activation a, const Matrix& z) {
    if (a == Activation::relu) return (z.array() > 0.0).cast<double>().matrix();
    return (1.0 - z.array().tanh().square()).matrix();
}

ForwardCache forward_cached(const MlpParams& params, const Matrix& x) {
    check_input(params, x);
    ForwardCache cache;
    const std::size_t layers = params.weights.size();
    cache.inputs.reserve(layers);
    cache.preacts.reserve(layers);
    Matrix a = x;
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix z = a * params.weights[l].transpose();
        if (params.arch.bias) z.rowwise() += params.biases[l].transpose();
        cache.inputs.push_back(std::move(a));
        if (l + 1 < layers) {
            a = z;
            apply_activation(params.arch.activation, a);
        }
        cache.preacts.push_back(std::move(z));
    }
    return cache;
}

Matrix forward(const MlpParams& params, const Matrix& x) {
    check_input(params, x);
    Matrix a = x;
    const std::size_t layers = params.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix z = a * params.weights[l].transpose();
        if (params.arch.bias) z.rowwise() += params.biases[l].transpose();
        if (l + 1 < layers) apply_activation(params.arch.activation, z);
        a = std::move(z);
    }
    return a;
}

Vector parameter_gradient(const MlpParams& params, const Matrix& x, const Matrix& output_grad) {
    const ForwardCache cache = forward_cached(params, x);
    if (output_grad.rows() != x.rows() || output_grad.cols() != params.arch.output_dim()) {
        throw DimensionError("parameter_gradient: output gradient shape mismatch");
    }
    MlpParams grad = zeros_like(params.arch);
    Matrix delta = output_grad;
    for (std::size_t l = params.weights.size(); l-- > 0;) {
        grad.weights[l].noalias() = delta.transpose() * cache.inputs[l];
        if (params.arch.bias) grad.biases[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            Matrix back = delta * params.weights[l];
            delta = back.cwiseProduct(activation_derivative(params.arch.activation, cache.preacts[l - 1]));
        }
    }
    return grad.flat();
}

double loss_value(Loss loss, const Matrix& scores, const Matrix& targets, Reduction r) {
    if (scores.rows() != targets.rows() || scores.cols() != targets.cols()) {
        throw DimensionError("loss_value: scores and targets differ in shape");
    }
    double total = 0.0;
    switch (loss) {
        case Loss::mse:
            total = 0.5 * (scores - targets).squaredNorm();
            break;
        case Loss::cross_entropy:
            for (Eigen::Index i = 0; i < scores.rows(); ++i) {
                const double m = scores.row(i).maxCoeff();
                const double lse = m + std::log((scores.row(i).array() - m).exp().sum());
                total += lse - scores.row(i).dot(targets.row(i));
            }
            break;
        case Loss::bce:
            if (scores.cols() != 1) throw DimensionError("bce loss needs a single output column");
            for (Eigen::Index i = 0; i < scores.rows(); ++i) {
                const double m = -targets(i, 0) * scores(i, 0);
                // log(1 + e^m), stable for large |m|
                total += m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
            }
            break;
    }
    return r == Reduction::mean ? total / static_cast<double>(scores.rows()) : total;
}

Matrix loss_gradient(Loss loss, const Matrix& scores, const Matrix& targets, Reduction r) {
    if (scores.rows() != targets.rows() || scores.cols() != targets.cols()) {
        throw DimensionError("loss_gradient: scores and targets differ in shape");
    }
    Matrix g(scores.rows(), scores.cols());
    switch (loss) {
        case Loss::mse:
            g = scores - targets;
            break;
        case Loss::cross_entropy:
            for (Eigen::Index i = 0; i < scores.rows(); ++i) {
                const double m = scores.row(i).maxCoeff();
                Eigen::RowVectorXd e = (scores.row(i).array() - m).exp().matrix();
                g.row(i) = e / e.sum() - targets.row(i);
            }
            break;
        case Loss::bce:
            if (scores.cols() != 1) throw DimensionError("bce loss needs a single output column");
            for (Eigen::Index i = 0; i < scores.rows(); ++i) {
                const double y = targets(i, 0);
                // d/df log(1+exp(-y f)) = -y * sigmoid(-y f)
                const double m = -y * scores(i, 0);
                const double sig = m >= 0 ? 1.0 / (1.0 + std::exp(-m)) : std::exp(m) / (1.0 + std::exp(m));
                g(i, 0) = -y * sig;
            }
            break;
    }
    if (r == Reduction::mean) g /= static_cast<double>(scores.rows());
    return g;
}

Matrix targets_from_labels(std::span<const int> labels, std::size_t classes) {
    const auto n = static_cast<Eigen::Index>(labels.size());
    if (classes <= 1) {
        Matrix t(n, 1);
        for (Eigen::Index i = 0; i < n; ++i) t(i, 0) = labels[static_cast<std::size_t>(i)];
        return t;
    }
    Matrix t = Matrix::Zero(n, static_cast<Eigen::Index>(classes));
    for (Eigen::Index i = 0; i < n; ++i) t(i, labels[static_cast<std::size_t>(i)]) = 1.0;
    return t;
}

double accuracy(const Matrix& scores, std::span<const int> labels) {
    if (static_cast<std::size_t>(scores.rows()) != labels.size()) {
        throw DimensionError("accuracy: score rows and labels differ");
    }
    if (labels.empty()) return 0.0;
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const int label = labels[static_cast<std::size_t>(i)];
        int predicted = 0;
        if (scores.cols() == 1) {
            predicted = scores(i, 0) >= 0.0 ? 1 : -1;
        } else {
            Eigen::Index arg = 0;
            scores.row(i).maxCoeff(&arg);
            predicted = static_cast<int>(arg);
        }
        correct += predicted == label ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace tk::nn
