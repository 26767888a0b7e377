#include "tangentkit/datasets.hpp"

#include "tangentkit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tk::data {

void LabeledDataset::validate() const {
    if (static_cast<std::size_t>(inputs.rows()) != labels.size()) {
        throw ValidationError("dataset: " + std::to_string(inputs.rows()) + " inputs but " +
                              std::to_string(labels.size()) + " labels");
    }
    if (corruption < 0.0 || corruption > 1.0) throw ValidationError("dataset: corruption fraction outside [0,1]");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int l = labels[i];
        const bool ok = kind == LabelKind::binary ? (l == 1 || l == -1)
                                                  : (l >= 0 && static_cast<std::size_t>(l) < classes);
        if (!ok) throw ValidationError("dataset: invalid label " + std::to_string(l) + " at index " + std::to_string(i));
    }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
    LabeledDataset out;
    out.kind = kind;
    out.classes = classes;
    out.generator = generator;
    out.seed = seed;
    out.corruption = corruption;
    out.inputs.resize(static_cast<Eigen::Index>(indices.size()), inputs.cols());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        out.inputs.row(static_cast<Eigen::Index>(k)) = inputs.row(static_cast<Eigen::Index>(indices[k]));
        out.labels.push_back(labels[indices[k]]);
    }
    return out;
}

traj::LabeledBatch LabeledDataset::batch() const { return {inputs, labels, output_dim()}; }

traj::LabeledBatch LabeledDataset::batch(std::span<const std::size_t> indices) const {
    return subset(indices).batch();
}

LabeledDataset disk_dataset(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw ValidationError("disk_dataset: n must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    LabeledDataset ds;
    ds.generator = "disk";
    ds.seed = seed;
    ds.kind = LabelKind::binary;
    ds.classes = 2;
    ds.inputs.resize(static_cast<Eigen::Index>(n), 2);
    const double r = disk_radius();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = unif(rng);
        const double y = unif(rng);
        ds.inputs(static_cast<Eigen::Index>(i), 0) = x;
        ds.inputs(static_cast<Eigen::Index>(i), 1) = y;
        ds.labels.push_back(std::hypot(x, y) <= r ? 1 : -1);
    }
    return ds;
}

Matrix grid_1d(std::size_t n, double lo, double hi) {
    if (n < 2) throw ValidationError("grid_1d: need at least 2 points");
    Matrix g(static_cast<Eigen::Index>(n), 1);
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) g(static_cast<Eigen::Index>(i), 0) = lo + step * static_cast<double>(i);
    g(static_cast<Eigen::Index>(n - 1), 0) = hi;
    return g;
}

Matrix grid_2d(std::size_t side, double lo, double hi) {
    const Matrix axis = grid_1d(side, lo, hi);
    Matrix g(static_cast<Eigen::Index>(side * side), 2);
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            const auto row = static_cast<Eigen::Index>(r * side + c);
            g(row, 0) = axis(static_cast<Eigen::Index>(c), 0);
            g(row, 1) = axis(static_cast<Eigen::Index>(r), 0);
        }
    }
    return g;
}

LabeledDataset cluster_dataset(std::size_t n, std::size_t classes, std::size_t dim, double separation, double spread,
                               std::uint64_t seed) {
    if (classes < 2) throw ValidationError("cluster_dataset: need at least 2 classes");
    if (dim < 2) throw ValidationError("cluster_dataset: need at least 2 input dimensions");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
    LabeledDataset ds;
    ds.generator = "cluster";
    ds.seed = seed;
    ds.kind = classes == 2 ? LabelKind::binary : LabelKind::multiclass;
    ds.classes = classes;
    ds.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    constexpr double kTwoPi = 6.28318530717958647692;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = pick(rng);
        const double angle = kTwoPi * static_cast<double>(k) / static_cast<double>(classes);
        const auto row = static_cast<Eigen::Index>(i);
        for (std::size_t d = 0; d < dim; ++d) ds.inputs(row, static_cast<Eigen::Index>(d)) = spread * normal(rng);
        ds.inputs(row, 0) += separation * std::cos(angle);
        ds.inputs(row, 1) += separation * std::sin(angle);
        ds.labels.push_back(ds.kind == LabelKind::binary ? (k == 0 ? 1 : -1) : static_cast<int>(k));
    }
    return ds;
}

LabeledDataset corrupt_labels(const LabeledDataset& ds, double fraction, std::uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0) throw ValidationError("corrupt_labels: fraction outside [0,1]");
    LabeledDataset out = ds;
    const std::size_t n = ds.size();
    const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    out.corruption = fraction;
    out.corrupted.clear();
    if (count == 0) return out;

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(count);
    std::sort(order.begin(), order.end());

    std::uniform_int_distribution<std::size_t> pick(0, ds.classes - 1);
    for (std::size_t idx : order) {
        const std::size_t k = pick(rng);
        out.labels[idx] = ds.kind == LabelKind::binary ? (k == 0 ? 1 : -1) : static_cast<int>(k);
    }
    out.corrupted = std::move(order);
    return out;
}

MixedDataset easy_difficult_mix(const LabeledDataset& easy, const LabeledDataset& difficult,
                                std::optional<std::uint64_t> shuffle_seed) {
    if (easy.inputs.cols() != difficult.inputs.cols()) {
        throw DimensionError("easy_difficult_mix: input dimensions differ");
    }
    if (easy.kind != difficult.kind || easy.classes != difficult.classes) {
        throw DimensionError("easy_difficult_mix: label alphabets differ");
    }
    const std::size_t total = easy.size() + difficult.size();
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    if (shuffle_seed) {
        std::mt19937_64 rng(*shuffle_seed);
        std::shuffle(order.begin(), order.end(), rng);
    }

    MixedDataset out;
    out.data.kind = easy.kind;
    out.data.classes = easy.classes;
    out.data.generator = "mix(" + easy.generator + "," + difficult.generator + ")";
    out.data.inputs.resize(static_cast<Eigen::Index>(total), easy.inputs.cols());
    for (std::size_t k = 0; k < total; ++k) {
        const std::size_t src = order[k];
        const bool hard = src >= easy.size();
        const auto& from = hard ? difficult : easy;
        const std::size_t i = hard ? src - easy.size() : src;
        out.data.inputs.row(static_cast<Eigen::Index>(k)) = from.inputs.row(static_cast<Eigen::Index>(i));
        out.data.labels.push_back(from.labels[i]);
        out.difficult.push_back(hard);
    }
    return out;
}

}  // namespace tk::data
