#pragma once

#include "tangentkit/spectral.hpp"
#include "tangentkit/trajectory.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tk::data {

enum class LabelKind { binary, multiclass };

/// Inputs plus labels. Binary labels are +-1 (network output width 1);
/// multiclass labels are indices in [0, classes).
struct LabeledDataset {
    Matrix inputs;
    std::vector<int> labels;
    LabelKind kind = LabelKind::binary;
    std::size_t classes = 2;  // label alphabet size; 2 for binary
    std::string generator;
    std::uint64_t seed = 0;
    double corruption = 0.0;
    std::vector<std::size_t> corrupted;  // indices whose labels were resampled

    std::size_t size() const { return labels.size(); }
    // Network output width: 1 for binary, classes otherwise.
    std::size_t output_dim() const { return kind == LabelKind::binary ? 1 : classes; }
    void validate() const;

    LabeledDataset subset(std::span<const std::size_t> indices) const;
    traj::LabeledBatch batch() const;
    traj::LabeledBatch batch(std::span<const std::size_t> indices) const;
};

/// x ~ Unif[-1,1]^2, label +1 iff ||x|| <= sqrt(2/pi).
LabeledDataset disk_dataset(std::size_t n, std::uint64_t seed);
inline double disk_radius() { return std::sqrt(2.0 / 3.14159265358979323846); }

/// n equally spaced points from lo to hi inclusive, as an n x 1 matrix.
Matrix grid_1d(std::size_t n, double lo, double hi);

/// side x side grid over [lo,hi]^2, row-major in (y, x).
Matrix grid_2d(std::size_t side, double lo, double hi);

/// Gaussian blobs: class means spaced on a circle of radius `separation` in the first
/// two coordinates, unit-variance noise scaled by `spread`.
LabeledDataset cluster_dataset(std::size_t n, std::size_t classes, std::size_t dim, double separation, double spread,
                               std::uint64_t seed);

/// Resample floor(fraction * n) uniformly chosen labels uniformly over the label alphabet.
LabeledDataset corrupt_labels(const LabeledDataset& ds, double fraction, std::uint64_t seed);

struct MixedDataset {
    LabeledDataset data;
    std::vector<bool> difficult;  // membership mask, same order as data
};

/// Concatenation (easy first) with a membership mask; shuffled when seed is given.
MixedDataset easy_difficult_mix(const LabeledDataset& easy, const LabeledDataset& difficult,
                                std::optional<std::uint64_t> shuffle_seed = std::nullopt);

/// IDX image/label pair (magic 0x00000803 / 0x00000801, big-endian sizes). Pixels scaled to [0,1].
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

struct CsvSchema {
    bool header = false;
    LabelKind kind = LabelKind::multiclass;
    std::size_t classes = 0;  // 0: infer as max label + 1
};

/// Numeric CSV, comma separated, '.' decimal, label in the last column.
LabeledDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

}  // namespace tk::data
