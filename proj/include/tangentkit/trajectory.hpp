#pragma once

#include "tangentkit/mlp.hpp"
#include "tangentkit/spectral.hpp"
#include "tangentkit/tangent.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace tk::traj {

struct StepRecord {
    std::int64_t step = 0;
    double update_norm = 0.0;    // ||delta w_t||_2
    double feat_fro_norm = 0.0;  // ||Phi_t||_F on the probe batch
};

struct CheckpointRecord {
    std::int64_t step = 0;
    double cka_train = 0.0;
    double cka_test = 0.0;
    double erank = 0.0;
    std::vector<std::size_t> trace_ks;
    std::vector<double> trace_ratios;
    std::vector<double> cka_layers;
    double acc_train = 0.0;
    double acc_test = 0.0;
    std::optional<double> uncentered_train;
    std::optional<double> uncentered_test;
    spectral::Spectrum spectrum;  // centered train-batch kernel
};

/// Step records are strictly increasing in step index; checkpoints are sparse.
struct TrainingTrace {
    std::vector<StepRecord> steps;
    std::vector<CheckpointRecord> checkpoints;

    std::int64_t next_step() const { return steps.empty() ? 0 : steps.back().step + 1; }
};

/// Appends one record at the next step index. The feature matrix is reduced to its norm.
void record_step(TrainingTrace& trace, const Vector& delta_w, const tangent::TangentFeatureMatrix& phi);
void record_step(TrainingTrace& trace, const Vector& delta_w, double feat_fro_norm);
void record_step(TrainingTrace& trace, double update_norm, double feat_fro_norm);

/// Concatenation; b's steps are renumbered to follow a's.
TrainingTrace concat(const TrainingTrace& a, const TrainingTrace& b);

/// C = sum_t ||delta w_t||_2 ||Phi_t||_F. Zero for an empty trace.
double complexity(const TrainingTrace& trace);

struct LabeledBatch {
    Matrix inputs;
    std::vector<int> labels;  // +-1 when classes == 1, indices otherwise
    std::size_t classes = 1;
};

struct CheckpointOptions {
    bool centered = true;       // center the tangent kernel before erank / trace ratios
    bool uncentered_cka = false;
    std::vector<std::size_t> trace_ks{40, 80, 160};
};

/// Trace-ratio indices {40, 80, 160} rescaled from a 1000-row kernel to `dim` rows.
std::vector<std::size_t> scaled_trace_ks(std::span<const std::size_t> ks, std::size_t dim);

/// Kernel, CKA-to-labels, erank, trace ratios, layer CKA and accuracy at one checkpoint.
CheckpointRecord checkpoint_metrics(const nn::MlpParams& params, const LabeledBatch& train,
                                    const LabeledBatch& test, const CheckpointOptions& options = {});

struct SplitAlignment {
    double cka_easy = 0.0;
    double cka_difficult = 0.0;
    double ratio = 0.0;  // cka_easy / cka_difficult
};

SplitAlignment split_alignment(const nn::MlpParams& params, const LabeledBatch& easy, const LabeledBatch& difficult);

/// 0, 1, 2, 5, 10, 20, 50, ... up to and including `last`.
std::vector<std::int64_t> log_schedule(std::int64_t last);

}  // namespace tk::traj
