#include "tangentkit/trajectory.hpp"

#include "tangentkit/errors.hpp"

#include <algorithm>
#include <cmath>

namespace tk::traj {

void record_step(TrainingTrace& trace, double update_norm, double feat_fro_norm) {
    if (!(update_norm >= 0.0) || !std::isfinite(update_norm) || !(feat_fro_norm >= 0.0) ||
        !std::isfinite(feat_fro_norm)) {
        throw ValidationError("record_step: norms must be finite and non-negative");
    }
    trace.steps.push_back({trace.next_step(), update_norm, feat_fro_norm});
}

void record_step(TrainingTrace& trace, const Vector& delta_w, double feat_fro_norm) {
    record_step(trace, delta_w.norm(), feat_fro_norm);
}

void record_step(TrainingTrace& trace, const Vector& delta_w, const tangent::TangentFeatureMatrix& phi) {
    record_step(trace, delta_w.norm(), phi.rows.norm());
}

TrainingTrace concat(const TrainingTrace& a, const TrainingTrace& b) {
    TrainingTrace out = a;
    const std::int64_t offset = a.next_step() - (b.steps.empty() ? 0 : b.steps.front().step);
    for (StepRecord r : b.steps) {
        r.step += offset;
        out.steps.push_back(r);
    }
    for (CheckpointRecord c : b.checkpoints) {
        c.step += offset;
        out.checkpoints.push_back(std::move(c));
    }
    return out;
}

double complexity(const TrainingTrace& trace) {
    double total = 0.0;
    for (const auto& r : trace.steps) total += r.update_norm * r.feat_fro_norm;
    return total;
}

std::vector<std::size_t> scaled_trace_ks(std::span<const std::size_t> ks, std::size_t dim) {
    std::vector<std::size_t> out;
    for (std::size_t k : ks) {
        const double scaled = std::round(static_cast<double>(k) * static_cast<double>(dim) / 1000.0);
        out.push_back(std::clamp<std::size_t>(static_cast<std::size_t>(scaled), 1, dim));
    }
    return out;
}

CheckpointRecord checkpoint_metrics(const nn::MlpParams& params, const LabeledBatch& train,
                                    const LabeledBatch& test, const CheckpointOptions& options) {
    const std::size_t c = train.classes <= 1 ? 1 : train.classes;
    if (static_cast<std::size_t>(params.arch.output_dim()) != c) {
        throw DimensionError("checkpoint_metrics: network output width does not match class count");
    }
    CheckpointRecord rec;
    const auto layers = tangent::layerwise_kernels(params, train.inputs);
    spectral::KernelMatrix k_train = layers.front();
    for (std::size_t l = 1; l < layers.size(); ++l) k_train.entries += layers[l].entries;
    const auto k_test = tangent::tangent_kernel(params, test.inputs);

    const auto y_train = spectral::label_kernel(train.labels, train.classes);
    const auto y_test = spectral::label_kernel(test.labels, test.classes);

    // cka centers internally, so raw kernels are passed.
    rec.cka_train = spectral::cka(k_train, y_train);
    rec.cka_test = spectral::cka(k_test, y_test);
    for (const auto& kl : layers) rec.cka_layers.push_back(spectral::cka(kl, y_train));
    if (options.uncentered_cka) {
        rec.uncentered_train = spectral::kernel_alignment(k_train, y_train);
        rec.uncentered_test = spectral::kernel_alignment(k_test, y_test);
    }

    const auto spec_kernel = options.centered ? spectral::center_kernel(k_train) : k_train;
    rec.spectrum = spectral::sym_eigenvalues(spec_kernel.entries);
    rec.erank = spectral::effective_rank(rec.spectrum);
    rec.trace_ks = scaled_trace_ks(options.trace_ks, rec.spectrum.size());
    rec.trace_ratios = spectral::trace_ratios(rec.spectrum, rec.trace_ks);

    rec.acc_train = nn::accuracy(nn::forward(params, train.inputs), train.labels);
    rec.acc_test = nn::accuracy(nn::forward(params, test.inputs), test.labels);
    return rec;
}

SplitAlignment split_alignment(const nn::MlpParams& params, const LabeledBatch& easy, const LabeledBatch& difficult) {
    if (easy.inputs.rows() != difficult.inputs.rows()) {
        throw DimensionError("split_alignment: subsets must have equal size");
    }
    SplitAlignment out;
    out.cka_easy = spectral::cka(tangent::tangent_kernel(params, easy.inputs),
                                 spectral::label_kernel(easy.labels, easy.classes));
    out.cka_difficult = spectral::cka(tangent::tangent_kernel(params, difficult.inputs),
                                      spectral::label_kernel(difficult.labels, difficult.classes));
    out.ratio = out.cka_easy / out.cka_difficult;
    return out;
}

std::vector<std::int64_t> log_schedule(std::int64_t last) {
    std::vector<std::int64_t> out{0};
    for (std::int64_t decade = 1; decade <= last; decade *= 10) {
        for (std::int64_t m : {1, 2, 5}) {
            if (m * decade <= last) out.push_back(m * decade);
        }
    }
    if (out.back() != last) out.push_back(last);
    return out;
}

}  // namespace tk::traj
