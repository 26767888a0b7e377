#include "tangentkit/harness.hpp"

#include "harness_io.hpp"
#include "tangentkit/datasets.hpp"
#include "tangentkit/errors.hpp"
#include "tangentkit/linear_lab.hpp"
#include "tangentkit/parallel.hpp"
#include "tangentkit/tangent.hpp"
#include "tangentkit/trajectory.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <numeric>
#include <random>

namespace tk::harness {

namespace {

using io::CsvTable;
using io::RunDirectory;

// Independent seeds for the data, test, init, ... streams of one replica.
enum Stream : std::uint64_t { s_train = 1, s_test, s_init, s_batches, s_extra, s_corrupt, s_shuffle, s_random };

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + stream * 0xBF58476D1CE4E5B9ull + 0x94D049BB133111EBull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::string step_name(const std::string& stem, std::int64_t step) {
    return stem + "_" + std::to_string(step) + ".csv";
}

nn::Loss resolve_loss(const ExperimentConfig& c, std::size_t output_dim) {
    if (c.loss == "auto") return output_dim == 1 ? nn::Loss::bce : nn::Loss::cross_entropy;
    return nn::parse_loss(c.loss);
}

nn::MlpArch arch_for(const ExperimentConfig& c, std::size_t input_dim, std::size_t output_dim) {
    nn::MlpArch arch;
    arch.widths.push_back(static_cast<int>(input_dim));
    for (std::size_t l = 0; l < c.hidden_layers; ++l) arch.widths.push_back(static_cast<int>(c.width));
    arch.widths.push_back(static_cast<int>(output_dim));
    arch.activation = c.activation;
    arch.bias = c.bias;
    return arch;
}

std::vector<std::size_t> first_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

void add_spectrum(RunDirectory& dir, const std::string& name, const spectral::Spectrum& s) {
    CsvTable t(name, {"index", "eigenvalue"});
    for (std::size_t j = 0; j < s.size(); ++j) t.add({static_cast<double>(j), s[j]});
    dir.write(t);
}

CsvTable trace_table(const std::string& name, const traj::TrainingTrace& trace) {
    CsvTable t(name, {"step", "update_norm", "feat_fro_norm"});
    for (const auto& r : trace.steps) t.add({static_cast<double>(r.step), r.update_norm, r.feat_fro_norm});
    return t;
}

CsvTable checkpoint_table(std::size_t layers, bool uncentered) {
    std::vector<std::string> h{"step", "cka_train", "cka_test", "erank", "t40", "t80", "t160", "acc_train", "acc_test"};
    if (uncentered) {
        h.push_back("alignment_train");
        h.push_back("alignment_test");
    }
    for (std::size_t l = 0; l < layers; ++l) h.push_back("cka_layer_" + std::to_string(l));
    return CsvTable("checkpoints.csv", h);
}

void add_checkpoint(CsvTable& t, const traj::CheckpointRecord& r) {
    std::vector<double> row{static_cast<double>(r.step), r.cka_train, r.cka_test, r.erank};
    row.insert(row.end(), r.trace_ratios.begin(), r.trace_ratios.end());
    row.push_back(r.acc_train);
    row.push_back(r.acc_test);
    if (r.uncentered_train) {
        row.push_back(*r.uncentered_train);
        row.push_back(*r.uncentered_test);
    }
    row.insert(row.end(), r.cka_layers.begin(), r.cka_layers.end());
    t.add(row);
}

using CheckpointHook = std::function<void(std::int64_t, const nn::MlpParams&)>;

struct TrainOutcome {
    nn::MlpParams params;
    traj::TrainingTrace trace;
    double final_loss = 0.0;
};

// Full-batch or shuffled minibatch momentum GD. Phi_t is measured on the probe batch at the
// pre-step parameters; the hook sees the parameters before the step of the same index.
TrainOutcome train(const ExperimentConfig& c, nn::MlpParams params, const data::LabeledDataset& ds, const Matrix& probe,
                   std::uint64_t batch_seed, const CheckpointHook& hook) {
    const nn::Loss loss = resolve_loss(c, ds.output_dim());
    const Matrix targets = nn::targets_from_labels(ds.labels, ds.output_dim());
    const std::size_t n = ds.size();
    const std::size_t batch = c.batch_size == 0 ? n : c.batch_size;
    const auto checkpoints = c.checkpoint_steps();

    std::mt19937_64 rng(batch_seed);
    std::vector<std::size_t> order = first_indices(n);
    std::size_t cursor = n;
    Vector velocity;
    TrainOutcome out;
    std::size_t next = 0;
    for (std::int64_t step = 0;; ++step) {
        while (next < checkpoints.size() && checkpoints[next] < step) ++next;
        if (next < checkpoints.size() && checkpoints[next] == step) hook(step, params);
        if (step == c.steps) break;

        Matrix xb;
        Matrix tb;
        if (batch == n) {
            xb = ds.inputs;
            tb = targets;
        } else {
            if (cursor + batch > n) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            xb.resize(static_cast<Eigen::Index>(batch), ds.inputs.cols());
            tb.resize(static_cast<Eigen::Index>(batch), targets.cols());
            for (std::size_t i = 0; i < batch; ++i) {
                xb.row(static_cast<Eigen::Index>(i)) = ds.inputs.row(static_cast<Eigen::Index>(order[cursor + i]));
                tb.row(static_cast<Eigen::Index>(i)) = targets.row(static_cast<Eigen::Index>(order[cursor + i]));
            }
            cursor += batch;
        }

        const Matrix scores = nn::forward(params, xb);
        const double value = nn::loss_value(loss, scores, tb, c.reduction);
        if (!std::isfinite(value) || value > linear::kDivergenceLoss) {
            throw DivergenceError("training diverged at step " + std::to_string(step) + " (loss " +
                                  io::format_double(value) + ")");
        }
        out.final_loss = value;
        const Vector grad = nn::parameter_gradient(params, xb, nn::loss_gradient(loss, scores, tb, c.reduction));
        const Vector gradient_step = -c.learning_rate * grad;
        velocity = velocity.size() == 0 ? gradient_step : Vector(c.momentum * velocity + gradient_step);
        const double phi_norm = tangent::feature_frobenius_norm(params, probe);
        traj::record_step(out.trace, c.record_update == RecordUpdate::realized ? velocity : gradient_step, phi_norm);
        params.assign_flat(params.flat() + velocity);
    }
    out.params = std::move(params);
    return out;
}

data::LabeledDataset clusters(const ExperimentConfig& c, std::size_t n, std::uint64_t seed) {
    auto ds = data::cluster_dataset(n, c.classes, c.input_dim, c.separation, c.spread, seed);
    return ds;
}

traj::CheckpointOptions checkpoint_options(const ExperimentConfig& c) {
    traj::CheckpointOptions o;
    o.centered = !c.uncentered;
    o.uncentered_cka = c.uncentered;
    return o;
}

// Standard trained run: trace.csv and checkpoints.csv on probe-sized train and test batches.
struct TrainedRun {
    TrainOutcome outcome;
    CsvTable checkpoints;
};

TrainedRun trained_run(const ExperimentConfig& c, std::uint64_t seed, const data::LabeledDataset& train_set,
                       const data::LabeledDataset& test_set, const CheckpointHook& extra) {
    const auto arch = arch_for(c, static_cast<std::size_t>(train_set.inputs.cols()), train_set.output_dim());
    const auto probe_idx = first_indices(c.probe_size);
    const auto train_batch = train_set.batch(probe_idx);
    const auto test_batch = test_set.batch(probe_idx);
    const auto options = checkpoint_options(c);
    CsvTable table = checkpoint_table(arch.layers(), c.uncentered);
    auto hook = [&](std::int64_t step, const nn::MlpParams& p) {
        auto rec = traj::checkpoint_metrics(p, train_batch, test_batch, options);
        rec.step = step;
        add_checkpoint(table, rec);
        if (extra) extra(step, p);
    };
    auto outcome = train(c, nn::mlp_init(arch, stream_seed(seed, s_init), c.bias_init), train_set, test_batch.inputs,
                         stream_seed(seed, s_batches), hook);
    return {std::move(outcome), std::move(table)};
}

void run_disk(const ExperimentConfig& c, std::uint64_t seed, RunDirectory& dir) {
    const auto train_set = data::disk_dataset(c.samples, stream_seed(seed, s_train));
    const auto test_set = data::disk_dataset(c.test_samples, stream_seed(seed, s_test));
    const Matrix grid = data::grid_2d(c.grid, -1.0, 1.0);
    std::vector<int> grid_labels(static_cast<std::size_t>(grid.rows()));
    for (Eigen::Index i = 0; i < grid.rows(); ++i) {
        grid_labels[static_cast<std::size_t>(i)] = grid.row(i).norm() <= data::disk_radius() ? 1 : -1;
    }
    const auto y_grid = spectral::label_kernel(grid_labels, 1);

    CsvTable series("grid.csv", {"step", "lambda_1", "lambda_20", "lambda_20_over_lambda_1", "erank", "cka"});
    std::size_t emitted = c.top_k;
    auto on_checkpoint = [&](std::int64_t step, const nn::MlpParams& p) {
        const auto k = tangent::tangent_kernel(p, grid);
        const auto eig = spectral::sym_eig(c.uncentered ? k.entries : spectral::center_kernel(k).entries);
        const auto& s = eig.spectrum;
        series.add({static_cast<double>(step), s[0], s[19], s[19] / s[0], spectral::effective_rank(s),
                    spectral::cka(k, y_grid)});
        add_spectrum(dir, step_name("spectrum", step), s);

        const std::size_t count = std::min(c.top_k, s.numerical_rank());
        emitted = std::min(emitted, count);
        std::vector<std::string> header{"x", "y"};
        for (std::size_t j = 0; j < count; ++j) header.push_back("u_" + std::to_string(j));
        CsvTable fn(step_name("eigenfunctions", step), header);
        for (Eigen::Index i = 0; i < grid.rows(); ++i) {
            std::vector<double> row{grid(i, 0), grid(i, 1)};
            for (std::size_t j = 0; j < count; ++j) row.push_back(eig.vectors(i, static_cast<Eigen::Index>(j)));
            fn.add(row);
        }
        dir.write(fn);
    };
    auto run = trained_run(c, seed, train_set, test_set, on_checkpoint);
    dir.write(trace_table("trace.csv", run.outcome.trace));
    dir.write(run.checkpoints);
    dir.write(series);
    dir.info()["eigenfunctions_emitted"] = emitted;
    dir.info()["final_loss"] = run.outcome.final_loss;
}

void run_fourier(const ExperimentConfig& c, std::uint64_t seed, RunDirectory& dir) {
    const Matrix x = data::grid_1d(c.grid, 0.0, 1.0);
    const auto params = nn::mlp_init(arch_for(c, 1, 1), stream_seed(seed, s_init), c.bias_init);
    const auto k = tangent::tangent_kernel(params, x);
    const auto eig = spectral::sym_eig(c.uncentered ? k.entries : spectral::center_kernel(k).entries);
    add_spectrum(dir, step_name("spectrum", 0), eig.spectrum);

    const std::size_t count = std::min(c.top_k, eig.spectrum.numerical_rank());
    std::vector<std::string> header{"x"};
    for (std::size_t j = 0; j < count; ++j) header.push_back("u_" + std::to_string(j));
    CsvTable fn(step_name("eigenfunctions", 0), header);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        std::vector<double> row{x(i, 0)};
        for (std::size_t j = 0; j < count; ++j) row.push_back(eig.vectors(i, static_cast<Eigen::Index>(j)));
        fn.add(row);
    }
    dir.write(fn);

    const std::size_t freqs = c.grid / 2 + 1;
    std::vector<std::string> fh{"component", "eigenvalue", "dominant_frequency"};
    for (std::size_t f = 0; f < freqs; ++f) fh.push_back("f_" + std::to_string(f));
    CsvTable dft("fourier.csv", fh);
    for (std::size_t j = 0; j < count; ++j) {
        const Vector u = eig.vectors.col(static_cast<Eigen::Index>(j));
        std::vector<double> row{static_cast<double>(j), eig.spectrum[j],
                                static_cast<double>(spectral::dominant_frequency(u))};
        const auto mags = to_std(spectral::dft_magnitudes(u));
        row.insert(row.end(), mags.begin(), mags.end());
        dft.add(row);
    }
    dir.write(dft);
    dir.info()["eigenfunctions_emitted"] = count;
    if (eig.spectrum.size() >= 10) dir.info()["lambda_10_over_lambda_1"] = eig.spectrum[9] / eig.spectrum[0];
}

void run_noisy(const ExperimentConfig& c, std::uint64_t seed, RunDirectory& dir) {
    const auto setup = linear::noisy_feature_regression_setup(c.noise_features, c.samples, c.noise_variance,
                                                              stream_seed(seed, s_train), c.validation_samples);
    const double m = static_cast<double>(c.validation_samples);
    auto mse = [m](const Vector& pred, const Vector& target) { return (pred - target).squaredNorm() / m; };

    const auto gd = linear::gd_train_linear(setup.features, setup.y, linear::LinearLoss::mse, c.learning_rate, c.steps,
                                            std::nullopt, c.reduction, true);
    auto sn = linear::SuperNatState::start(setup.features);

    CsvTable curves("validation.csv", {"step", "gd_mse", "supernat_mse", "gd_mse_noisy", "supernat_mse_noisy"});
    std::vector<std::string> sh{"step"};
    for (std::size_t j = 0; j < sn.features.rank(); ++j) sh.push_back("s_" + std::to_string(j));
    CsvTable singular("singular_values.csv", sh);
    double gd_final = 0.0;
    double sn_final = 0.0;
    for (std::int64_t t = 0;; ++t) {
        const Vector gd_pred = setup.validation_phi * gd.weights[static_cast<std::size_t>(t)];
        const Vector sn_pred = sn.predict(setup.validation_phi);
        gd_final = mse(gd_pred, setup.validation_signal);
        sn_final = mse(sn_pred, setup.validation_signal);
        curves.add({static_cast<double>(t), gd_final, sn_final, mse(gd_pred, setup.validation_y),
                    mse(sn_pred, setup.validation_y)});
        std::vector<double> row{static_cast<double>(t)};
        const auto s = to_std(sn.features.s);
        row.insert(row.end(), s.begin(), s.end());
        singular.add(row);
        if (t == c.steps) break;
        sn = linear::supernat_step(sn, setup.y, c.learning_rate, c.reduction);
    }
    dir.write(curves);
    dir.write(trace_table("trace.csv", gd.trace));
    dir.write(singular);
    dir.info()["gd_final_mse"] = gd_final;
    dir.info()["supernat_final_mse"] = sn_final;
}

void run_rbf(const ExperimentConfig& c, std::uint64_t seed, RunDirectory& dir) {
    CsvTable summary("rbf.csv", {"c", "test_error", "bound_l2", "bound_optimal"});
    CsvTable solutions("rbf_solutions.csv", {"c", "subsample", "proj_1", "proj_10"});
    const std::size_t n = std::min(c.samples, c.rbf_points);
    for (double scale : c.rbf_scales) {
        // Same seed for every scale: only the singular values change between rows.
        const auto setup = linear::rbf_anisotropy_setup(c.rbf_points, c.rbf_features, c.rbf_half_width, scale,
                                                        stream_seed(seed, s_train), c.rbf_gamma, c.rbf_label_index);
        const auto& full = setup.features;
        const Eigen::Index second = std::min<Eigen::Index>(9, full.v.cols() - 1);
        std::mt19937_64 rng(stream_seed(seed, s_batches));
        std::vector<std::size_t> pool = first_indices(c.rbf_points);
        Matrix proj(static_cast<Eigen::Index>(c.rbf_subsamples), 2);
        double err = 0.0;
        double b_l2 = 0.0;
        double b_opt = 0.0;
        for (std::size_t r = 0; r < c.rbf_subsamples; ++r) {
            std::shuffle(pool.begin(), pool.end(), rng);
            std::vector<std::size_t> idx(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
            std::sort(idx.begin(), idx.end());
            Matrix phi(static_cast<Eigen::Index>(n), full.phi.cols());
            Vector y(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) {
                phi.row(static_cast<Eigen::Index>(i)) = full.phi.row(static_cast<Eigen::Index>(idx[i]));
                y(static_cast<Eigen::Index>(i)) = setup.y(static_cast<Eigen::Index>(idx[i]));
            }
            const auto sub = linear::LinearFeatures::from_matrix(phi);
            const Vector w = linear::min_norm_interpolator(sub, y, true);
            const Vector scores = full.phi * w;
            std::size_t wrong = 0;
            for (Eigen::Index i = 0; i < scores.size(); ++i) wrong += (scores(i) >= 0.0 ? 1.0 : -1.0) != setup.y(i);
            err += static_cast<double>(wrong) / static_cast<double>(scores.size());
            b_l2 += linear::min_norm_bound(sub, y);
            b_opt += linear::min_norm_bound(sub, y, linear::optimal_norm_nu(sub, y).nu);
            proj(static_cast<Eigen::Index>(r), 0) = full.v.col(0).dot(w);
            proj(static_cast<Eigen::Index>(r), 1) = full.v.col(second).dot(w);
        }
        const double k = static_cast<double>(c.rbf_subsamples);
        summary.add({scale, err / k, b_l2 / k, b_opt / k});
        const Eigen::RowVector2d mean = proj.colwise().mean();
        for (Eigen::Index r = 0; r < proj.rows(); ++r) {
            solutions.add({scale, static_cast<double>(r), proj(r, 0) - mean(0), proj(r, 1) - mean(1)});
        }
    }
    dir.write(summary);
    dir.write(solutions);
}

void run_split(const ExperimentConfig& c, std::uint64_t seed, RunDirectory& dir) {
    const std::size_t hard_n = std::max<std::size_t>(c.probe_size, c.samples / 10);
    const auto easy = clusters(c, c.samples, stream_seed(seed, s_train));
    const auto difficult = data::corrupt_labels(clusters(c, hard_n, stream_seed(seed, s_extra)), 1.0,
                                                stream_seed(seed, s_corrupt));
    const auto mix = data::easy_difficult_mix(easy, difficult, stream_seed(seed, s_shuffle));
    const auto test_set = clusters(c, c.test_samples, stream_seed(seed, s_test));

    // Equal-size subsets, as split_alignment compares kernels of the same dimension.
    const auto probe_idx = first_indices(c.probe_size);
    const auto easy_batch = easy.batch(probe_idx);
    const auto hard_batch = difficult.batch(probe_idx);
    CsvTable split("split.csv", {"step", "cka_easy", "cka_difficult", "ratio"});
    auto on_checkpoint = [&](std::int64_t step, const nn::MlpParams& p) {
        const auto a = traj::split_alignment(p, easy_batch, hard_batch);
        split.add({static_cast<double>(step), a.cka_easy, a.cka_difficult, a.ratio});
    };
    auto run = trained_run(c, seed, mix.data, test_set, on_checkpoint);
    dir.write(trace_table("trace.csv", run.outcome.trace));
    dir.write(run.checkpoints);
    dir.write(split);
    dir.info()["difficult_samples"] = hard_n;
}

void run_sweep(const ExperimentConfig& c, std::uint64_t seed, RunDirectory& dir) {
    const auto clean = clusters(c, c.samples, stream_seed(seed, s_train));
    const auto test_set = clusters(c, c.test_samples, stream_seed(seed, s_test));
    CsvTable summary("complexity.csv", {"corruption", "complexity", "final_loss", "acc_train", "acc_test"});
    for (std::size_t i = 0; i < c.corruption_levels.size(); ++i) {
        const double level = c.corruption_levels[i];
        const auto ds = data::corrupt_labels(clean, level, stream_seed(seed, s_corrupt));
        auto run = trained_run(c, seed, ds, test_set, {});
        const auto& p = run.outcome.params;
        summary.add({level, traj::complexity(run.outcome.trace), run.outcome.final_loss,
                     nn::accuracy(nn::forward(p, ds.inputs), ds.labels),
                     nn::accuracy(nn::forward(p, test_set.inputs), test_set.labels)});
        dir.write(trace_table("trace_" + std::to_string(i) + ".csv", run.outcome.trace));
    }
    dir.write(summary);
}

void run_perturbation(const ExperimentConfig& c, std::uint64_t seed, RunDirectory& dir) {
    const auto train_set = clusters(c, c.samples, stream_seed(seed, s_train));
    const auto test_set = clusters(c, c.test_samples, stream_seed(seed, s_test));
    auto run = trained_run(c, seed, train_set, test_set, {});
    dir.write(trace_table("trace.csv", run.outcome.trace));
    dir.write(run.checkpoints);

    const auto& params = run.outcome.params;
    const Matrix probe = test_set.batch(first_indices(c.probe_size)).inputs;
    const auto phi = tangent::tangent_features(params, probe, Exec::serial);
    const Matrix rows = phi.rows;
    const auto svd = spectral::svd(rows);
    const std::size_t count = std::min(c.perturbation_directions, static_cast<std::size_t>(svd.singular.size()));

    std::vector<Vector> top;
    std::vector<Vector> random;
    std::mt19937_64 rng(stream_seed(seed, s_random));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t j = 0; j < count; ++j) {
        top.push_back(svd.v.col(static_cast<Eigen::Index>(j)));
        Vector r(rows.cols());
        for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = normal(rng);
        random.push_back(r / r.norm());
    }
    const double eps = c.perturbation_magnitude;
    const auto along_top = tangent::perturbation_response(params, probe, top, eps);
    const auto along_random = tangent::perturbation_response(params, probe, random, eps);
    CsvTable t("perturbation.csv", {"index", "singular_value", "response_singular", "predicted_singular",
                                    "response_random", "predicted_random"});
    for (std::size_t j = 0; j < count; ++j) {
        const double s = svd.singular(static_cast<Eigen::Index>(j));
        t.add({static_cast<double>(j), s, along_top[j], eps * s, along_random[j], eps * (rows * random[j]).norm()});
    }
    dir.write(t);
}

void run_replica(const ExperimentConfig& c, std::uint64_t seed, RunDirectory& dir) {
    switch (c.experiment) {
        case ExperimentKind::disk_alignment: return run_disk(c, seed, dir);
        case ExperimentKind::fourier_1d: return run_fourier(c, seed, dir);
        case ExperimentKind::noisy_regression_supernat: return run_noisy(c, seed, dir);
        case ExperimentKind::rbf_anisotropy: return run_rbf(c, seed, dir);
        case ExperimentKind::split_alignment: return run_split(c, seed, dir);
        case ExperimentKind::complexity_sweep: return run_sweep(c, seed, dir);
        case ExperimentKind::perturbation_response: return run_perturbation(c, seed, dir);
    }
}

nlohmann::ordered_json echo_json(const ExperimentConfig& c) {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (const auto& [key, value] : c.echo()) out[key] = value;
    return out;
}

}  // namespace

RunResult run(const ExperimentConfig& config) {
    ConfigReport report{config, check_ranges(config)};
    if (!report.valid()) throw ConfigError(report.describe());

    RunResult result;
    for (std::size_t r = 0; r < config.replicas; ++r) {
        result.directories.push_back(config.replicas == 1
                                         ? config.output
                                         : config.output / ("seed_" + std::to_string(config.seed + r)));
    }

    std::vector<std::exception_ptr> errors(config.replicas);
    // Nested regions inside the library run on one thread, so each replica is single-threaded.
#ifdef _OPENMP
    const int saved_levels = omp_get_max_active_levels();
    omp_set_max_active_levels(1);
#endif
    const int workers = static_cast<int>(std::min(config.threads, config.replicas));
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(config.replicas); ++r) {
        const auto i = static_cast<std::size_t>(r);
        try {
            ExperimentConfig c = config;
            c.seed = config.seed + i;
            c.output = result.directories[i];
            const auto start = std::chrono::steady_clock::now();
            RunDirectory dir(c.output);
            run_replica(c, c.seed, dir);
            const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
            dir.finish(echo_json(c), took.count());
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
#ifdef _OPENMP
    omp_set_max_active_levels(saved_levels);
#endif
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return result;
}

}  // namespace tk::harness
