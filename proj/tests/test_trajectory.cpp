#include "oracles.hpp"
#include "tangentkit/datasets.hpp"
#include "tangentkit/errors.hpp"
#include "tangentkit/trajectory.hpp"

#include <doctest.h>

#include <random>

using namespace tk;

TEST_CASE("record_step and complexity") {
    traj::TrainingTrace trace;
    CHECK(traj::complexity(trace) == 0.0);

    const auto p = nn::mlp_init(nn::MlpArch{{2, 4, 1}, nn::Activation::tanh, true}, 1);
    const Matrix x = oracle::random_matrix(5, 2, 2);
    const auto phi = tangent::tangent_features(p, x);
    traj::record_step(trace, Vector::Zero(static_cast<Eigen::Index>(p.size())), phi);
    REQUIRE(trace.steps.size() == 1);
    CHECK(trace.steps[0].step == 0);
    CHECK(trace.steps[0].update_norm == 0.0);
    CHECK(trace.steps[0].feat_fro_norm == doctest::Approx(Matrix(phi.rows).norm()).epsilon(1e-14));
    CHECK(traj::complexity(trace) == 0.0);

    const Vector dw = oracle::random_vector(static_cast<Eigen::Index>(p.size()), 3);
    traj::record_step(trace, dw, phi);
    CHECK(trace.steps.size() == 2);
    CHECK(trace.steps[0].update_norm == 0.0);
    CHECK(trace.steps[1].step == 1);
    CHECK(trace.steps[1].update_norm == doctest::Approx(std::sqrt(dw.squaredNorm())).epsilon(1e-14));

    traj::TrainingTrace single;
    traj::record_step(single, 2.0, 3.0);
    CHECK(traj::complexity(single) == 6.0);

    traj::TrainingTrace five;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    double hand = 0.0;
    for (int t = 0; t < 5; ++t) {
        const double a = u(rng), b = u(rng);
        hand += a * b;
        traj::record_step(five, a, b);
    }
    CHECK(traj::complexity(five) == doctest::Approx(hand).epsilon(1e-14));

    CHECK_THROWS_AS(traj::record_step(five, -1.0, 1.0), ValidationError);
    CHECK_THROWS_AS(traj::record_step(five, 1.0, std::nan("")), ValidationError);
}

TEST_CASE("complexity is additive under concatenation and ignores checkpoints") {
    traj::TrainingTrace a, b;
    for (int t = 0; t < 4; ++t) traj::record_step(a, 0.5 * t, 1.0 + t);
    for (int t = 0; t < 3; ++t) traj::record_step(b, 1.5, 0.2 * t);
    const auto ab = traj::concat(a, b);
    CHECK(traj::complexity(ab) == doctest::Approx(traj::complexity(a) + traj::complexity(b)).epsilon(1e-14));
    for (std::size_t i = 1; i < ab.steps.size(); ++i) CHECK(ab.steps[i].step == ab.steps[i - 1].step + 1);

    auto with_cp = a;
    with_cp.checkpoints.push_back(traj::CheckpointRecord{});
    CHECK(traj::complexity(with_cp) == traj::complexity(a));

    double prev = 0.0;
    traj::TrainingTrace grow;
    for (int t = 0; t < 6; ++t) {
        traj::record_step(grow, 0.1 * t, 2.0);
        CHECK(traj::complexity(grow) >= prev);
        prev = traj::complexity(grow);
    }
}

TEST_CASE("log_schedule and scaled trace indices") {
    CHECK(traj::log_schedule(2000) ==
          std::vector<std::int64_t>{0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000});
    CHECK(traj::log_schedule(30) == std::vector<std::int64_t>{0, 1, 2, 5, 10, 20, 30});
    CHECK(traj::log_schedule(0) == std::vector<std::int64_t>{0});
    const std::vector<std::size_t> ks{40, 80, 160};
    CHECK(traj::scaled_trace_ks(ks, 1000) == ks);
    CHECK(traj::scaled_trace_ks(ks, 100) == std::vector<std::size_t>{4, 8, 16});
    CHECK(traj::scaled_trace_ks(ks, 5) == std::vector<std::size_t>{1, 1, 1});
}

TEST_CASE("checkpoint_metrics") {
    const auto ds = data::cluster_dataset(40, 2, 3, 3.0, 0.5, 5);
    const auto test = data::cluster_dataset(30, 2, 3, 3.0, 0.5, 6);
    const auto p = nn::mlp_init(nn::MlpArch{{3, 12, 12, 1}, nn::Activation::tanh, true}, 7);
    traj::CheckpointOptions opt;
    opt.uncentered_cka = true;
    const auto rec = traj::checkpoint_metrics(p, ds.batch(), test.batch(), opt);
    for (double v : {rec.cka_train, rec.cka_test, *rec.uncentered_train, *rec.uncentered_test}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(rec.cka_layers.size() == 3);
    for (double v : rec.cka_layers) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(rec.erank >= 1.0);
    CHECK(rec.erank <= 40.0);
    CHECK(rec.trace_ks == std::vector<std::size_t>{2, 3, 6});
    for (std::size_t i = 1; i < rec.trace_ratios.size(); ++i) CHECK(rec.trace_ratios[i] >= rec.trace_ratios[i - 1]);
    CHECK(rec.spectrum.size() == 40);

    // A kernel equal to the label kernel is perfectly aligned.
    const auto ky = spectral::label_kernel(ds.labels, 1);
    CHECK(spectral::cka(ky, ky) == doctest::Approx(1.0));

    const auto wrong = nn::mlp_init(nn::MlpArch{{3, 4, 2}, nn::Activation::tanh, true}, 1);
    CHECK_THROWS_AS(traj::checkpoint_metrics(wrong, ds.batch(), test.batch()), DimensionError);
}

TEST_CASE("checkpoint_metrics: random labels give near-zero alignment") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> pick(0, 9);
    traj::LabeledBatch train{oracle::random_matrix(100, 5, 9), {}, 10};
    for (int i = 0; i < 100; ++i) train.labels.push_back(pick(rng));
    const auto p = nn::mlp_init(nn::MlpArch{{5, 16, 10}, nn::Activation::relu, true}, 10);
    const auto rec = traj::checkpoint_metrics(p, train, train);
    CHECK(rec.cka_train < 0.2);
    CHECK(rec.erank <= static_cast<double>(std::min<std::size_t>(1000, p.size())));
}

namespace {

// Full-batch GD on a binary problem with BCE.
nn::MlpParams train(nn::MlpParams p, const data::LabeledDataset& ds, int steps, double eta) {
    const Matrix t = nn::targets_from_labels(ds.labels, 1);
    for (int s = 0; s < steps; ++s) {
        p = tangent::gd_step(p, ds.inputs, t, nn::Loss::bce, eta, 0.0, Vector(), nn::Reduction::mean).params;
    }
    return p;
}

// Difficult subset: the same inputs with labels shuffled.
data::LabeledDataset permuted(const data::LabeledDataset& ds, std::uint64_t seed) {
    auto out = ds;
    std::mt19937_64 rng(seed);
    std::shuffle(out.labels.begin(), out.labels.end(), rng);
    return out;
}

}  // namespace

TEST_CASE("split_alignment") {
    const auto easy = data::cluster_dataset(40, 2, 2, 2.5, 0.6, 11);
    const auto p = nn::mlp_init(nn::MlpArch{{2, 16, 16, 1}, nn::Activation::relu, true}, 12);
    const auto same = traj::split_alignment(p, easy.batch(), easy.batch());
    CHECK(same.ratio == doctest::Approx(1.0).epsilon(1e-14));
    const auto small = data::cluster_dataset(10, 2, 2, 2.5, 0.6, 13);
    CHECK_THROWS_AS(traj::split_alignment(p, easy.batch(), small.batch()), DimensionError);
}

TEST_CASE("split_alignment: untrained baseline") {
    // Two independent draws of the same cluster problem: nothing distinguishes them before training.
    // A shuffled-label subset is no baseline here, since an untrained tangent kernel is already
    // smooth in input space and aligns with separable labels (ratios of 7 to 200 at init).
    int in_band = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto a = data::cluster_dataset(50, 2, 2, 2.5, 0.6, 100 + seed);
        const auto b = data::cluster_dataset(50, 2, 2, 2.5, 0.6, 200 + seed);
        const auto p0 = nn::mlp_init(nn::MlpArch{{2, 32, 32, 32, 1}, nn::Activation::relu, true}, 400 + seed);
        const auto s0 = traj::split_alignment(p0, a.batch(), b.batch());
        if (s0.ratio >= 0.5 && s0.ratio <= 2.0) ++in_band;
    }
    CHECK(in_band == 10);
}

TEST_CASE("split_alignment: training favours the easy subset") {
    int easy_wins = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto easy = data::cluster_dataset(50, 2, 2, 2.5, 0.6, 100 + seed);
        const auto hard = permuted(easy, 300 + seed);
        const auto p0 = nn::mlp_init(nn::MlpArch{{2, 32, 32, 32, 1}, nn::Activation::relu, true}, 400 + seed);
        const auto mix = data::easy_difficult_mix(easy, hard, seed);
        const auto p1 = train(p0, mix.data, 300, 0.2);
        const auto s1 = traj::split_alignment(p1, easy.batch(), hard.batch());
        if (s1.cka_easy > s1.cka_difficult) ++easy_wins;
    }
    CHECK(easy_wins >= 3);
}
