// Acceptance checks, one PASS/FAIL line per criterion. Exit status is the number of failures.
#include "tangentkit/datasets.hpp"
#include "tangentkit/harness.hpp"
#include "tangentkit/linear_lab.hpp"
#include "tangentkit/tangent.hpp"
#include "tangentkit/trajectory.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace tk;
namespace fs = std::filesystem;
namespace h = tk::harness;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x, int digits = 3) {
    std::ostringstream out;
    out.precision(digits);
    out << x;
    return out.str();
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
}

Vector unit(Eigen::Index n, std::mt19937_64& rng) {
    Vector v = gaussian(n, 1, rng).col(0);
    return v / v.norm();
}

double rel(const Matrix& a, const Matrix& b) {
    const double s = std::max(a.norm(), b.norm());
    return s == 0.0 ? 0.0 : (a - b).norm() / s;
}

// Flat outputs (sample-major) of the network at flat parameters w.
Vector outputs_at(const nn::MlpArch& arch, const Vector& w, const Matrix& x) {
    return tangent::flatten_sample_major(nn::forward(nn::MlpParams::from_flat(arch, w), x));
}

std::vector<std::vector<double>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    return rows;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Outcome jacobian() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> depth(2, 6);
    std::uniform_int_distribution<int> width(4, 64);
    double worst = 0.0;
    for (int net = 0; net < 20; ++net) {
        nn::MlpArch arch;
        arch.widths.push_back(3);
        const int layers = net < 5 ? net + 2 : depth(rng);  // every depth appears at least once
        for (int l = 1; l < layers; ++l) arch.widths.push_back(width(rng));
        arch.widths.push_back(1 + net % 3);
        arch.activation = net % 2 ? nn::Activation::tanh : nn::Activation::relu;
        const auto params = nn::mlp_init(arch, 100 + static_cast<std::uint64_t>(net), nn::BiasInit::fan_in_uniform);
        const Matrix x = gaussian(4, 3, rng);
        const auto phi = tangent::tangent_features(params, x);
        const Vector w = params.flat();
        const double eps = 1e-6;
        for (int d = 0; d < 100; ++d) {
            const Vector v = unit(w.size(), rng);
            const Vector fd = (outputs_at(arch, w + eps * v, x) - outputs_at(arch, w - eps * v, x)) / (2.0 * eps);
            worst = std::max(worst, rel(phi.rows * v, fd));
        }
    }
    return {worst <= 1e-4, "max relative error " + fmt(worst) + " over 20 nets x 100 directions"};
}

Outcome duality() {
    std::mt19937_64 rng(7);
    double worst = 0.0;
    std::size_t compared = 0;
    const std::vector<std::vector<int>> shapes{{3, 20, 20, 2}, {2, 30, 1}, {4, 16, 16, 16, 3}, {5, 12, 12, 4}};
    for (std::size_t s = 0; s < shapes.size(); ++s) {
        nn::MlpArch arch{shapes[s], s % 2 ? nn::Activation::tanh : nn::Activation::relu, true};
        const auto params = nn::mlp_init(arch, 40 + s, nn::BiasInit::fan_in_uniform);
        const auto phi = tangent::tangent_features(params, gaussian(25, arch.input_dim(), rng));
        const Matrix rows = phi.rows;
        const auto kernel = spectral::sym_eigenvalues(rows * rows.transpose());
        const auto metric = spectral::sym_eigenvalues(rows.transpose() * rows);
        for (std::size_t j = 0; j < kernel.size(); ++j) {
            if (kernel[j] <= 1e-9 * kernel.max()) break;
            worst = std::max(worst, std::abs(kernel[j] - metric[j]) / kernel[j]);
            ++compared;
        }
    }
    return {worst <= 1e-7, "max relative gap " + fmt(worst) + " over " + std::to_string(compared) +
                               " nonzero eigenvalues, P <= 2000"};
}

Outcome reconstruction() {
    std::mt19937_64 rng(11);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        nn::MlpArch arch{{3, 12 + i, 10, 1 + i % 3}, i % 2 ? nn::Activation::tanh : nn::Activation::relu, true};
        const auto params = nn::mlp_init(arch, 60 + static_cast<std::uint64_t>(i), nn::BiasInit::fan_in_uniform);
        const Matrix x = gaussian(8, 3, rng);
        const Matrix g = gaussian(8, arch.output_dim(), rng);
        const double eta = 0.01 * (i + 1);
        const auto phi = tangent::tangent_features(params, x);
        const Vector delta_w = -eta * nn::parameter_gradient(params, x, g);
        const Vector direct = phi.rows * delta_w;
        const auto sb = tangent::spectral_bias_decomposition(phi, tangent::flatten_sample_major(g), eta);
        worst = std::max(worst, rel(sb.reconstruct(), direct));
    }
    return {worst <= 1e-8, "max relative error " + fmt(worst) + " over 10 instances"};
}

Outcome mode_dynamics() {
    std::mt19937_64 rng(13);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        const Eigen::Index n = 6 + i;
        const auto f = linear::LinearFeatures::from_matrix(gaussian(n, 2 * n + 3, rng));
        const Vector y = gaussian(n, 1, rng).col(0);
        const Vector w0 = f.phi.transpose() * gaussian(n, 1, rng).col(0);
        const double eta = 0.9 / f.eigenvalues()(0);
        const auto gd = linear::gd_train_linear(f, y, linear::LinearLoss::mse, eta, 100, w0);
        for (std::int64_t t = 0; t <= 100; ++t) {
            const Vector closed = linear::mode_dynamics(f, y, w0, eta, t).outputs(f);
            worst = std::max(worst, rel(f.phi * gd.weights[static_cast<std::size_t>(t)], closed));
        }
    }
    return {worst <= 1e-8, "max relative error " + fmt(worst) + " for t <= 100 on 10 instances"};
}

Outcome rademacher() {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> radius(0.1, 5.0);
    std::uniform_int_distribution<int> size(3, 30);
    double min_gap = std::numeric_limits<double>::infinity();
    int held = 0;
    for (int i = 0; i < 50; ++i) {
        const int n = size(rng);
        const Matrix a = gaussian(n, 1 + i % n, rng);
        const Matrix k = a * a.transpose();
        const double m = radius(rng);
        const double bound = linear::rademacher_bound({m, k, static_cast<std::size_t>(n), std::nullopt, std::nullopt});
        const double mc = linear::rademacher_monte_carlo(m, k, static_cast<std::size_t>(n), 100000,
                                                         1000 + static_cast<std::uint64_t>(i));
        const double gap = (bound - mc) / bound;
        min_gap = std::min(min_gap, gap);
        if (bound > mc && gap > 0.0) ++held;
    }
    return {held == 50, std::to_string(held) + "/50 bounds strictly above the estimate, smallest relative gap " +
                            fmt(min_gap)};
}

Outcome supernat_optimality() {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> log_nu(-4.0, 4.0);
    int ok_sn = 0;
    int ok_norm = 0;
    double margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 10; ++i) {
        const Eigen::Index n = 5 + i % 4;
        const auto f = linear::LinearFeatures::from_matrix(gaussian(n, n + 4, rng));
        const Vector g = gaussian(n, 1, rng).col(0);
        const Vector y = gaussian(n, 1, rng).col(0);
        const double best_sn = linear::supernat_objective(f, g, linear::optimal_nu_supernat(f, g).nu);
        const double best_norm = linear::norm_objective(f, y, linear::optimal_norm_nu(f, y).nu);
        double rand_sn = std::numeric_limits<double>::infinity();
        double rand_norm = std::numeric_limits<double>::infinity();
        for (int d = 0; d < 10000; ++d) {
            Vector nu(static_cast<Eigen::Index>(f.rank()));
            for (Eigen::Index j = 0; j < nu.size(); ++j) nu(j) = std::exp(log_nu(rng));
            rand_sn = std::min(rand_sn, linear::supernat_objective(f, g, nu));
            rand_norm = std::min(rand_norm, linear::norm_objective(f, y, nu));
        }
        ok_sn += best_sn <= rand_sn;
        ok_norm += best_norm <= rand_norm;
        margin = std::min({margin, rand_sn / best_sn, rand_norm / best_norm});
    }
    return {ok_sn == 10 && ok_norm == 10, "SuperNat optimum best on " + std::to_string(ok_sn) +
                                              "/10, norm optimum best on " + std::to_string(ok_norm) +
                                              "/10 against 10^4 random draws; closest random/optimal " + fmt(margin, 6)};
}

Outcome noisy_regression(const fs::path& work) {
    auto c = h::defaults_for(h::ExperimentKind::noisy_regression_supernat);
    c.replicas = 10;
    c.output = work / "noisy";
    fs::remove_all(c.output);
    const auto result = h::run(c);
    int wins = 0;
    for (const auto& dir : result.directories) {
        const auto rows = read_csv(dir / "validation.csv");
        wins += rows.back()[2] < rows.back()[1];
    }
    return {wins >= 9, "SuperNat final validation MSE below GD in " + std::to_string(wins) + "/10 seeds"};
}

Outcome disk_alignment(const fs::path& work) {
    auto c = h::defaults_for(h::ExperimentKind::disk_alignment);
    c.replicas = 5;
    c.checkpoints = "0," + std::to_string(c.steps);
    c.output = work / "disk";
    fs::remove_all(c.output);
    const auto result = h::run(c);
    int passing = 0;
    int erank_drops = 0;
    std::string factors;
    for (const auto& dir : result.directories) {
        const auto grid = read_csv(dir / "grid.csv");
        const double factor = grid.front()[3] / grid.back()[3];
        const bool cka_up = grid.back()[5] > grid.front()[5];
        passing += factor >= 3.0 && cka_up;
        factors += (factors.empty() ? "" : " ") + fmt(factor) + (cka_up ? "" : "(cka down)");
        const auto ck = read_csv(dir / "checkpoints.csv");
        erank_drops += ck.front()[3] > ck.back()[3];
    }
    return {passing >= 4, std::to_string(passing) + "/5 seeds with lambda_20/lambda_1 drop >= 3 and CKA up (drops " +
                              factors + "); train erank fell in " + std::to_string(erank_drops) + "/5"};
}

Outcome fourier(const fs::path& work) {
    auto c = h::defaults_for(h::ExperimentKind::fourier_1d);
    c.replicas = 5;
    c.output = work / "fourier";
    fs::remove_all(c.output);
    const auto result = h::run(c);
    int small_ratio = 0;
    int ordered = 0;
    std::string ratios;
    for (const auto& dir : result.directories) {
        const auto spectrum = read_csv(dir / "spectrum_0.csv");
        const double ratio = spectrum[9][1] / spectrum[0][1];
        small_ratio += ratio < 0.02;
        ratios += (ratios.empty() ? "" : " ") + fmt(ratio, 2);
        const auto dft = read_csv(dir / "fourier.csv");
        ordered += dft.size() > 20 && dft[0][2] <= dft[5][2] && dft[5][2] <= dft[20][2];
    }
    return {small_ratio >= 4 && ordered == 5, "lambda_10/lambda_1 < 0.02 in " + std::to_string(small_ratio) +
                                                  "/5 seeds (" + ratios + "); dominant frequency of components 0, 5, "
                                                  "20 non-decreasing in " + std::to_string(ordered) + "/5"};
}

Outcome property_suites(const std::string& unit_tests) {
    std::mt19937_64 rng(23);
    double centering = 0.0;
    double additivity = 0.0;
    bool cka_ok = true;
    for (int i = 0; i < 5; ++i) {
        nn::MlpArch arch{{3, 10, 8, 2}, i % 2 ? nn::Activation::tanh : nn::Activation::relu, true};
        const auto params = nn::mlp_init(arch, 80 + static_cast<std::uint64_t>(i), nn::BiasInit::fan_in_uniform);
        const Matrix x = gaussian(12, 3, rng);
        const auto phi = tangent::tangent_features(params, x);
        const auto k = tangent::tangent_kernel(phi);
        const Matrix centered_rows = tangent::center_features(phi).rows;
        centering = std::max(centering, rel(centered_rows * centered_rows.transpose(),
                                            spectral::center_kernel(k).entries));
        Matrix sum = Matrix::Zero(k.dim(), k.dim());
        for (const auto& kl : tangent::layerwise_kernels(phi)) sum += kl.entries;
        additivity = std::max(additivity, (sum - k.entries).norm() / k.entries.norm());

        std::vector<int> labels(12);
        for (int j = 0; j < 12; ++j) labels[static_cast<std::size_t>(j)] = j % 2;
        const auto y = spectral::label_kernel(labels, 2);
        const double a = spectral::cka(k, y);
        spectral::KernelMatrix scaled = k;
        scaled.entries *= 37.5;
        cka_ok = cka_ok && a >= 0.0 && a <= 1.0 && std::abs(spectral::cka(scaled, y) - a) <= 1e-12;
    }

    traj::TrainingTrace first;
    traj::TrainingTrace second;
    for (int t = 0; t < 30; ++t) traj::record_step(t < 12 ? first : second, 0.1 + 0.01 * t, 2.0 - 0.03 * t);
    const double whole = traj::complexity(traj::concat(first, second));
    const double parts = traj::complexity(first) + traj::complexity(second);
    const bool complexity_ok = std::abs(whole - parts) <= 1e-12 * whole;

    const auto start = std::chrono::steady_clock::now();
    const int status = std::system((unit_tests + " > /dev/null 2>&1").c_str());
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;

    const bool pass = status == 0 && took.count() < 300.0 && centering <= 1e-8 && additivity <= 1e-10 &&
                      complexity_ok && cka_ok;
    return {pass, std::string("unit suite ") + (status == 0 ? "passed" : "FAILED") + " in " + fmt(took.count()) +
                      " s; centered identity " + fmt(centering) + ", layer additivity " + fmt(additivity) +
                      ", complexity additivity " + (complexity_ok ? "ok" : "broken") + ", CKA range and scale " +
                      (cka_ok ? "ok" : "broken")};
}

Outcome reproducibility(const fs::path& work) {
    const std::vector<h::ExperimentKind> kinds{
        h::ExperimentKind::disk_alignment,   h::ExperimentKind::fourier_1d,
        h::ExperimentKind::noisy_regression_supernat, h::ExperimentKind::rbf_anisotropy,
        h::ExperimentKind::split_alignment,  h::ExperimentKind::complexity_sweep,
        h::ExperimentKind::perturbation_response,
    };
    std::size_t files = 0;
    std::size_t identical = 0;
    for (auto kind : kinds) {
        auto c = h::defaults_for(kind);
        c.seed = 5;
        c.hidden_layers = std::min<std::size_t>(c.hidden_layers, 3);
        c.width = std::min<std::size_t>(c.width, 32);
        if (kind != h::ExperimentKind::fourier_1d) c.steps = std::min<std::int64_t>(c.steps, 100);
        c.grid = std::min<std::size_t>(c.grid, 20);
        c.rbf_points = 200;
        c.rbf_features = 200;
        c.rbf_subsamples = 20;
        std::vector<fs::path> dirs;
        for (const char* run : {"a", "b"}) {
            c.output = work / "repro" / (h::to_string(kind) + "_" + run);
            fs::remove_all(c.output);
            h::run(c);
            dirs.push_back(c.output);
        }
        for (const auto& e : fs::directory_iterator(dirs[0])) {
            if (e.path().extension() != ".csv") continue;
            ++files;
            identical += slurp(e.path()) == slurp(dirs[1] / e.path().filename());
        }
    }
    return {files > 0 && identical == files, std::to_string(identical) + "/" + std::to_string(files) +
                                                 " CSV files byte-identical across reruns of all 7 experiment kinds"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string unit_tests;
    std::string work = (fs::temp_directory_path() / "tangentkit_acceptance").string();
    std::vector<int> only;
    app.add_option("--unit-tests", unit_tests, "Path of the unit test binary")->required();
    app.add_option("--work", work, "Scratch directory for experiment outputs");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"jacobian vs central differences", jacobian},
        {"kernel and metric share the spectrum", duality},
        {"spectral bias reconstruction", reconstruction},
        {"linear regression mode dynamics", mode_dynamics},
        {"Rademacher bound above Monte Carlo", rademacher},
        {"SuperNat and norm optima beat random rescalings", supernat_optimality},
        {"noisy regression, SuperNat vs GD", [&] { return noisy_regression(work); }},
        {"disk alignment", [&] { return disk_alignment(work); }},
        {"Fourier spectral bias at initialization", [&] { return fourier(work); }},
        {"identity and property suites", [&] { return property_suites(unit_tests); }},
        {"byte-identical reruns", [&] { return reproducibility(work); }},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
                  << " [" << fmt(took.count()) << " s]" << std::endl;
    }
    return failures;
}
