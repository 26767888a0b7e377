#pragma once

#include "tangentkit/mlp.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tk::harness {

enum class ExperimentKind {
    disk_alignment,
    fourier_1d,
    noisy_regression_supernat,
    rbf_anisotropy,
    split_alignment,
    complexity_sweep,
    perturbation_response,
};

std::string to_string(ExperimentKind k);

// What a trace row records as delta w_t when momentum is on.
enum class RecordUpdate { realized, gradient };

/// One experiment run. Every field has a default (see defaults_for); a config file must
/// still name the experiment. Keys in the file use the field names below.
struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::disk_alignment;
    std::uint64_t seed = 0;
    std::size_t replicas = 1;  // seeds seed .. seed + replicas - 1
    std::size_t threads = 1;   // replica workers
    std::filesystem::path output = "out";

    // network
    std::size_t hidden_layers = 6;
    std::size_t width = 256;
    nn::Activation activation = nn::Activation::relu;
    bool bias = true;
    nn::BiasInit bias_init = nn::BiasInit::zero;

    // optimizer
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::size_t batch_size = 0;  // 0 = full batch
    std::int64_t steps = 2000;
    std::string loss = "auto";   // auto, mse, bce, cross_entropy
    nn::Reduction reduction = nn::Reduction::mean;
    RecordUpdate record_update = RecordUpdate::realized;

    // data
    std::size_t samples = 500;
    std::size_t test_samples = 500;
    std::size_t classes = 2;
    std::size_t input_dim = 2;
    double separation = 2.5;
    double spread = 0.6;
    double corruption = 0.0;
    std::size_t grid = 50;

    // diagnostics
    std::size_t probe_size = 100;
    std::string checkpoints = "log";  // "log" or a comma list of steps
    std::size_t top_k = 24;
    bool uncentered = false;

    // linear experiments
    std::size_t noise_features = 10;
    double noise_variance = 0.1;
    std::size_t validation_samples = 500;
    std::size_t rbf_points = 1000;
    std::size_t rbf_features = 1000;
    double rbf_half_width = 2.0;
    double rbf_gamma = 1.0;
    std::size_t rbf_label_index = 1;
    std::size_t rbf_subsamples = 100;
    std::vector<double> rbf_scales{0.0, 0.25, 0.5, 0.75, 1.0};

    // sweeps and probes
    std::vector<double> corruption_levels{0.0, 0.25, 0.5, 0.75, 1.0};
    double perturbation_magnitude = 1e-3;
    std::size_t perturbation_directions = 20;

    // Resolved step list for the checkpoint schedule.
    std::vector<std::int64_t> checkpoint_steps() const;
    // Flat key -> value echo, in canonical formatting.
    std::map<std::string, std::string> echo() const;
};

struct ConfigIssue {
    enum class Kind { parse, unknown_key, missing, range, duplicate };
    Kind kind = Kind::parse;
    std::string key;
    std::string message;
    std::size_t line = 0;
};

struct ConfigReport {
    ExperimentConfig config;
    std::vector<ConfigIssue> issues;

    bool valid() const { return issues.empty(); }
    std::string describe() const;
};

/// Defaults of one experiment kind; a config file overrides them key by key.
ExperimentConfig defaults_for(ExperimentKind kind);

/// Known configuration keys in declaration order.
const std::vector<std::string>& config_keys();

/// Closest known key by edit distance, empty when nothing is within reach.
std::string nearest_key(const std::string& key);

/// Parses `key = value` lines; `#` starts a comment. Collects every issue instead of
/// stopping at the first one.
ConfigReport parse_config(const std::string& text);

/// Reads and parses a file. Throws ConfigError when the file cannot be read.
ConfigReport validate_config(const std::filesystem::path& path);

/// Range and consistency checks on an already-typed config.
std::vector<ConfigIssue> check_ranges(const ExperimentConfig& config);

struct RunResult {
    std::vector<std::filesystem::path> directories;  // one per replica
};

/// Runs every replica. Throws ConfigError for an invalid config before touching the
/// filesystem; DivergenceError and other library errors propagate after the failing
/// replica has left its partial-run marker.
RunResult run(const ExperimentConfig& config);

/// Marker left in a run directory until the run completes.
inline constexpr const char* kPartialMarker = "RUN_INCOMPLETE";

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitDivergence = 3;

}  // namespace tk::harness
