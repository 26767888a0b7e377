#include "tangentkit/harness.hpp"

#include "tangentkit/errors.hpp"
#include "tangentkit/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace tk::harness {

namespace {

// Thrown by the field setters; carries the reason without the key.
struct BadValue {
    std::string reason;
};

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::uint64_t to_uint(const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw BadValue{"expected a non-negative integer, got '" + v + "'"};
    return out;
}

std::int64_t to_int(const std::string& v) {
    std::int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw BadValue{"expected an integer, got '" + v + "'"};
    return out;
}

double to_double(const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw BadValue{"expected a number, got '" + v + "'"};
    if (!std::isfinite(out)) throw BadValue{"value must be finite"};
    return out;
}

bool to_bool(const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw BadValue{"expected true or false, got '" + v + "'"};
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

std::vector<double> to_double_list(const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(to_double(item));
    if (out.empty()) throw BadValue{"expected a comma-separated list of numbers"};
    return out;
}

std::string fmt(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string fmt_list(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + fmt(xs[i]);
    return out;
}

const std::vector<std::pair<std::string, ExperimentKind>>& kind_names() {
    static const std::vector<std::pair<std::string, ExperimentKind>> names{
        {"disk_alignment", ExperimentKind::disk_alignment},
        {"fourier_1d", ExperimentKind::fourier_1d},
        {"noisy_regression_supernat", ExperimentKind::noisy_regression_supernat},
        {"rbf_anisotropy", ExperimentKind::rbf_anisotropy},
        {"split_alignment", ExperimentKind::split_alignment},
        {"complexity_sweep", ExperimentKind::complexity_sweep},
        {"perturbation_response", ExperimentKind::perturbation_response},
    };
    return names;
}

struct Field {
    std::string name;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Field uint_field(const std::string& name, T ExperimentConfig::*member) {
    return {name, [member](ExperimentConfig& c, const std::string& v) { c.*member = static_cast<T>(to_uint(v)); },
            [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(const std::string& name, double ExperimentConfig::*member) {
    return {name, [member](ExperimentConfig& c, const std::string& v) { c.*member = to_double(v); },
            [member](const ExperimentConfig& c) { return fmt(c.*member); }};
}

Field list_field(const std::string& name, std::vector<double> ExperimentConfig::*member) {
    return {name, [member](ExperimentConfig& c, const std::string& v) { c.*member = to_double_list(v); },
            [member](const ExperimentConfig& c) { return fmt_list(c.*member); }};
}

const std::vector<Field>& fields() {
    using C = ExperimentConfig;
    static const std::vector<Field> all{
        {"experiment",
         [](C& c, const std::string& v) {
             for (const auto& [name, kind] : kind_names()) {
                 if (name == v) {
                     c.experiment = kind;
                     return;
                 }
             }
             throw BadValue{"unknown experiment '" + v + "'"};
         },
         [](const C& c) { return to_string(c.experiment); }},
        uint_field("seed", &C::seed),
        uint_field("replicas", &C::replicas),
        uint_field("threads", &C::threads),
        {"output", [](C& c, const std::string& v) { c.output = v; }, [](const C& c) { return c.output.string(); }},
        uint_field("hidden_layers", &C::hidden_layers),
        uint_field("width", &C::width),
        {"activation",
         [](C& c, const std::string& v) {
             if (v != "relu" && v != "tanh") throw BadValue{"expected relu or tanh, got '" + v + "'"};
             c.activation = nn::parse_activation(v);
         },
         [](const C& c) { return nn::to_string(c.activation); }},
        {"bias", [](C& c, const std::string& v) { c.bias = to_bool(v); },
         [](const C& c) { return std::string(c.bias ? "true" : "false"); }},
        {"bias_init",
         [](C& c, const std::string& v) {
             if (v == "zero") c.bias_init = nn::BiasInit::zero;
             else if (v == "uniform") c.bias_init = nn::BiasInit::fan_in_uniform;
             else throw BadValue{"expected zero or uniform, got '" + v + "'"};
         },
         [](const C& c) { return std::string(c.bias_init == nn::BiasInit::zero ? "zero" : "uniform"); }},
        double_field("learning_rate", &C::learning_rate),
        double_field("momentum", &C::momentum),
        uint_field("batch_size", &C::batch_size),
        {"steps", [](C& c, const std::string& v) { c.steps = to_int(v); },
         [](const C& c) { return std::to_string(c.steps); }},
        {"loss",
         [](C& c, const std::string& v) {
             if (v != "auto" && v != "mse" && v != "bce" && v != "cross_entropy") {
                 throw BadValue{"expected auto, mse, bce or cross_entropy, got '" + v + "'"};
             }
             c.loss = v;
         },
         [](const C& c) { return c.loss; }},
        {"reduction",
         [](C& c, const std::string& v) {
             if (v == "mean") c.reduction = nn::Reduction::mean;
             else if (v == "sum") c.reduction = nn::Reduction::sum;
             else throw BadValue{"expected mean or sum, got '" + v + "'"};
         },
         [](const C& c) { return std::string(c.reduction == nn::Reduction::mean ? "mean" : "sum"); }},
        {"record_update",
         [](C& c, const std::string& v) {
             if (v == "realized") c.record_update = RecordUpdate::realized;
             else if (v == "gradient") c.record_update = RecordUpdate::gradient;
             else throw BadValue{"expected realized or gradient, got '" + v + "'"};
         },
         [](const C& c) { return std::string(c.record_update == RecordUpdate::realized ? "realized" : "gradient"); }},
        uint_field("samples", &C::samples),
        uint_field("test_samples", &C::test_samples),
        uint_field("classes", &C::classes),
        uint_field("input_dim", &C::input_dim),
        double_field("separation", &C::separation),
        double_field("spread", &C::spread),
        double_field("corruption", &C::corruption),
        uint_field("grid", &C::grid),
        uint_field("probe_size", &C::probe_size),
        {"checkpoints",
         [](C& c, const std::string& v) {
             if (v != "log") {
                 for (const auto& item : split_list(v)) to_int(item);
             }
             c.checkpoints = v;
         },
         [](const C& c) { return c.checkpoints; }},
        uint_field("top_k", &C::top_k),
        {"uncentered", [](C& c, const std::string& v) { c.uncentered = to_bool(v); },
         [](const C& c) { return std::string(c.uncentered ? "true" : "false"); }},
        uint_field("noise_features", &C::noise_features),
        double_field("noise_variance", &C::noise_variance),
        uint_field("validation_samples", &C::validation_samples),
        uint_field("rbf_points", &C::rbf_points),
        uint_field("rbf_features", &C::rbf_features),
        double_field("rbf_half_width", &C::rbf_half_width),
        double_field("rbf_gamma", &C::rbf_gamma),
        uint_field("rbf_label_index", &C::rbf_label_index),
        uint_field("rbf_subsamples", &C::rbf_subsamples),
        list_field("rbf_scales", &C::rbf_scales),
        list_field("corruption_levels", &C::corruption_levels),
        double_field("perturbation_magnitude", &C::perturbation_magnitude),
        uint_field("perturbation_directions", &C::perturbation_directions),
    };
    return all;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

void range(std::vector<ConfigIssue>& out, bool ok, const std::string& key, const std::string& what) {
    if (!ok) out.push_back({ConfigIssue::Kind::range, key, key + " " + what, 0});
}

bool unit_interval(const std::vector<double>& xs) {
    return !xs.empty() && std::all_of(xs.begin(), xs.end(), [](double x) { return x >= 0.0 && x <= 1.0; });
}

}  // namespace

std::string to_string(ExperimentKind k) {
    for (const auto& [name, kind] : kind_names()) {
        if (kind == k) return name;
    }
    return "unknown";
}

ExperimentConfig defaults_for(ExperimentKind kind) {
    ExperimentConfig c;
    c.experiment = kind;
    switch (kind) {
        case ExperimentKind::disk_alignment:
            c.learning_rate = 0.1;
            break;
        case ExperimentKind::fourier_1d:
            c.steps = 0;
            c.momentum = 0.0;
            c.bias_init = nn::BiasInit::fan_in_uniform;
            break;
        case ExperimentKind::noisy_regression_supernat:
            c.samples = 50;
            c.momentum = 0.0;
            c.probe_size = 50;
            break;
        case ExperimentKind::rbf_anisotropy:
            c.samples = 50;
            c.probe_size = 50;
            break;
        case ExperimentKind::split_alignment:
        case ExperimentKind::complexity_sweep:
        case ExperimentKind::perturbation_response:
            c.hidden_layers = 3;
            c.width = 64;
            c.steps = 500;
            c.learning_rate = 0.1;
            c.momentum = 0.0;
            break;
    }
    return c;
}

std::vector<std::int64_t> ExperimentConfig::checkpoint_steps() const {
    if (checkpoints == "log") return traj::log_schedule(steps);
    std::set<std::int64_t> unique;
    for (const auto& item : split_list(checkpoints)) unique.insert(to_int(item));
    return {unique.begin(), unique.end()};
}

std::map<std::string, std::string> ExperimentConfig::echo() const {
    std::map<std::string, std::string> out;
    for (const auto& f : fields()) out[f.name] = f.get(*this);
    return out;
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& f : fields()) k.push_back(f.name);
        return k;
    }();
    return keys;
}

std::string nearest_key(const std::string& key) {
    std::string best;
    std::size_t best_d = std::numeric_limits<std::size_t>::max();
    for (const auto& k : config_keys()) {
        const std::size_t d = edit_distance(key, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best_d <= std::max<std::size_t>(3, key.size() / 3) ? best : std::string();
}

std::vector<ConfigIssue> check_ranges(const ExperimentConfig& c) {
    std::vector<ConfigIssue> out;
    range(out, c.replicas >= 1, "replicas", "must be at least 1");
    range(out, c.threads >= 1, "threads", "must be at least 1");
    range(out, !c.output.empty(), "output", "must not be empty");
    range(out, c.hidden_layers >= 1, "hidden_layers", "must be at least 1");
    range(out, c.width >= 1, "width", "must be at least 1");
    range(out, c.learning_rate > 0.0, "learning_rate", "must be positive");
    range(out, c.momentum >= 0.0 && c.momentum < 1.0, "momentum", "must lie in [0, 1)");
    range(out, c.steps >= 0, "steps", "must be non-negative");
    range(out, c.samples >= 2, "samples", "must be at least 2");
    range(out, c.test_samples >= 2, "test_samples", "must be at least 2");
    range(out, c.batch_size <= c.samples, "batch_size", "must not exceed samples");
    range(out, c.classes >= 2, "classes", "must be at least 2");
    range(out, c.input_dim >= 2, "input_dim", "must be at least 2");
    range(out, c.separation > 0.0, "separation", "must be positive");
    range(out, c.spread > 0.0, "spread", "must be positive");
    range(out, c.corruption >= 0.0 && c.corruption <= 1.0, "corruption", "must lie in [0, 1]");
    range(out, c.grid >= 2, "grid", "must be at least 2");
    range(out, c.probe_size >= 2 && c.probe_size <= std::min(c.samples, c.test_samples), "probe_size",
          "must lie in [2, min(samples, test_samples)]");
    range(out, c.top_k >= 1, "top_k", "must be at least 1");
    range(out, c.noise_features >= 1, "noise_features", "must be at least 1");
    range(out, c.noise_variance >= 0.0, "noise_variance", "must be non-negative");
    range(out, c.validation_samples >= 1, "validation_samples", "must be at least 1");
    range(out, c.rbf_points >= 2, "rbf_points", "must be at least 2");
    range(out, c.rbf_features >= 1, "rbf_features", "must be at least 1");
    range(out, c.rbf_half_width > 0.0, "rbf_half_width", "must be positive");
    range(out, c.rbf_gamma > 0.0, "rbf_gamma", "must be positive");
    range(out, c.rbf_label_index < std::min(c.rbf_points, c.rbf_features), "rbf_label_index",
          "must be below min(rbf_points, rbf_features)");
    range(out, c.rbf_subsamples >= 1, "rbf_subsamples", "must be at least 1");
    range(out, unit_interval(c.rbf_scales), "rbf_scales", "entries must lie in [0, 1]");
    range(out, unit_interval(c.corruption_levels), "corruption_levels", "entries must lie in [0, 1]");
    range(out, c.perturbation_magnitude > 0.0, "perturbation_magnitude", "must be positive");
    range(out, c.perturbation_directions >= 1, "perturbation_directions", "must be at least 1");

    if (c.checkpoints != "log" && c.steps >= 0) {
        for (std::int64_t s : c.checkpoint_steps()) {
            if (s < 0 || s > c.steps) {
                range(out, false, "checkpoints", "entries must lie in [0, steps]");
                break;
            }
        }
    }
    if (c.experiment == ExperimentKind::fourier_1d) {
        range(out, c.steps == 0, "steps", "must be 0 for fourier_1d, which analyses the network at initialization");
    }
    if (c.experiment == ExperimentKind::disk_alignment) {
        range(out, c.grid * c.grid >= 20, "grid", "needs at least 20 grid points (grid >= 5) for lambda_20");
    }
    // Output width follows the data: the disk and binary clusters use one signed score.
    const bool binary = c.experiment == ExperimentKind::disk_alignment || c.classes == 2;
    if (c.loss == "bce") range(out, binary, "loss", "bce needs a binary task (classes = 2)");
    if (c.loss == "cross_entropy") range(out, !binary, "loss", "cross_entropy needs classes > 2");
    return out;
}

ConfigReport parse_config(const std::string& text) {
    ConfigReport report;
    // Defaults depend on the experiment, so its line is applied before any other key.
    {
        std::istringstream scan(text);
        std::string raw;
        while (std::getline(scan, raw)) {
            const auto hash = raw.find('#');
            const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
            const auto eq = line.find('=');
            if (eq == std::string::npos || trim(line.substr(0, eq)) != "experiment") continue;
            ExperimentConfig probe;
            try {
                fields().front().set(probe, trim(line.substr(eq + 1)));
                report.config = defaults_for(probe.experiment);
            } catch (const BadValue&) {
            }
            break;
        }
    }
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    bool field_errors = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            report.issues.push_back({ConfigIssue::Kind::parse, "", "expected 'key = value', got '" + line + "'", line_no});
            field_errors = true;
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto& fs = fields();
        const auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.name == key; });
        if (it == fs.end()) {
            std::string msg = "unknown key '" + key + "'";
            const std::string hint = nearest_key(key);
            if (!hint.empty()) msg += " (did you mean '" + hint + "'?)";
            report.issues.push_back({ConfigIssue::Kind::unknown_key, key, msg, line_no});
            continue;
        }
        if (!seen.insert(key).second) {
            report.issues.push_back({ConfigIssue::Kind::duplicate, key, "key '" + key + "' given twice", line_no});
            continue;
        }
        if (value.empty()) {
            report.issues.push_back({ConfigIssue::Kind::parse, key, key + ": missing value", line_no});
            field_errors = true;
            continue;
        }
        try {
            it->set(report.config, value);
        } catch (const BadValue& e) {
            report.issues.push_back({ConfigIssue::Kind::parse, key, key + ": " + e.reason, line_no});
            field_errors = true;
        }
    }
    if (!seen.count("experiment")) {
        report.issues.push_back({ConfigIssue::Kind::missing, "experiment", "required key 'experiment' is missing", 0});
    }
    if (!field_errors) {
        for (auto& issue : check_ranges(report.config)) report.issues.push_back(std::move(issue));
    }
    return report;
}

ConfigReport validate_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string ConfigReport::describe() const {
    std::string out;
    for (const auto& issue : issues) {
        if (issue.line > 0) out += "line " + std::to_string(issue.line) + ": ";
        out += issue.message + "\n";
    }
    return out;
}

}  // namespace tk::harness
