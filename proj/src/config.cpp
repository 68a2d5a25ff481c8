#include "strombench/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace strombench {

const char* to_string(WorkloadPattern p) {
    switch (p) {
        case WorkloadPattern::kConstant: return "constant";
        case WorkloadPattern::kRandom: return "random";
        case WorkloadPattern::kBurst: return "burst";
    }
    return "?";
}

const char* to_string(PipelineKind k) {
    switch (k) {
        case PipelineKind::kPassThrough: return "pass_through";
        case PipelineKind::kCpuIntensive: return "cpu_intensive";
        case PipelineKind::kMemoryIntensive: return "memory_intensive";
    }
    return "?";
}

const char* to_string(TimeMode m) {
    return m == TimeMode::kProcessing ? "processing" : "event";
}

std::string ValidationResult::to_string() const {
    std::ostringstream out;
    for (const auto& e : errors) {
        out << "error: " << e.path << ": " << e.message << "\n";
    }
    for (const auto& w : warnings) {
        out << "warning: " << w << "\n";
    }
    return out.str();
}

MatrixTooLargeError::MatrixTooLargeError(std::size_t size, std::size_t cap)
    : std::runtime_error("run matrix has " + std::to_string(size) +
                         " entries, above the cap of " + std::to_string(cap)) {}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string content_hash(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

namespace {

struct Collector {
    ValidationResult& res;

    void err(const std::string& path, const std::string& msg) {
        res.errors.push_back({path, msg});
    }
};

void check_keys(Collector& c, const YAML::Node& node, const std::string& prefix,
                const std::set<std::string>& allowed) {
    if (!node.IsMap()) return;
    for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed.count(key)) {
            c.err(prefix.empty() ? key : prefix + "." + key, "unknown key");
        }
    }
}

bool get_i64(Collector& c, const YAML::Node& node, const char* key,
             const std::string& prefix, std::int64_t& out) {
    const YAML::Node v = node[key];
    if (!v) return false;
    const std::string path = prefix.empty() ? key : prefix + "." + std::string(key);
    try {
        out = v.as<std::int64_t>();
        return true;
    } catch (const YAML::Exception&) {
        c.err(path, "expected an integer");
        return false;
    }
}

bool get_int(Collector& c, const YAML::Node& node, const char* key,
             const std::string& prefix, int& out) {
    std::int64_t v = 0;
    if (!get_i64(c, node, key, prefix, v)) return false;
    out = static_cast<int>(v);
    return true;
}

bool get_double(Collector& c, const YAML::Node& node, const char* key,
                const std::string& prefix, double& out) {
    const YAML::Node v = node[key];
    if (!v) return false;
    const std::string path = prefix.empty() ? key : prefix + "." + std::string(key);
    try {
        out = v.as<double>();
        return true;
    } catch (const YAML::Exception&) {
        c.err(path, "expected a number");
        return false;
    }
}

bool get_bool(Collector& c, const YAML::Node& node, const char* key,
              const std::string& prefix, bool& out) {
    const YAML::Node v = node[key];
    if (!v) return false;
    const std::string path = prefix.empty() ? key : prefix + "." + std::string(key);
    try {
        out = v.as<bool>();
        return true;
    } catch (const YAML::Exception&) {
        c.err(path, "expected a boolean");
        return false;
    }
}

bool get_string(Collector& c, const YAML::Node& node, const char* key,
                const std::string& prefix, std::string& out) {
    const YAML::Node v = node[key];
    if (!v) return false;
    const std::string path = prefix.empty() ? key : prefix + "." + std::string(key);
    try {
        out = v.as<std::string>();
        return true;
    } catch (const YAML::Exception&) {
        c.err(path, "expected a string");
        return false;
    }
}

// Scalar-or-list fields expand into sweep values.
std::vector<std::int64_t> get_i64_list(Collector& c, const YAML::Node& v,
                                       const std::string& path) {
    std::vector<std::int64_t> out;
    try {
        if (v.IsSequence()) {
            for (const auto& item : v) out.push_back(item.as<std::int64_t>());
            if (out.empty()) c.err(path, "list must not be empty");
        } else {
            out.push_back(v.as<std::int64_t>());
        }
    } catch (const YAML::Exception&) {
        c.err(path, "expected an integer or a list of integers");
    }
    return out;
}

void parse_random(Collector& c, const YAML::Node& node, const std::string& prefix,
                  RandomParams& out) {
    check_keys(c, node, prefix,
               {"min_pause_ms", "max_pause_ms", "min_freq_eps", "max_freq_eps"});
    get_i64(c, node, "min_pause_ms", prefix, out.min_pause_ms);
    get_i64(c, node, "max_pause_ms", prefix, out.max_pause_ms);
    get_i64(c, node, "min_freq_eps", prefix, out.min_freq_eps);
    get_i64(c, node, "max_freq_eps", prefix, out.max_freq_eps);
}

void parse_burst(Collector& c, const YAML::Node& node, const std::string& prefix,
                 BurstParams& out) {
    check_keys(c, node, prefix, {"interval_ms", "burst_freq_eps"});
    get_i64(c, node, "interval_ms", prefix, out.interval_ms);
    get_i64(c, node, "burst_freq_eps", prefix, out.burst_freq_eps);
}

WorkloadSweep parse_workload_entry(Collector& c, const YAML::Node& node,
                                   const std::string& prefix) {
    WorkloadSweep sweep;
    if (!node.IsMap()) {
        c.err(prefix, "expected a mapping");
        return sweep;
    }
    check_keys(c, node, prefix,
               {"pattern", "total_rate_eps", "per_instance_cap_eps", "num_sensors",
                "random", "burst"});
    std::string pattern;
    if (get_string(c, node, "pattern", prefix, pattern)) {
        if (pattern == "constant") {
            sweep.base.pattern = WorkloadPattern::kConstant;
        } else if (pattern == "random") {
            sweep.base.pattern = WorkloadPattern::kRandom;
        } else if (pattern == "burst") {
            sweep.base.pattern = WorkloadPattern::kBurst;
        } else {
            c.err(prefix + ".pattern",
                  "must be one of constant, random, burst (got \"" + pattern + "\")");
        }
    } else {
        c.err(prefix + ".pattern", "required key is missing");
    }
    if (node["total_rate_eps"]) {
        sweep.rates = get_i64_list(c, node["total_rate_eps"], prefix + ".total_rate_eps");
    } else {
        c.err(prefix + ".total_rate_eps", "required key is missing");
    }
    get_i64(c, node, "per_instance_cap_eps", prefix, sweep.base.per_instance_cap_eps);
    get_i64(c, node, "num_sensors", prefix, sweep.base.num_sensors);
    if (node["random"]) parse_random(c, node["random"], prefix + ".random", sweep.base.random);
    if (node["burst"]) parse_burst(c, node["burst"], prefix + ".burst", sweep.base.burst);
    return sweep;
}

void parse_pipeline(Collector& c, const YAML::Node& node, ExperimentConfig& cfg) {
    const std::string prefix = "pipeline";
    check_keys(c, node, prefix,
               {"kind", "parallelism", "threshold_f", "window_len_ms",
                "window_slide_ms", "parse_in_passthrough", "time_mode"});
    std::string kind;
    if (get_string(c, node, "kind", prefix, kind)) {
        if (kind == "pass_through") {
            cfg.pipeline.kind = PipelineKind::kPassThrough;
        } else if (kind == "cpu_intensive") {
            cfg.pipeline.kind = PipelineKind::kCpuIntensive;
        } else if (kind == "memory_intensive") {
            cfg.pipeline.kind = PipelineKind::kMemoryIntensive;
        } else {
            c.err(prefix + ".kind",
                  "must be one of pass_through, cpu_intensive, memory_intensive (got \"" +
                      kind + "\")");
        }
    }
    if (node["parallelism"]) {
        auto values = get_i64_list(c, node["parallelism"], prefix + ".parallelism");
        if (!values.empty()) {
            cfg.parallelism_values.assign(values.begin(), values.end());
        }
    }
    get_double(c, node, "threshold_f", prefix, cfg.pipeline.threshold_f);
    get_i64(c, node, "window_len_ms", prefix, cfg.pipeline.window_len_ms);
    get_i64(c, node, "window_slide_ms", prefix, cfg.pipeline.window_slide_ms);
    get_bool(c, node, "parse_in_passthrough", prefix, cfg.pipeline.parse_in_passthrough);
    std::string mode;
    if (get_string(c, node, "time_mode", prefix, mode)) {
        if (mode == "processing") {
            cfg.pipeline.time_mode = TimeMode::kProcessing;
        } else if (mode == "event") {
            cfg.pipeline.time_mode = TimeMode::kEvent;
        } else {
            c.err(prefix + ".time_mode", "must be processing or event");
        }
    }
}

ExperimentConfig parse_config_impl(const std::string& yaml_text, ValidationResult& result,
                                   bool resolved, std::string* run_id_out,
                                   int* rep_index_out) {
    ExperimentConfig cfg;
    Collector c{result};

    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        c.err("<document>", std::string("YAML parse failure: ") + e.what());
        return cfg;
    }
    if (!root.IsMap()) {
        c.err("<document>", "top level must be a mapping");
        return cfg;
    }

    std::set<std::string> root_keys = {"experiment_name", "workload", "event_size_bytes",
                                       "broker",          "pipeline", "duration_s",
                                       "repetitions",     "resources", "output_dir"};
    if (resolved) {
        root_keys.insert("run_id");
        root_keys.insert("rep_index");
    }
    check_keys(c, root, "", root_keys);

    if (!get_string(c, root, "experiment_name", "", cfg.experiment_name)) {
        c.err("experiment_name", "required key is missing");
    }

    if (const YAML::Node wl = root["workload"]) {
        if (wl.IsSequence()) {
            int i = 0;
            for (const auto& entry : wl) {
                cfg.workloads.push_back(
                    parse_workload_entry(c, entry, "workload[" + std::to_string(i) + "]"));
                ++i;
            }
            if (cfg.workloads.empty()) c.err("workload", "list must not be empty");
        } else {
            cfg.workloads.push_back(parse_workload_entry(c, wl, "workload"));
        }
    } else {
        c.err("workload", "required key is missing");
    }

    get_int(c, root, "event_size_bytes", "", cfg.event_size_bytes);

    if (const YAML::Node b = root["broker"]) {
        check_keys(c, b, "broker", {"partitions", "partition_capacity"});
        get_int(c, b, "partitions", "broker", cfg.broker.partitions);
        get_i64(c, b, "partition_capacity", "broker", cfg.broker.partition_capacity);
    }

    if (const YAML::Node p = root["pipeline"]) {
        if (p.IsMap()) {
            parse_pipeline(c, p, cfg);
        } else {
            c.err("pipeline", "expected a mapping");
        }
    }

    if (!get_int(c, root, "duration_s", "", cfg.duration_s)) {
        c.err("duration_s", "required key is missing");
    }
    get_int(c, root, "repetitions", "", cfg.repetitions);

    if (const YAML::Node r = root["resources"]) {
        check_keys(c, r, "resources", {"cpus", "mem_gb", "nodes"});
        get_int(c, r, "cpus", "resources", cfg.resources.cpus);
        get_int(c, r, "mem_gb", "resources", cfg.resources.mem_gb);
        get_int(c, r, "nodes", "resources", cfg.resources.nodes);
    }

    get_string(c, root, "output_dir", "", cfg.output_dir);

    if (resolved) {
        if (run_id_out && !get_string(c, root, "run_id", "", *run_id_out)) {
            c.err("run_id", "required key is missing");
        }
        if (rep_index_out) get_int(c, root, "rep_index", "", *rep_index_out);
    }
    return cfg;
}

void validate_workload(Collector& c, const WorkloadSweep& sweep, const std::string& prefix) {
    for (std::size_t i = 0; i < sweep.rates.size(); ++i) {
        if (sweep.rates[i] < 1) {
            c.err(prefix + ".total_rate_eps", "rate must be >= 1 event/s");
            break;
        }
    }
    if (sweep.base.per_instance_cap_eps < 1) {
        c.err(prefix + ".per_instance_cap_eps", "must be >= 1");
    }
    if (sweep.base.num_sensors < 1) {
        c.err(prefix + ".num_sensors", "must be >= 1");
    }
    const RandomParams& r = sweep.base.random;
    if (sweep.base.pattern == WorkloadPattern::kRandom) {
        if (r.max_freq_eps < 1) {
            c.err(prefix + ".random.max_freq_eps",
                  "random pattern requires frequencies >= 1");
        }
        if (r.min_freq_eps < 1) {
            c.err(prefix + ".random.min_freq_eps",
                  "random pattern requires frequencies >= 1");
        }
        if (r.min_freq_eps > r.max_freq_eps) {
            c.err(prefix + ".random.min_freq_eps", "must be <= max_freq_eps");
        }
        if (r.min_pause_ms < 0) {
            c.err(prefix + ".random.min_pause_ms", "must be >= 0");
        }
        if (r.min_pause_ms > r.max_pause_ms) {
            c.err(prefix + ".random.min_pause_ms", "must be <= max_pause_ms");
        }
    }
    const BurstParams& b = sweep.base.burst;
    if (sweep.base.pattern == WorkloadPattern::kBurst) {
        if (b.burst_freq_eps < 1) {
            c.err(prefix + ".burst.burst_freq_eps", "burst pattern requires a frequency >= 1");
        }
        if (b.interval_ms < kActivePhaseMs) {
            c.err(prefix + ".burst.interval_ms",
                  "must be >= the emission phase of " + std::to_string(kActivePhaseMs) + " ms");
        }
    }
}

} // namespace

ExperimentConfig parse_config(const std::string& yaml_text, ValidationResult& result) {
    return parse_config_impl(yaml_text, result, false, nullptr, nullptr);
}

void validate_config(const ExperimentConfig& cfg, ValidationResult& result) {
    Collector c{result};

    if (cfg.experiment_name.empty()) {
        c.err("experiment_name", "must not be empty");
    } else if (cfg.experiment_name.find('/') != std::string::npos ||
               cfg.experiment_name.find(' ') != std::string::npos) {
        c.err("experiment_name", "must not contain '/' or spaces");
    }

    if (cfg.event_size_bytes < static_cast<int>(kMinEventSize)) {
        c.err("event_size_bytes",
              "must be >= " + std::to_string(kMinEventSize) + " (minimum event size)");
    }

    for (std::size_t i = 0; i < cfg.workloads.size(); ++i) {
        const std::string prefix =
            cfg.workloads.size() == 1 ? "workload" : "workload[" + std::to_string(i) + "]";
        validate_workload(c, cfg.workloads[i], prefix);

        // A realistic timestamp takes 13 digits; events whose compact encoding
        // exceeds the configured size are emitted at their compact size instead.
        const std::int64_t max_id = std::max<std::int64_t>(cfg.workloads[i].base.num_sensors - 1, 0);
        const std::size_t worst_compact =
            6 + 13 + 6 + std::to_string(max_id).size() + 5 + 5 + 1;
        if (cfg.event_size_bytes >= static_cast<int>(kMinEventSize) &&
            static_cast<std::size_t>(cfg.event_size_bytes) < worst_compact) {
            result.warnings.push_back(
                prefix + ": event_size_bytes=" + std::to_string(cfg.event_size_bytes) +
                " is below the compact encoding of some events (up to " +
                std::to_string(worst_compact) + " bytes); those are emitted at their compact size");
        }
    }
    if (cfg.workloads.empty()) {
        c.err("workload", "at least one workload is required");
    }

    if (cfg.broker.partitions < 1) {
        c.err("broker.partitions", "must be >= 1");
    }
    if (cfg.broker.partition_capacity < 1) {
        c.err("broker.partition_capacity", "must be >= 1");
    }

    for (int par : cfg.parallelism_values) {
        if (par < 1) {
            c.err("pipeline.parallelism", "values must be >= 1");
        } else if (cfg.broker.partitions >= 1 && par > cfg.broker.partitions) {
            c.err("pipeline.parallelism",
                  "value " + std::to_string(par) + " exceeds broker.partitions (" +
                      std::to_string(cfg.broker.partitions) + "); each worker needs a partition");
        }
    }

    if (cfg.pipeline.window_len_ms < 1) {
        c.err("pipeline.window_len_ms", "must be >= 1");
    }
    if (cfg.pipeline.window_slide_ms < 1) {
        c.err("pipeline.window_slide_ms", "must be >= 1");
    } else if (cfg.pipeline.window_slide_ms > cfg.pipeline.window_len_ms) {
        c.err("pipeline.window_slide_ms",
              "must be <= window_len_ms (" + std::to_string(cfg.pipeline.window_len_ms) + ")");
    } else if (cfg.pipeline.window_len_ms % cfg.pipeline.window_slide_ms != 0) {
        c.err("pipeline.window_slide_ms", "must divide window_len_ms (aligned windows)");
    }
    if (!std::isfinite(cfg.pipeline.threshold_f)) {
        c.err("pipeline.threshold_f", "must be finite");
    }

    if (cfg.duration_s < 0) {
        c.err("duration_s", "must be >= 0");
    }
    if (cfg.repetitions < 1) {
        c.err("repetitions", "must be >= 1");
    }
    if (cfg.resources.nodes < 1) {
        c.err("resources.nodes", "must be >= 1");
    }
    if (cfg.resources.cpus < 0) {
        c.err("resources.cpus", "must be >= 0");
    }
    if (cfg.resources.mem_gb < 0) {
        c.err("resources.mem_gb", "must be >= 0");
    }
    if (cfg.output_dir.empty()) {
        c.err("output_dir", "must not be empty");
    }
}

ExperimentConfig load_config_file(const std::string& path, ValidationResult& result) {
    std::ifstream in(path);
    if (!in) {
        result.errors.push_back({"<file>", "cannot open " + path});
        return {};
    }
    std::stringstream buf;
    buf << in.rdbuf();
    ExperimentConfig cfg = parse_config(buf.str(), result);
    if (result.ok()) {
        validate_config(cfg, result);
    }
    return cfg;
}

std::vector<ResolvedRunConfig> expand_experiment_matrix(const ExperimentConfig& cfg,
                                                        std::size_t max_runs) {
    std::size_t total = 0;
    for (const auto& wl : cfg.workloads) {
        total += wl.rates.size() * cfg.parallelism_values.size() *
                 static_cast<std::size_t>(cfg.repetitions);
    }
    if (total > max_runs) {
        throw MatrixTooLargeError(total, max_runs);
    }

    std::vector<ResolvedRunConfig> runs;
    runs.reserve(total);
    for (std::size_t w = 0; w < cfg.workloads.size(); ++w) {
        const WorkloadSweep& sweep = cfg.workloads[w];
        for (std::int64_t rate : sweep.rates) {
            for (int par : cfg.parallelism_values) {
                for (int rep = 0; rep < cfg.repetitions; ++rep) {
                    ResolvedRunConfig run;
                    run.experiment_name = cfg.experiment_name;
                    run.rep_index = rep;
                    run.workload = sweep.base;
                    run.workload.total_rate_eps = rate;
                    run.event_size_bytes = cfg.event_size_bytes;
                    run.broker = cfg.broker;
                    run.pipeline = cfg.pipeline;
                    run.pipeline.parallelism = par;
                    run.duration_s = cfg.duration_s;
                    run.resources = cfg.resources;
                    run.output_dir = cfg.output_dir;

                    std::string id;
                    if (cfg.workloads.size() > 1) {
                        id += "wl-" + std::to_string(w) + "_";
                    }
                    id += "rate-" + std::to_string(rate);
                    id += "_par-" + std::to_string(par);
                    id += "_rep" + std::to_string(rep);
                    run.run_id = id;
                    runs.push_back(std::move(run));
                }
            }
        }
    }
    return runs;
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace

std::string resolved_config_yaml(const ResolvedRunConfig& run) {
    std::ostringstream y;
    y << "experiment_name: " << run.experiment_name << "\n";
    y << "run_id: " << run.run_id << "\n";
    y << "rep_index: " << run.rep_index << "\n";
    y << "event_size_bytes: " << run.event_size_bytes << "\n";
    y << "duration_s: " << run.duration_s << "\n";
    y << "output_dir: " << run.output_dir << "\n";
    y << "workload:\n";
    y << "  pattern: " << to_string(run.workload.pattern) << "\n";
    y << "  total_rate_eps: " << run.workload.total_rate_eps << "\n";
    y << "  per_instance_cap_eps: " << run.workload.per_instance_cap_eps << "\n";
    y << "  num_sensors: " << run.workload.num_sensors << "\n";
    if (run.workload.pattern == WorkloadPattern::kRandom) {
        y << "  random:\n";
        y << "    min_pause_ms: " << run.workload.random.min_pause_ms << "\n";
        y << "    max_pause_ms: " << run.workload.random.max_pause_ms << "\n";
        y << "    min_freq_eps: " << run.workload.random.min_freq_eps << "\n";
        y << "    max_freq_eps: " << run.workload.random.max_freq_eps << "\n";
    }
    if (run.workload.pattern == WorkloadPattern::kBurst) {
        y << "  burst:\n";
        y << "    interval_ms: " << run.workload.burst.interval_ms << "\n";
        y << "    burst_freq_eps: " << run.workload.burst.burst_freq_eps << "\n";
    }
    y << "broker:\n";
    y << "  partitions: " << run.broker.partitions << "\n";
    y << "  partition_capacity: " << run.broker.partition_capacity << "\n";
    y << "pipeline:\n";
    y << "  kind: " << to_string(run.pipeline.kind) << "\n";
    y << "  parallelism: " << run.pipeline.parallelism << "\n";
    y << "  threshold_f: " << fmt_double(run.pipeline.threshold_f) << "\n";
    y << "  window_len_ms: " << run.pipeline.window_len_ms << "\n";
    y << "  window_slide_ms: " << run.pipeline.window_slide_ms << "\n";
    y << "  parse_in_passthrough: " << (run.pipeline.parse_in_passthrough ? "true" : "false")
      << "\n";
    y << "  time_mode: " << to_string(run.pipeline.time_mode) << "\n";
    y << "resources:\n";
    y << "  cpus: " << run.resources.cpus << "\n";
    y << "  mem_gb: " << run.resources.mem_gb << "\n";
    y << "  nodes: " << run.resources.nodes << "\n";
    return y.str();
}

bool is_resolved_config(const std::string& yaml_text) {
    try {
        YAML::Node root = YAML::Load(yaml_text);
        return root.IsMap() && root["run_id"].IsDefined();
    } catch (const YAML::Exception&) {
        return false;
    }
}

ResolvedRunConfig parse_resolvable(const std::string& yaml_text, ValidationResult& result) {
    std::string run_id;
    int rep_index = 0;
    ExperimentConfig cfg = parse_config_impl(yaml_text, result, true, &run_id, &rep_index);
    if (!result.ok()) return {};
    validate_config(cfg, result);
    if (!result.ok()) return {};

    auto runs = expand_experiment_matrix(cfg, 1);
    ResolvedRunConfig run = runs.front();
    run.run_id = run_id;
    run.rep_index = rep_index;
    return run;
}

ResolvedRunConfig parse_resolved_config(const std::string& yaml_text) {
    ValidationResult result;
    ResolvedRunConfig run = parse_resolvable(yaml_text, result);
    if (!result.ok()) {
        throw ConfigError("resolved config is invalid:\n" + result.to_string());
    }
    return run;
}

} // namespace strombench
