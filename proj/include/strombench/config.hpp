#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace strombench {

enum class WorkloadPattern { kConstant, kRandom, kBurst };

const char* to_string(WorkloadPattern p);

/// Length of the emission phase within one random/burst cycle. Random mode
/// redraws its frequency after each active phase of this length; burst mode
/// emits its per-interval quota within it.
inline constexpr std::int64_t kActivePhaseMs = 100;

struct RandomParams {
    std::int64_t min_pause_ms = 0;
    std::int64_t max_pause_ms = 0;
    std::int64_t min_freq_eps = 0;
    std::int64_t max_freq_eps = 0;
};

struct BurstParams {
    std::int64_t interval_ms = 0;
    std::int64_t burst_freq_eps = 0;
};

/// Fully resolved workload description for one run.
struct WorkloadSpec {
    WorkloadPattern pattern = WorkloadPattern::kConstant;
    std::int64_t total_rate_eps = 0;
    std::int64_t per_instance_cap_eps = 500'000;
    std::int64_t num_sensors = 8;
    RandomParams random;
    BurstParams burst;
};

/// Config-level workload entry: the rate may be a sweep list.
struct WorkloadSweep {
    WorkloadSpec base;
    std::vector<std::int64_t> rates;
};

enum class PipelineKind { kPassThrough, kCpuIntensive, kMemoryIntensive };
enum class TimeMode { kProcessing, kEvent };

const char* to_string(PipelineKind k);
const char* to_string(TimeMode m);

struct PipelineDefinition {
    PipelineKind kind = PipelineKind::kPassThrough;
    int parallelism = 1;
    double threshold_f = 122.0;
    std::int64_t window_len_ms = 5000;
    std::int64_t window_slide_ms = 1000;
    bool parse_in_passthrough = false;
    TimeMode time_mode = TimeMode::kProcessing;
};

struct BrokerLayout {
    int partitions = 4;
    std::int64_t partition_capacity = 1'048'576;
};

/// Allocation budget / cluster caps. Zero means "not specified".
struct ResourceLimits {
    int cpus = 0;
    int mem_gb = 0;
    int nodes = 1;
};

/// The master configuration: one YAML document controlling every component.
struct ExperimentConfig {
    std::string experiment_name;
    std::vector<WorkloadSweep> workloads;
    int event_size_bytes = 64;
    BrokerLayout broker;
    PipelineDefinition pipeline; // parallelism here is a default; sweep below
    std::vector<int> parallelism_values{1};
    int duration_s = 0;
    int repetitions = 1;
    ResourceLimits resources;
    std::string output_dir = "results";
};

/// One cell of the expanded run matrix.
struct ResolvedRunConfig {
    std::string experiment_name;
    std::string run_id;
    int rep_index = 0;
    WorkloadSpec workload;
    int event_size_bytes = 64;
    BrokerLayout broker;
    PipelineDefinition pipeline;
    int duration_s = 0;
    ResourceLimits resources;
    std::string output_dir = "results";
};

struct ValidationError {
    std::string path;    // offending key, e.g. "pipeline.window_slide_ms"
    std::string message;
};

struct ValidationResult {
    std::vector<ValidationError> errors;
    std::vector<std::string> warnings;

    bool ok() const { return errors.empty(); }
    std::string to_string() const;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class MatrixTooLargeError : public std::runtime_error {
public:
    MatrixTooLargeError(std::size_t size, std::size_t cap);
};

/// Parses the YAML document. Structural problems (unknown keys, wrong types,
/// missing required keys) are collected into `result`; the returned config has
/// defaults filled for everything that parsed.
ExperimentConfig parse_config(const std::string& yaml_text, ValidationResult& result);

/// Checks every invariant of the data model, appending to `result`. All
/// violations are collected, never fail-fast.
void validate_config(const ExperimentConfig& cfg, ValidationResult& result);

/// parse_config + validate_config on a file.
ExperimentConfig load_config_file(const std::string& path, ValidationResult& result);

/// Cartesian product over all list-valued parameters x repetitions, in
/// deterministic order (workload, rate, parallelism, repetition). Throws
/// MatrixTooLargeError above `max_runs`.
std::vector<ResolvedRunConfig> expand_experiment_matrix(const ExperimentConfig& cfg,
                                                        std::size_t max_runs = 10'000);

/// Deterministic YAML rendering of a resolved run; the run manifest hashes
/// this exact text.
std::string resolved_config_yaml(const ResolvedRunConfig& run);

/// Loads a resolved single-run document written by resolved_config_yaml.
ResolvedRunConfig parse_resolved_config(const std::string& yaml_text);

/// True when the document carries a `run_id` key (i.e. it is a resolved run,
/// not an experiment config).
bool is_resolved_config(const std::string& yaml_text);

/// FNV-1a 64 over a byte string, rendered as 16 hex digits.
std::string content_hash(std::string_view bytes);

/// FNV-1a 64 (raw), also used for key -> partition routing and seed derivation.
std::uint64_t fnv1a64(std::string_view bytes);

} // namespace strombench
