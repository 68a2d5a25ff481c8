#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "strombench/config.hpp"
#include "strombench/manifest.hpp"

namespace strombench {

enum class ExecutionMode { kLocal, kSlurmInteractive, kSlurmBatch };

const char* to_string(ExecutionMode mode);

struct DetectedResources {
    int cpus = 0;
    int mem_gb = 0;
    int nodes = 1;
};

struct ExecutionEnvironment {
    ExecutionMode mode = ExecutionMode::kLocal;
    DetectedResources resources;
};

using EnvReader = std::function<const char*(const char*)>;

/// SLURM job id present + terminal attached -> interactive; present without a
/// terminal -> batch; local otherwise. Resources come from the SLURM
/// environment when present, the machine otherwise.
ExecutionEnvironment detect_environment(const EnvReader& getenv_fn, bool stdin_is_tty);
ExecutionEnvironment detect_environment();

struct ResourceRequest {
    int nodes = 1;
    int cpus_per_task = 0;
    int mem_gb = 0;
    std::int64_t walltime_s = 0;

    std::string walltime_hms() const; // HH:MM:SS
};

class ResourceOverCapError : public std::runtime_error {
public:
    ResourceOverCapError(const std::string& what) : std::runtime_error(what) {}
};

/// cpus = generator instances + parallelism + 2 (broker + control);
/// mem = 2 GB per generator + 5 GB broker + 2 GB per engine worker;
/// walltime = duration x 1.5 + 10 min. Configured resources act as the
/// allocation budget: needs above them raise ResourceOverCapError, and the
/// budget (when given) is what gets requested.
ResourceRequest compute_resources(const ResolvedRunConfig& run);

/// Deterministic sbatch script: byte-stable for a fixed (config, resources).
/// `depends_on_previous` adds the afterok chain with a placeholder the
/// submitter substitutes with the real job id.
std::string emit_sbatch(const ResolvedRunConfig& run, const ResourceRequest& request,
                        bool depends_on_previous);

inline constexpr const char* kJobIdPlaceholder = "<jobid-placeholder>";

/// In interactive mode, itemizes any shortfall of the detected allocation
/// against the computed request. Empty result means the run may start.
std::vector<std::string> interactive_guard(const ResolvedRunConfig& run,
                                           const ExecutionEnvironment& env);

struct RunOptions {
    std::int64_t snapshot_interval_ms = 1000;
    std::int64_t drain_timeout_ms = 30'000;
};

struct RunOutcome {
    std::string run_id;
    std::string status; // ok | degraded | failed
    std::string error;
    std::filesystem::path run_dir;
    RunManifest manifest;
};

/// Runs one resolved configuration end to end: creates the run directory
/// (config.resolved.yaml, manifest.json, metrics/, logs/), starts broker
/// topics, engine, metrics, then generators, runs for duration_s, drains the
/// engine to lag zero (or flags DrainTimeout), and finalizes the manifest.
RunOutcome execute_run(const ResolvedRunConfig& run, const RunOptions& options = {});

struct ExperimentSummary {
    std::vector<RunOutcome> runs;
    std::vector<std::filesystem::path> scripts; // batch mode
    bool all_ok() const;
};

/// Submits one sbatch script, returning the job id. The default shells out to
/// sbatch; tests inject a fake.
using SbatchSubmitter = std::function<std::string(const std::filesystem::path& script)>;

struct ExperimentOptions {
    ExecutionMode mode = ExecutionMode::kLocal;
    bool dry_run = false;
    RunOptions run;
    SbatchSubmitter submitter; // batch mode only; empty = real sbatch
};

/// Expands the matrix and executes it: sequentially in local/interactive
/// mode (a failed run never blocks the rest), or as an afterok-chained sbatch
/// series in batch mode (scripts only under dry_run).
ExperimentSummary run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& options);

} // namespace strombench
