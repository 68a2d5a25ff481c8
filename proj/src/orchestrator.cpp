#include "strombench/orchestrator.hpp"

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "strombench/broker.hpp"
#include "strombench/clock.hpp"
#include "strombench/engine.hpp"
#include "strombench/metrics.hpp"
#include "strombench/version.hpp"
#include "strombench/workload.hpp"

namespace strombench {

const char* to_string(ExecutionMode mode) {
    switch (mode) {
        case ExecutionMode::kLocal: return "local";
        case ExecutionMode::kSlurmInteractive: return "slurm_interactive";
        case ExecutionMode::kSlurmBatch: return "slurm_batch";
    }
    return "?";
}

namespace {

int env_int(const EnvReader& getenv_fn, const char* name, int fallback) {
    const char* value = getenv_fn(name);
    if (!value || !*value) return fallback;
    return std::atoi(value);
}

} // namespace

ExecutionEnvironment detect_environment(const EnvReader& getenv_fn, bool stdin_is_tty) {
    ExecutionEnvironment env;
    const char* job_id = getenv_fn("SLURM_JOB_ID");
    if (job_id && *job_id) {
        env.mode = stdin_is_tty ? ExecutionMode::kSlurmInteractive : ExecutionMode::kSlurmBatch;
        env.resources.cpus = env_int(getenv_fn, "SLURM_CPUS_PER_TASK", 0);
        const int mem_mb = env_int(getenv_fn, "SLURM_MEM_PER_NODE", 0);
        env.resources.mem_gb = mem_mb / 1024;
        env.resources.nodes = env_int(getenv_fn, "SLURM_JOB_NUM_NODES", 1);
        return env;
    }
    env.mode = ExecutionMode::kLocal;
    env.resources.cpus = static_cast<int>(std::thread::hardware_concurrency());
    long pages = sysconf(_SC_PHYS_PAGES);
    long page_size = sysconf(_SC_PAGE_SIZE);
    if (pages > 0 && page_size > 0) {
        env.resources.mem_gb =
            static_cast<int>((static_cast<std::int64_t>(pages) * page_size) >> 30);
    }
    return env;
}

ExecutionEnvironment detect_environment() {
    return detect_environment([](const char* name) { return std::getenv(name); },
                              isatty(STDIN_FILENO) == 1);
}

std::string ResourceRequest::walltime_hms() const {
    const std::int64_t h = walltime_s / 3600;
    const std::int64_t m = (walltime_s % 3600) / 60;
    const std::int64_t s = walltime_s % 60;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", static_cast<long long>(h),
                  static_cast<long long>(m), static_cast<long long>(s));
    return buf;
}

ResourceRequest compute_resources(const ResolvedRunConfig& run) {
    const GeneratorPlan plan =
        plan_generators(run.workload.total_rate_eps, run.workload.per_instance_cap_eps);
    const int generators = plan.instance_count;
    const int parallelism = run.pipeline.parallelism;

    const int cpus_needed = generators + parallelism + 2;
    const int mem_needed = generators * 2 + 5 + parallelism * 2;

    ResourceRequest request;
    request.nodes = run.resources.nodes;
    request.walltime_s =
        static_cast<std::int64_t>(std::ceil(static_cast<double>(run.duration_s) * 1.5)) + 600;

    if (run.resources.cpus > 0 && cpus_needed > run.resources.cpus) {
        throw ResourceOverCapError("needs " + std::to_string(cpus_needed) +
                                   " cpus but the configured limit is " +
                                   std::to_string(run.resources.cpus));
    }
    if (run.resources.mem_gb > 0 && mem_needed > run.resources.mem_gb) {
        throw ResourceOverCapError("needs " + std::to_string(mem_needed) +
                                   " GB but the configured limit is " +
                                   std::to_string(run.resources.mem_gb) + " GB");
    }
    request.cpus_per_task = run.resources.cpus > 0 ? run.resources.cpus : cpus_needed;
    request.mem_gb = run.resources.mem_gb > 0 ? run.resources.mem_gb : mem_needed;
    return request;
}

std::string emit_sbatch(const ResolvedRunConfig& run, const ResourceRequest& request,
                        bool depends_on_previous) {
    std::ostringstream s;
    s << "#!/bin/bash\n";
    s << "#SBATCH --job-name=" << run.experiment_name << "_" << run.run_id << "\n";
    s << "#SBATCH --nodes=" << request.nodes << "\n";
    s << "#SBATCH --cpus-per-task=" << request.cpus_per_task << "\n";
    s << "#SBATCH --mem=" << request.mem_gb << "G\n";
    s << "#SBATCH --time=" << request.walltime_hms() << "\n";
    s << "#SBATCH --output=logs/%x_%j.out\n";
    if (depends_on_previous) {
        s << "#SBATCH --dependency=afterok:" << kJobIdPlaceholder << "\n";
    }
    s << "\n";
    s << "set -euo pipefail\n";
    s << "\n";
    s << "strombench run --config " << run.run_id << ".resolved.yaml --mode local\n";
    return s.str();
}

std::vector<std::string> interactive_guard(const ResolvedRunConfig& run,
                                           const ExecutionEnvironment& env) {
    std::vector<std::string> shortfalls;
    if (env.mode != ExecutionMode::kSlurmInteractive) return shortfalls;
    const ResourceRequest request = compute_resources(run);
    if (env.resources.cpus < request.cpus_per_task) {
        shortfalls.push_back("cpus: allocated " + std::to_string(env.resources.cpus) +
                             ", need " + std::to_string(request.cpus_per_task));
    }
    if (env.resources.mem_gb < request.mem_gb) {
        shortfalls.push_back("mem_gb: allocated " + std::to_string(env.resources.mem_gb) +
                             ", need " + std::to_string(request.mem_gb));
    }
    return shortfalls;
}

namespace {

std::map<std::string, std::string> resolved_params(const ResolvedRunConfig& run) {
    std::map<std::string, std::string> p;
    p["pattern"] = to_string(run.workload.pattern);
    p["total_rate_eps"] = std::to_string(run.workload.total_rate_eps);
    p["per_instance_cap_eps"] = std::to_string(run.workload.per_instance_cap_eps);
    p["num_sensors"] = std::to_string(run.workload.num_sensors);
    p["event_size_bytes"] = std::to_string(run.event_size_bytes);
    p["partitions"] = std::to_string(run.broker.partitions);
    p["partition_capacity"] = std::to_string(run.broker.partition_capacity);
    p["pipeline"] = to_string(run.pipeline.kind);
    p["parallelism"] = std::to_string(run.pipeline.parallelism);
    p["window_len_ms"] = std::to_string(run.pipeline.window_len_ms);
    p["window_slide_ms"] = std::to_string(run.pipeline.window_slide_ms);
    p["time_mode"] = to_string(run.pipeline.time_mode);
    p["duration_s"] = std::to_string(run.duration_s);
    p["rep_index"] = std::to_string(run.rep_index);
    return p;
}

void write_log(const std::filesystem::path& logs_dir, const std::string& component,
               const std::string& text) {
    std::ofstream out(logs_dir / (component + ".log"), std::ios::app);
    out << text << "\n";
}

} // namespace

RunOutcome execute_run(const ResolvedRunConfig& run, const RunOptions& options) {
    RunOutcome outcome;
    outcome.run_id = run.run_id;
    outcome.run_dir =
        std::filesystem::path(run.output_dir) / run.experiment_name / run.run_id;
    const auto metrics_dir = outcome.run_dir / "metrics";
    const auto logs_dir = outcome.run_dir / "logs";
    std::filesystem::create_directories(metrics_dir);
    std::filesystem::create_directories(logs_dir);

    const std::string resolved_yaml = resolved_config_yaml(run);
    {
        std::ofstream out(outcome.run_dir / "config.resolved.yaml", std::ios::trunc);
        out << resolved_yaml;
    }

    RunManifest& manifest = outcome.manifest;
    manifest.experiment_name = run.experiment_name;
    manifest.run_id = run.run_id;
    manifest.config_hash = content_hash(resolved_yaml);
    manifest.harness_version = kVersion;
    manifest.start_ts_ms = Clock::now_ms();
    manifest.params = resolved_params(run);
    fill_host_descriptor(manifest);
    manifest.write(outcome.run_dir / "manifest.json");

    Broker broker;
    Topic& in_topic = broker.create_topic("in", run.broker.partitions,
                                          run.broker.partition_capacity);
    Topic& out_topic = broker.create_topic("out", run.broker.partitions,
                                           run.broker.partition_capacity);

    TapSet taps;
    MetricsCollector collector(taps, metrics_dir, options.snapshot_interval_ms);
    collector.start();

    auto fail = [&](const std::string& component, const std::string& reason) {
        write_log(logs_dir, component, reason);
        collector.stop();
        manifest.status = "failed";
        manifest.error = component + ": " + reason;
        manifest.end_ts_ms = Clock::now_ms();
        manifest.write(outcome.run_dir / "manifest.json");
        outcome.status = manifest.status;
        outcome.error = manifest.error;
        return outcome;
    };

    // Engine first: its consumer group must exist before the first event.
    StreamEngine engine(run.pipeline, in_topic, out_topic, &taps);
    try {
        engine.start();
    } catch (const std::exception& e) {
        return fail("engine", e.what());
    }

    GeneratorRun generator_run;
    try {
        const GeneratorPlan plan =
            plan_generators(run.workload.total_rate_eps, run.workload.per_instance_cap_eps,
                            fnv1a64(run.run_id));
        generator_run = run_generator(plan, run.workload, in_topic, run.duration_s,
                                      run.event_size_bytes, &taps);
        manifest.generator_instances = plan.instance_count;
    } catch (const std::exception& e) {
        engine.request_stop();
        engine.join();
        return fail("generator", e.what());
    }

    // Drain: wait until the engine has committed everything it was offered.
    const auto drain_deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(options.drain_timeout_ms);
    while (true) {
        const auto lags = in_topic.lag(engine.group());
        const std::int64_t total =
            std::accumulate(lags.begin(), lags.end(), std::int64_t{0});
        if (total == 0) break;
        if (std::chrono::steady_clock::now() >= drain_deadline) {
            manifest.drain_timed_out = true;
            write_log(logs_dir, "engine",
                      "drain timed out with lag " + std::to_string(total));
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }

    engine.request_stop();
    const EngineStats engine_stats = engine.join();
    collector.stop();

    manifest.generator_events = generator_run.aggregate.events_emitted;
    manifest.generator_bytes = generator_run.aggregate.bytes_emitted;
    manifest.generator_backpressure_ms = generator_run.aggregate.backpressure_time_ms;
    manifest.generator_achieved_eps = generator_run.aggregate.achieved_rate_eps;
    manifest.engine_events_in = engine_stats.events_in;
    manifest.engine_records_out = engine_stats.records_out;
    manifest.engine_windows_created = engine_stats.windows_created;
    for (int t = 0; t < kNumTaps; ++t) {
        const TapTotals totals = taps.totals(static_cast<TapId>(t));
        manifest.taps[to_string(static_cast<TapId>(t))] = {totals.events, totals.bytes};
    }
    manifest.negative_latency_flags = taps.negative_latency_flags();
    manifest.end_ts_ms = Clock::now_ms();
    manifest.status =
        (manifest.drain_timed_out || generator_run.sink_closed) ? "degraded" : "ok";
    manifest.write(outcome.run_dir / "manifest.json");
    outcome.status = manifest.status;
    return outcome;
}

bool ExperimentSummary::all_ok() const {
    for (const auto& run : runs) {
        if (run.status != "ok") return false;
    }
    return true;
}

namespace {

std::string default_sbatch_submit(const std::filesystem::path& script) {
    const std::string cmd = "sbatch --parsable " + script.string();
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("cannot invoke sbatch");
    char buf[256];
    std::string output;
    while (fgets(buf, sizeof buf, pipe)) output += buf;
    const int rc = pclose(pipe);
    if (rc != 0) throw std::runtime_error("sbatch failed for " + script.string());
    while (!output.empty() && (output.back() == '\n' || output.back() == '\r')) {
        output.pop_back();
    }
    return output;
}

std::string replace_placeholder(std::string text, const std::string& job_id) {
    const std::string needle = kJobIdPlaceholder;
    const auto pos = text.find(needle);
    if (pos != std::string::npos) {
        text.replace(pos, needle.size(), job_id);
    }
    return text;
}

} // namespace

ExperimentSummary run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& options) {
    ExperimentSummary summary;
    const std::vector<ResolvedRunConfig> runs = expand_experiment_matrix(cfg);

    if (options.mode == ExecutionMode::kSlurmBatch) {
        const auto sbatch_dir =
            std::filesystem::path(cfg.output_dir) / cfg.experiment_name / "sbatch";
        std::filesystem::create_directories(sbatch_dir);
        std::string previous_job;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const ResolvedRunConfig& run = runs[i];
            const ResourceRequest request = compute_resources(run);
            const std::string script = emit_sbatch(run, request, i > 0);
            const auto script_path = sbatch_dir / (run.run_id + ".sbatch");
            {
                std::ofstream out(script_path, std::ios::trunc);
                out << script;
            }
            {
                std::ofstream out(sbatch_dir / (run.run_id + ".resolved.yaml"), std::ios::trunc);
                out << resolved_config_yaml(run);
            }
            summary.scripts.push_back(script_path);
            if (!options.dry_run) {
                if (!previous_job.empty()) {
                    std::ofstream out(script_path, std::ios::trunc);
                    out << replace_placeholder(script, previous_job);
                }
                const SbatchSubmitter submit =
                    options.submitter ? options.submitter : default_sbatch_submit;
                previous_job = submit(script_path);
            }
        }
        return summary;
    }

    for (const ResolvedRunConfig& run : runs) {
        RunOutcome outcome;
        try {
            outcome = execute_run(run, options.run);
        } catch (const std::exception& e) {
            outcome.run_id = run.run_id;
            outcome.status = "failed";
            outcome.error = e.what();
        }
        summary.runs.push_back(std::move(outcome));
    }
    return summary;
}

} // namespace strombench
