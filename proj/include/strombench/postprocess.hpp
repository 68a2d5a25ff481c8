#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "strombench/manifest.hpp"
#include "strombench/metrics.hpp"

namespace strombench {

class LoadError : public std::runtime_error {
public:
    LoadError(const std::filesystem::path& file, std::size_t line, const std::string& msg)
        : std::runtime_error(file.string() + ":" + std::to_string(line) + ": " + msg) {}
    explicit LoadError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const; // -1 when absent
    double number(std::size_t row, int col) const;
    std::int64_t integer(std::size_t row, int col) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const CsvTable& table, const std::filesystem::path& path);

/// One run directory pulled into memory: manifest, metric tables by file
/// stem, and any third-party series dropped under external/.
struct LoadedRun {
    std::filesystem::path dir;
    RunManifest manifest;
    std::map<std::string, CsvTable> metrics;
    std::map<std::string, std::vector<std::pair<std::int64_t, double>>> external;
};

LoadedRun load_run(const std::filesystem::path& dir);

/// Removes the first and last ceil(fraction * n) samples and replaces the
/// ts_ms column with time normalized to [0, 1] over what remains.
/// fraction must be in [0, 0.5).
CsvTable trim_warmup(const CsvTable& series, double fraction);

struct Violation {
    std::string kind;
    std::string message;
};

/// The three validation passes: tap conservation for the run's pipeline kind,
/// zero negative-latency flags, and strictly increasing sample timestamps.
std::vector<Violation> validate_run(const LoadedRun& run);

struct RunReport {
    std::string run_id;
    std::string pipeline;
    std::string pattern;
    std::int64_t rate_eps = 0;
    int parallelism = 1;
    int rep = 0;
    std::array<double, kNumTaps> mean_eps{};
    std::array<double, kNumTaps> max_eps{};
    std::array<double, kNumTaps> mean_mbps{};
    std::array<std::int64_t, kNumLatencyKinds> p50_us{};
    std::array<std::int64_t, kNumLatencyKinds> p95_us{};
    std::array<std::int64_t, kNumLatencyKinds> p99_us{};
    std::vector<Violation> violations;
};

inline constexpr double kDefaultWarmupFraction = 0.1;

RunReport build_report(const LoadedRun& run, double warmup_fraction = kDefaultWarmupFraction);

struct ScalingRow {
    double x = 0;
    int n = 0;
    double throughput_mean_eps = 0;
    double throughput_stddev_eps = 0;
    double p99_mean_us = 0;
    double p99_stddev_us = 0;
};

struct ScalingTables {
    std::vector<ScalingRow> by_rate;        // x = offered rate, broker_in throughput
    std::vector<ScalingRow> by_parallelism; // x = parallelism, broker_out throughput
};

/// Mean and sample stddev (n-1; zero when n == 1) across repetitions, rows
/// sorted by the independent variable.
ScalingTables aggregate(const std::vector<RunReport>& reports);

/// Writes summary.csv, scaling_rate.csv, scaling_parallelism.csv,
/// violations.csv (when any) and timeseries/<run_id>/<metric>.csv with
/// normalized time. Deterministic; rerunning yields identical bytes.
void emit_outputs(const std::vector<RunReport>& reports, const std::vector<LoadedRun>& runs,
                  const ScalingTables& tables, const std::filesystem::path& out_dir,
                  double warmup_fraction = kDefaultWarmupFraction);

struct PostprocessResult {
    std::vector<RunReport> reports;
    ScalingTables tables;
    std::size_t violation_count = 0;
};

/// Loads every run directory under results_dir (those carrying a
/// manifest.json), validates, aggregates, and emits to out_dir.
PostprocessResult postprocess_experiment(const std::filesystem::path& results_dir,
                                         const std::filesystem::path& out_dir);

} // namespace strombench
