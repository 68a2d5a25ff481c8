#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace strombench {

enum class TapId : int { kGenerator = 0, kBrokerIn = 1, kProcessor = 2, kBrokerOut = 3 };
inline constexpr int kNumTaps = 4;

enum class LatencyKind : int { kDriver = 0, kProcessing = 1, kEndToEnd = 2 };
inline constexpr int kNumLatencyKinds = 3;

const char* to_string(TapId tap);
const char* to_string(LatencyKind kind);

/// The latency kind measured at a tap; the generator tap carries none.
bool latency_kind_of_tap(TapId tap, LatencyKind& kind);

class EmptyHistogramError : public std::runtime_error {
public:
    EmptyHistogramError() : std::runtime_error("histogram is empty") {}
};

class NegativeLatencyError : public std::runtime_error {
public:
    explicit NegativeLatencyError(std::int64_t us)
        : std::runtime_error("negative latency of " + std::to_string(us) +
                             " us indicates clock skew") {}
};

/// Logarithmic histogram with fixed boundaries at factor sqrt(2) starting at
/// 1 us; the top bucket closes above 100 s. Values outside clamp to the edge
/// buckets.
struct HistogramSnapshot {
    static constexpr int kNumBuckets = 56;

    std::array<std::int64_t, kNumBuckets> counts{};
    std::int64_t total = 0;
    std::int64_t max_us = 0;

    static int bucket_index(std::int64_t us);
    static double bucket_low(int index);
    static double bucket_high(int index);
    static std::int64_t bucket_midpoint(int index);

    /// Smallest bucket midpoint at which the cumulative count reaches
    /// q * total, q in (0,1]. Error is at most one bucket width. Throws
    /// EmptyHistogramError when total == 0.
    std::int64_t percentile(double q) const;

    void merge(const HistogramSnapshot& other);
};

/// Computes one of the three pipeline latencies from its timestamps.
/// All inputs are wall milliseconds from the same clock domain; the result is
/// microseconds. Throws NegativeLatencyError when the interval is negative.
std::int64_t latency_of(LatencyKind kind, std::int64_t creation_ms,
                        std::int64_t broker_ingest_ms, std::int64_t proc_ingest_ms,
                        std::int64_t egress_ms);

struct TapTotals {
    std::int64_t events = 0;
    std::int64_t bytes = 0;
};

/// The four instrumented points of the pipeline. Recording goes through
/// per-thread Recorder handles holding private shards, so the hot path is a
/// couple of relaxed atomic adds; snapshots merge the shards.
class TapSet {
public:
    class Recorder {
    public:
        Recorder() = default;

        /// Counts one event of `bytes` at the tap. Infallible, no blocking.
        void record(TapId tap, std::int64_t bytes);

        /// Adds a latency observation at the tap's kind; negative values are
        /// flagged, not dropped silently.
        void record_latency(TapId tap, std::int64_t us);

    private:
        friend class TapSet;
        struct Shard;
        explicit Recorder(Shard* shard) : shard_(shard) {}
        Shard* shard_ = nullptr;
    };

    TapSet();
    ~TapSet();
    TapSet(const TapSet&) = delete;
    TapSet& operator=(const TapSet&) = delete;

    /// A handle for one recording thread. Handles stay valid for the TapSet's
    /// lifetime; acquiring is the only synchronized step.
    Recorder recorder();

    TapTotals totals(TapId tap) const;
    HistogramSnapshot latency(LatencyKind kind) const;
    std::int64_t negative_latency_flags() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct ProcessSample {
    double cpu_percent = 0.0;
    std::int64_t rss_bytes = 0;
    std::int64_t reclaim_count = 0;
    std::int64_t reclaim_time_ms = 0;
    std::string source = "none";
};

/// Reads CPU and memory figures for this process from /proc. The reclaim
/// counters mirror a managed runtime's collector stats; the native engine has
/// no collector, so they stay zero with source "none".
class ProcessProbe {
public:
    ProcessProbe();
    ProcessSample sample();

private:
    std::int64_t last_cpu_ticks_ = 0;
    std::int64_t last_wall_us_ = 0;
    long ticks_per_s_ = 100;
    long page_size_ = 4096;
};

struct ThroughputRow {
    std::int64_t ts_ms = 0;
    std::int64_t events_total = 0;
    std::int64_t bytes_total = 0;
    double events_per_s = 0.0;
    double mb_per_s = 0.0; // MB = 10^6 bytes
};

struct LatencyRow {
    std::int64_t ts_ms = 0;
    std::int64_t count = 0;
    std::int64_t p50_us = 0;
    std::int64_t p95_us = 0;
    std::int64_t p99_us = 0;
    std::int64_t max_us = 0;
};

struct ProcessRow {
    std::int64_t ts_ms = 0;
    ProcessSample sample;
};

/// Periodically samples the taps into per-tap series and writes them as CSV.
/// Snapshotting never blocks recorders; files are rewritten on every flush
/// (every 10 s and at stop).
class MetricsCollector {
public:
    MetricsCollector(TapSet& taps, std::filesystem::path metrics_dir,
                     std::int64_t interval_ms = 1000);
    ~MetricsCollector();

    void start();
    void stop(); // final snapshot + flush

    const std::vector<ThroughputRow>& throughput_series(TapId tap) const;
    const std::vector<LatencyRow>& latency_series(LatencyKind kind) const;
    const std::vector<ProcessRow>& process_series() const;

    static std::filesystem::path throughput_path(const std::filesystem::path& dir, TapId tap);
    static std::filesystem::path latency_path(const std::filesystem::path& dir,
                                              LatencyKind kind);
    static std::filesystem::path process_path(const std::filesystem::path& dir);

private:
    void snapshot_once(std::int64_t now_ms);
    void write_all();

    TapSet& taps_;
    std::filesystem::path dir_;
    std::int64_t interval_ms_;
    ProcessProbe probe_;

    std::array<std::vector<ThroughputRow>, kNumTaps> throughput_;
    std::array<std::vector<LatencyRow>, kNumLatencyKinds> latency_;
    std::vector<ProcessRow> process_;
    std::array<TapTotals, kNumTaps> last_totals_{};
    std::int64_t last_snapshot_ms_ = 0;
    std::int64_t last_flush_ms_ = 0;

    std::jthread worker_;
    bool started_ = false;
};

/// CSV emission for the three series schemas. Sample timestamps must be
/// strictly increasing; violations throw.
void write_throughput_csv(const std::vector<ThroughputRow>& rows,
                          const std::filesystem::path& path);
void write_latency_csv(const std::vector<LatencyRow>& rows, LatencyKind kind,
                       const std::filesystem::path& path);
void write_process_csv(const std::vector<ProcessRow>& rows,
                       const std::filesystem::path& path);

} // namespace strombench
