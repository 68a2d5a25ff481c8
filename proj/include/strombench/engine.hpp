#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "strombench/broker.hpp"
#include "strombench/config.hpp"
#include "strombench/event.hpp"
#include "strombench/metrics.hpp"

namespace strombench {

class PartitionAssignmentError : public std::runtime_error {
public:
    PartitionAssignmentError(int parallelism, int partitions)
        : std::runtime_error("parallelism " + std::to_string(parallelism) +
                             " exceeds the input topic's " + std::to_string(partitions) +
                             " partitions; each worker needs at least one") {}
};

/// C x 9/5 + 32. Rejects non-finite input.
double to_fahrenheit(double temperature_c);

/// Strictly above the threshold.
bool threshold_detect(double temperature_f, double threshold_f);

/// All aligned window starts s with s ≡ 0 (mod slide), s <= ts < s + len,
/// s >= 0, ascending. slide must divide len.
std::vector<std::int64_t> assign_windows(std::int64_t event_ts_ms, std::int64_t window_len_ms,
                                         std::int64_t slide_ms);

struct WindowResult {
    std::int64_t window_start_ms = 0;
    std::int64_t window_end_ms = 0;
    std::int64_t sensor_id = 0;
    double avg_temperature_c = 0.0;
    std::int64_t event_count = 0;
    // Emission metadata for the latency taps; not part of the output record.
    std::int64_t max_event_ts_ms = 0;
    std::int64_t max_ingest_ms = 0;
};

/// Per (sensor, window) running sums. Sums use compensated addition so window
/// averages stay within oracle tolerance at large counts.
class WindowState {
public:
    WindowState(std::int64_t window_len_ms, std::int64_t slide_ms);

    /// Adds the event to every window containing `event_ts_ms`.
    void update(const SensorEvent& e, std::int64_t event_ts_ms, std::int64_t ingest_ms);

    /// Emits and evicts every window with end <= watermark, ordered by
    /// (window_start, sensor_id). Empty windows emit nothing.
    std::vector<WindowResult> flush(std::int64_t watermark_ms);

    std::size_t open_cells() const { return cells_.size(); }

    /// Distinct (sensor, window) cells ever opened; with eviction-free input
    /// this equals the number of results the state will emit.
    std::int64_t cells_created() const { return cells_created_; }

private:
    struct Cell {
        double sum = 0.0;
        double compensation = 0.0;
        std::int64_t count = 0;
        std::int64_t max_event_ts = 0;
        std::int64_t max_ingest_ms = 0;
#ifndef NDEBUG
        std::thread::id owner;
#endif
    };

    std::int64_t window_len_ms_;
    std::int64_t slide_ms_;
    std::map<std::pair<std::int64_t, std::int64_t>, Cell> cells_; // (start, sensor)
    std::int64_t cells_created_ = 0;
};

struct WorkerStats {
    int worker = 0;
    std::int64_t events_in = 0;
    std::int64_t bytes_in = 0;
    std::int64_t records_out = 0;
    std::int64_t batches = 0;
};

struct EngineStats {
    std::vector<WorkerStats> workers;
    std::int64_t events_in = 0;
    std::int64_t records_out = 0;
    std::int64_t windows_created = 0; // memory pipeline only
};

/// Runs one of the three reference pipelines over the input topic at the
/// configured parallelism. Worker i exclusively owns partitions p with
/// p mod parallelism == i, and with them all keyed state for their sensors.
/// Offsets are committed once the batch's effect is produced.
class StreamEngine {
public:
    StreamEngine(PipelineDefinition def, TopicAdapter& in, TopicAdapter& out,
                 TapSet* taps = nullptr, std::string group = "engine");
    ~StreamEngine();

    /// Registers the consumer group, claims partitions, spawns workers.
    /// Throws PartitionAssignmentError before any thread starts.
    void start();

    /// Lets workers finish draining: each exits after a stop request once a
    /// full sweep of its partitions comes back empty, flushing open windows.
    void request_stop();

    /// Waits for the workers and returns merged stats.
    EngineStats join();

    const std::string& group() const { return group_; }

private:
    struct Worker;
    void run_worker(Worker& w);
    void process_batch(Worker& w, int partition, const std::vector<ConsumedRecord>& batch);
    void emit_results(Worker& w, const std::vector<WindowResult>& results);

    PipelineDefinition def_;
    TopicAdapter& in_;
    TopicAdapter& out_;
    TapSet* taps_;
    std::string group_;
    std::vector<std::unique_ptr<Worker>> workers_;
    std::atomic<bool> stop_requested_{false};
    bool started_ = false;
    bool joined_ = false;
};

} // namespace strombench
