#include "strombench/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <limits>

#include "strombench/clock.hpp"

namespace strombench {

double to_fahrenheit(double temperature_c) {
    if (!std::isfinite(temperature_c)) {
        throw std::domain_error("temperature is not finite");
    }
    return temperature_c * 9.0 / 5.0 + 32.0;
}

bool threshold_detect(double temperature_f, double threshold_f) {
    return temperature_f > threshold_f;
}

std::vector<std::int64_t> assign_windows(std::int64_t event_ts_ms, std::int64_t window_len_ms,
                                         std::int64_t slide_ms) {
    std::vector<std::int64_t> starts;
    const std::int64_t last = (event_ts_ms / slide_ms) * slide_ms;
    std::int64_t first = event_ts_ms - window_len_ms + 1;
    first = first <= 0 ? 0 : ((first + slide_ms - 1) / slide_ms) * slide_ms;
    starts.reserve(static_cast<std::size_t>((last - first) / slide_ms + 1));
    for (std::int64_t s = first; s <= last; s += slide_ms) {
        starts.push_back(s);
    }
    return starts;
}

WindowState::WindowState(std::int64_t window_len_ms, std::int64_t slide_ms)
    : window_len_ms_(window_len_ms), slide_ms_(slide_ms) {}

void WindowState::update(const SensorEvent& e, std::int64_t event_ts_ms,
                         std::int64_t ingest_ms) {
    const std::int64_t last = (event_ts_ms / slide_ms_) * slide_ms_;
    std::int64_t first = event_ts_ms - window_len_ms_ + 1;
    first = first <= 0 ? 0 : ((first + slide_ms_ - 1) / slide_ms_) * slide_ms_;
    for (std::int64_t start = first; start <= last; start += slide_ms_) {
        auto [it, inserted] = cells_.try_emplace({start, e.sensor_id});
        Cell& cell = it->second;
        if (inserted) {
            ++cells_created_;
#ifndef NDEBUG
            cell.owner = std::this_thread::get_id();
#endif
        }
        assert(cell.owner == std::this_thread::get_id() &&
               "keyed state touched by a second worker");
        const double y = e.temperature_c - cell.compensation;
        const double t = cell.sum + y;
        cell.compensation = (t - cell.sum) - y;
        cell.sum = t;
        ++cell.count;
        cell.max_event_ts = std::max(cell.max_event_ts, event_ts_ms);
        cell.max_ingest_ms = std::max(cell.max_ingest_ms, ingest_ms);
    }
}

std::vector<WindowResult> WindowState::flush(std::int64_t watermark_ms) {
    std::vector<WindowResult> results;
    auto it = cells_.begin();
    while (it != cells_.end()) {
        const std::int64_t start = it->first.first;
        // Cells are ordered by start; past the first open window nothing closes.
        if (start > watermark_ms - window_len_ms_) break;
        WindowResult r;
        r.window_start_ms = start;
        r.window_end_ms = start + window_len_ms_;
        r.sensor_id = it->first.second;
        r.event_count = it->second.count;
        r.avg_temperature_c = it->second.sum / static_cast<double>(it->second.count);
        r.max_event_ts_ms = it->second.max_event_ts;
        r.max_ingest_ms = it->second.max_ingest_ms;
        results.push_back(r);
        it = cells_.erase(it);
    }
    return results;
}

namespace {

std::string format_window_result(const WindowResult& r) {
    char avg[40];
    std::snprintf(avg, sizeof avg, "%.17g", r.avg_temperature_c);
    std::string out;
    out.reserve(96);
    out += "{\"ws\":";
    out += std::to_string(r.window_start_ms);
    out += ",\"we\":";
    out += std::to_string(r.window_end_ms);
    out += ",\"id\":";
    out += std::to_string(r.sensor_id);
    out += ",\"avg\":";
    out += avg;
    out += ",\"n\":";
    out += std::to_string(r.event_count);
    out += '}';
    return out;
}

std::string format_cpu_result(const SensorEvent& e, double temperature_f, bool flagged) {
    std::string out;
    out.reserve(72);
    out += "{\"ts\":";
    out += std::to_string(e.created_at_ms);
    out += ",\"id\":";
    out += std::to_string(e.sensor_id);
    out += ",\"t\":";
    out += format_temperature(e.temperature_c);
    out += ",\"tf\":";
    out += format_temperature(temperature_f);
    out += ",\"flag\":";
    out += flagged ? "true" : "false";
    out += '}';
    return out;
}

} // namespace

struct StreamEngine::Worker {
    int index = 0;
    std::vector<int> partitions;
    std::vector<PartitionClaim> claims;
    WorkerStats stats;
    WindowState windows;
    TapSet::Recorder recorder;
    std::jthread thread;

    Worker(int idx, std::int64_t len_ms, std::int64_t slide_ms)
        : index(idx), windows(len_ms, slide_ms) {
        stats.worker = idx;
    }
};

StreamEngine::StreamEngine(PipelineDefinition def, TopicAdapter& in, TopicAdapter& out,
                           TapSet* taps, std::string group)
    : def_(def), in_(in), out_(out), taps_(taps), group_(std::move(group)) {}

StreamEngine::~StreamEngine() {
    if (started_ && !joined_) {
        request_stop();
        join();
    }
}

void StreamEngine::start() {
    const int partitions = in_.partition_count();
    if (def_.parallelism < 1 || def_.parallelism > partitions) {
        throw PartitionAssignmentError(def_.parallelism, partitions);
    }
    in_.register_group(group_);

    workers_.reserve(static_cast<std::size_t>(def_.parallelism));
    for (int i = 0; i < def_.parallelism; ++i) {
        auto worker =
            std::make_unique<Worker>(i, def_.window_len_ms, def_.window_slide_ms);
        for (int p = 0; p < partitions; ++p) {
            if (p % def_.parallelism == i) {
                worker->partitions.push_back(p);
            }
        }
        workers_.push_back(std::move(worker));
    }
    // Claim everything before the first worker starts, so a claim conflict
    // aborts cleanly with nothing running.
    Topic* topic = dynamic_cast<Topic*>(&in_);
    for (auto& worker : workers_) {
        if (topic) {
            for (int p : worker->partitions) {
                worker->claims.push_back(topic->acquire_partition(group_, p));
            }
        }
        if (taps_) worker->recorder = taps_->recorder();
    }
    for (auto& worker : workers_) {
        worker->thread = std::jthread([this, w = worker.get()] { run_worker(*w); });
    }
    started_ = true;
}

void StreamEngine::request_stop() { stop_requested_.store(true, std::memory_order_relaxed); }

EngineStats StreamEngine::join() {
    EngineStats stats;
    for (auto& worker : workers_) {
        if (worker->thread.joinable()) worker->thread.join();
    }
    joined_ = true;
    for (auto& worker : workers_) {
        stats.workers.push_back(worker->stats);
        stats.events_in += worker->stats.events_in;
        stats.records_out += worker->stats.records_out;
        stats.windows_created += worker->windows.cells_created();
    }
    return stats;
}

void StreamEngine::run_worker(Worker& w) {
    const bool windowed = def_.kind == PipelineKind::kMemoryIntensive;
    std::int64_t next_flush_ms = 0;
    if (windowed && def_.time_mode == TimeMode::kProcessing) {
        const std::int64_t now = Clock::now_ms();
        next_flush_ms = (now / def_.window_slide_ms + 1) * def_.window_slide_ms;
    }

    while (true) {
        bool got_records = false;
        for (int p : w.partitions) {
            auto batch = in_.consume(group_, p, 512);
            if (batch.empty()) continue;
            got_records = true;
            process_batch(w, p, batch);
            ++w.stats.batches;
        }
        if (windowed && def_.time_mode == TimeMode::kProcessing) {
            const std::int64_t now = Clock::now_ms();
            if (now >= next_flush_ms) {
                emit_results(w, w.windows.flush(now));
                next_flush_ms = (now / def_.window_slide_ms + 1) * def_.window_slide_ms;
            }
        }
        if (!got_records) {
            if (stop_requested_.load(std::memory_order_relaxed)) break;
            std::this_thread::sleep_for(std::chrono::microseconds(200));
        }
    }
    if (windowed) {
        emit_results(w, w.windows.flush(std::numeric_limits<std::int64_t>::max()));
    }
}

void StreamEngine::process_batch(Worker& w, int partition,
                                 const std::vector<ConsumedRecord>& batch) {
    const std::int64_t proc_ingest_ms = Clock::now_ms();

    for (const ConsumedRecord& rec : batch) {
        const auto in_bytes = static_cast<std::int64_t>(rec.record.size());
        w.stats.events_in += 1;
        w.stats.bytes_in += in_bytes;
        if (taps_) w.recorder.record(TapId::kProcessor, in_bytes);

        switch (def_.kind) {
            case PipelineKind::kPassThrough: {
                EncodedRecord out_record;
                std::optional<std::int64_t> key;
                if (def_.parse_in_passthrough) {
                    const SensorEvent e = deserialize_event(rec.record);
                    out_record = serialize_event(e, rec.record.size());
                    key = e.sensor_id;
                } else {
                    out_record = rec.record;
                }
                const auto out_bytes = static_cast<std::int64_t>(out_record.size());
                const std::int64_t egress_ms = Clock::now_ms();
                ProduceResult pr = out_.produce(key, std::move(out_record), rec.event_ts_ms);
                ++w.stats.records_out;
                if (taps_) {
                    w.recorder.record_latency(TapId::kProcessor,
                                              (egress_ms - proc_ingest_ms) * 1000);
                    w.recorder.record(TapId::kBrokerOut, out_bytes);
                    w.recorder.record_latency(TapId::kBrokerOut,
                                              (pr.ingest_ts_ms - rec.event_ts_ms) * 1000);
                }
                break;
            }
            case PipelineKind::kCpuIntensive: {
                const SensorEvent e = deserialize_event(rec.record);
                const double tf = to_fahrenheit(e.temperature_c);
                const bool flagged = threshold_detect(tf, def_.threshold_f);
                EncodedRecord out_record = format_cpu_result(e, tf, flagged);
                const auto out_bytes = static_cast<std::int64_t>(out_record.size());
                const std::int64_t egress_ms = Clock::now_ms();
                ProduceResult pr =
                    out_.produce(e.sensor_id, std::move(out_record), rec.event_ts_ms);
                ++w.stats.records_out;
                if (taps_) {
                    w.recorder.record_latency(TapId::kProcessor,
                                              (egress_ms - proc_ingest_ms) * 1000);
                    w.recorder.record(TapId::kBrokerOut, out_bytes);
                    w.recorder.record_latency(TapId::kBrokerOut,
                                              (pr.ingest_ts_ms - rec.event_ts_ms) * 1000);
                }
                break;
            }
            case PipelineKind::kMemoryIntensive: {
                const SensorEvent e = deserialize_event(rec.record);
                const std::int64_t event_time =
                    def_.time_mode == TimeMode::kEvent ? e.created_at_ms : proc_ingest_ms;
                w.windows.update(e, event_time, proc_ingest_ms);
                break;
            }
        }
    }
    in_.commit(group_, partition, batch.back().offset);
}

void StreamEngine::emit_results(Worker& w, const std::vector<WindowResult>& results) {
    for (const WindowResult& r : results) {
        EncodedRecord out_record = format_window_result(r);
        const auto out_bytes = static_cast<std::int64_t>(out_record.size());
        const std::int64_t egress_ms = Clock::now_ms();
        ProduceResult pr = out_.produce(r.sensor_id, std::move(out_record), r.max_event_ts_ms);
        ++w.stats.records_out;
        if (taps_) {
            w.recorder.record_latency(TapId::kProcessor, (egress_ms - r.max_ingest_ms) * 1000);
            w.recorder.record(TapId::kBrokerOut, out_bytes);
            w.recorder.record_latency(TapId::kBrokerOut,
                                      (pr.ingest_ts_ms - r.max_event_ts_ms) * 1000);
        }
    }
}

} // namespace strombench
