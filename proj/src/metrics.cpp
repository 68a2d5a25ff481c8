#include "strombench/metrics.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "strombench/clock.hpp"

namespace strombench {

const char* to_string(TapId tap) {
    switch (tap) {
        case TapId::kGenerator: return "generator";
        case TapId::kBrokerIn: return "broker_in";
        case TapId::kProcessor: return "processor";
        case TapId::kBrokerOut: return "broker_out";
    }
    return "?";
}

const char* to_string(LatencyKind kind) {
    switch (kind) {
        case LatencyKind::kDriver: return "driver";
        case LatencyKind::kProcessing: return "processing";
        case LatencyKind::kEndToEnd: return "end_to_end";
    }
    return "?";
}

bool latency_kind_of_tap(TapId tap, LatencyKind& kind) {
    switch (tap) {
        case TapId::kBrokerIn: kind = LatencyKind::kDriver; return true;
        case TapId::kProcessor: kind = LatencyKind::kProcessing; return true;
        case TapId::kBrokerOut: kind = LatencyKind::kEndToEnd; return true;
        case TapId::kGenerator: return false;
    }
    return false;
}

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// b[i] = 2^(i/2) * sqrt(2)^(i%2) microseconds, i in [0, kNumBuckets].
const std::array<double, HistogramSnapshot::kNumBuckets + 1>& bucket_bounds() {
    static const auto bounds = [] {
        std::array<double, HistogramSnapshot::kNumBuckets + 1> b{};
        for (int i = 0; i <= HistogramSnapshot::kNumBuckets; ++i) {
            b[static_cast<std::size_t>(i)] =
                std::ldexp(1.0, i / 2) * (i % 2 ? kSqrt2 : 1.0);
        }
        return b;
    }();
    return bounds;
}

int tap_of_kind(LatencyKind kind) {
    switch (kind) {
        case LatencyKind::kDriver: return static_cast<int>(TapId::kBrokerIn);
        case LatencyKind::kProcessing: return static_cast<int>(TapId::kProcessor);
        case LatencyKind::kEndToEnd: return static_cast<int>(TapId::kBrokerOut);
    }
    return 0;
}

} // namespace

int HistogramSnapshot::bucket_index(std::int64_t us) {
    if (us <= 1) return 0;
    if (us >= (std::int64_t{1} << (kNumBuckets / 2))) return kNumBuckets - 1;
    const int k = 63 - __builtin_clzll(static_cast<unsigned long long>(us));
    int index = 2 * k;
    if (static_cast<double>(us) >= bucket_bounds()[static_cast<std::size_t>(index + 1)]) {
        ++index;
    }
    return index < kNumBuckets ? index : kNumBuckets - 1;
}

double HistogramSnapshot::bucket_low(int index) {
    return bucket_bounds()[static_cast<std::size_t>(index)];
}

double HistogramSnapshot::bucket_high(int index) {
    return bucket_bounds()[static_cast<std::size_t>(index + 1)];
}

std::int64_t HistogramSnapshot::bucket_midpoint(int index) {
    return std::llround((bucket_low(index) + bucket_high(index)) / 2.0);
}

std::int64_t HistogramSnapshot::percentile(double q) const {
    if (total <= 0) throw EmptyHistogramError();
    if (q <= 0.0 || q > 1.0) throw std::invalid_argument("q must be in (0, 1]");
    const double threshold = q * static_cast<double>(total);
    std::int64_t cumulative = 0;
    for (int i = 0; i < kNumBuckets; ++i) {
        cumulative += counts[static_cast<std::size_t>(i)];
        if (static_cast<double>(cumulative) >= threshold - 1e-9) {
            return bucket_midpoint(i);
        }
    }
    return bucket_midpoint(kNumBuckets - 1);
}

void HistogramSnapshot::merge(const HistogramSnapshot& other) {
    for (int i = 0; i < kNumBuckets; ++i) {
        counts[static_cast<std::size_t>(i)] += other.counts[static_cast<std::size_t>(i)];
    }
    total += other.total;
    max_us = std::max(max_us, other.max_us);
}

std::int64_t latency_of(LatencyKind kind, std::int64_t creation_ms,
                        std::int64_t broker_ingest_ms, std::int64_t proc_ingest_ms,
                        std::int64_t egress_ms) {
    std::int64_t delta_ms = 0;
    switch (kind) {
        case LatencyKind::kDriver: delta_ms = broker_ingest_ms - creation_ms; break;
        case LatencyKind::kProcessing: delta_ms = egress_ms - proc_ingest_ms; break;
        case LatencyKind::kEndToEnd: delta_ms = egress_ms - creation_ms; break;
    }
    const std::int64_t us = delta_ms * 1000;
    if (us < 0) throw NegativeLatencyError(us);
    return us;
}

struct TapSet::Recorder::Shard {
    struct alignas(64) TapCell {
        std::atomic<std::int64_t> events{0};
        std::atomic<std::int64_t> bytes{0};
        std::atomic<std::int64_t> neg_flags{0};
        std::atomic<std::int64_t> hist_total{0};
        std::atomic<std::int64_t> hist_max{0};
        std::array<std::atomic<std::int64_t>, HistogramSnapshot::kNumBuckets> hist{};
    };
    std::array<TapCell, kNumTaps> taps;
};

struct TapSet::Impl {
    mutable std::mutex mutex;
    std::vector<std::unique_ptr<Recorder::Shard>> shards;
};

TapSet::TapSet() : impl_(std::make_unique<Impl>()) {}
TapSet::~TapSet() = default;

TapSet::Recorder TapSet::recorder() {
    std::lock_guard lock(impl_->mutex);
    impl_->shards.push_back(std::make_unique<Recorder::Shard>());
    return Recorder(impl_->shards.back().get());
}

void TapSet::Recorder::record(TapId tap, std::int64_t bytes) {
    auto& cell = shard_->taps[static_cast<std::size_t>(tap)];
    cell.events.fetch_add(1, std::memory_order_relaxed);
    cell.bytes.fetch_add(bytes, std::memory_order_relaxed);
}

void TapSet::Recorder::record_latency(TapId tap, std::int64_t us) {
    auto& cell = shard_->taps[static_cast<std::size_t>(tap)];
    if (us < 0) {
        cell.neg_flags.fetch_add(1, std::memory_order_relaxed);
        return;
    }
    const int index = HistogramSnapshot::bucket_index(us);
    cell.hist[static_cast<std::size_t>(index)].fetch_add(1, std::memory_order_relaxed);
    cell.hist_total.fetch_add(1, std::memory_order_relaxed);
    std::int64_t seen = cell.hist_max.load(std::memory_order_relaxed);
    while (us > seen &&
           !cell.hist_max.compare_exchange_weak(seen, us, std::memory_order_relaxed)) {
    }
}

TapTotals TapSet::totals(TapId tap) const {
    TapTotals out;
    std::lock_guard lock(impl_->mutex);
    for (const auto& shard : impl_->shards) {
        const auto& cell = shard->taps[static_cast<std::size_t>(tap)];
        out.events += cell.events.load(std::memory_order_relaxed);
        out.bytes += cell.bytes.load(std::memory_order_relaxed);
    }
    return out;
}

HistogramSnapshot TapSet::latency(LatencyKind kind) const {
    HistogramSnapshot snap;
    const auto tap = static_cast<std::size_t>(tap_of_kind(kind));
    std::lock_guard lock(impl_->mutex);
    for (const auto& shard : impl_->shards) {
        const auto& cell = shard->taps[tap];
        for (int i = 0; i < HistogramSnapshot::kNumBuckets; ++i) {
            snap.counts[static_cast<std::size_t>(i)] +=
                cell.hist[static_cast<std::size_t>(i)].load(std::memory_order_relaxed);
        }
        snap.total += cell.hist_total.load(std::memory_order_relaxed);
        snap.max_us = std::max(snap.max_us, cell.hist_max.load(std::memory_order_relaxed));
    }
    return snap;
}

std::int64_t TapSet::negative_latency_flags() const {
    std::int64_t flags = 0;
    std::lock_guard lock(impl_->mutex);
    for (const auto& shard : impl_->shards) {
        for (const auto& cell : shard->taps) {
            flags += cell.neg_flags.load(std::memory_order_relaxed);
        }
    }
    return flags;
}

ProcessProbe::ProcessProbe() {
    ticks_per_s_ = sysconf(_SC_CLK_TCK);
    page_size_ = sysconf(_SC_PAGESIZE);
    if (ticks_per_s_ <= 0) ticks_per_s_ = 100;
    if (page_size_ <= 0) page_size_ = 4096;
    sample();
}

ProcessSample ProcessProbe::sample() {
    ProcessSample out;

    std::int64_t utime = 0;
    std::int64_t stime = 0;
    {
        std::ifstream stat("/proc/self/stat");
        std::string line;
        if (stat && std::getline(stat, line)) {
            // Fields after the parenthesized comm; utime/stime are 14/15.
            const auto close_paren = line.rfind(')');
            if (close_paren != std::string::npos) {
                std::istringstream rest(line.substr(close_paren + 1));
                std::string tok;
                for (int field = 3; field <= 15 && (rest >> tok); ++field) {
                    if (field == 14) utime = std::atoll(tok.c_str());
                    if (field == 15) stime = std::atoll(tok.c_str());
                }
            }
        }
    }
    {
        std::ifstream statm("/proc/self/statm");
        std::int64_t pages_total = 0;
        std::int64_t pages_resident = 0;
        if (statm >> pages_total >> pages_resident) {
            out.rss_bytes = pages_resident * page_size_;
        }
    }

    const std::int64_t now_us = Clock::now_us();
    const std::int64_t cpu_ticks = utime + stime;
    if (last_wall_us_ > 0 && now_us > last_wall_us_) {
        const double cpu_s =
            static_cast<double>(cpu_ticks - last_cpu_ticks_) / static_cast<double>(ticks_per_s_);
        const double wall_s = static_cast<double>(now_us - last_wall_us_) / 1e6;
        out.cpu_percent = wall_s > 0 ? 100.0 * cpu_s / wall_s : 0.0;
    }
    last_cpu_ticks_ = cpu_ticks;
    last_wall_us_ = now_us;
    return out;
}

MetricsCollector::MetricsCollector(TapSet& taps, std::filesystem::path metrics_dir,
                                   std::int64_t interval_ms)
    : taps_(taps), dir_(std::move(metrics_dir)), interval_ms_(std::max<std::int64_t>(interval_ms, 100)) {}

MetricsCollector::~MetricsCollector() {
    if (started_) stop();
}

void MetricsCollector::start() {
    if (started_) return;
    started_ = true;
    std::filesystem::create_directories(dir_);
    last_snapshot_ms_ = Clock::now_ms();
    last_flush_ms_ = last_snapshot_ms_;
    worker_ = std::jthread([this](std::stop_token stop) {
        std::int64_t next_due = Clock::now_ms() + interval_ms_;
        while (!stop.stop_requested()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            const std::int64_t now = Clock::now_ms();
            if (now >= next_due) {
                snapshot_once(now);
                next_due += interval_ms_;
                if (now - last_flush_ms_ >= 10'000) {
                    write_all();
                    last_flush_ms_ = now;
                }
            }
        }
    });
}

void MetricsCollector::stop() {
    if (!started_) return;
    worker_.request_stop();
    worker_.join();
    started_ = false;
    std::int64_t now = Clock::now_ms();
    if (!process_.empty() && now <= process_.back().ts_ms) {
        now = process_.back().ts_ms + 1;
    }
    snapshot_once(now);
    write_all();
}

void MetricsCollector::snapshot_once(std::int64_t now_ms) {
    const double dt_s =
        std::max(static_cast<double>(now_ms - last_snapshot_ms_), 1.0) / 1000.0;
    for (int t = 0; t < kNumTaps; ++t) {
        const TapTotals totals = taps_.totals(static_cast<TapId>(t));
        const TapTotals& prev = last_totals_[static_cast<std::size_t>(t)];
        ThroughputRow row;
        row.ts_ms = now_ms;
        row.events_total = totals.events;
        row.bytes_total = totals.bytes;
        row.events_per_s = static_cast<double>(totals.events - prev.events) / dt_s;
        row.mb_per_s = static_cast<double>(totals.bytes - prev.bytes) / 1e6 / dt_s;
        throughput_[static_cast<std::size_t>(t)].push_back(row);
        last_totals_[static_cast<std::size_t>(t)] = totals;
    }
    for (int k = 0; k < kNumLatencyKinds; ++k) {
        const HistogramSnapshot snap = taps_.latency(static_cast<LatencyKind>(k));
        LatencyRow row;
        row.ts_ms = now_ms;
        row.count = snap.total;
        if (snap.total > 0) {
            row.p50_us = snap.percentile(0.50);
            row.p95_us = snap.percentile(0.95);
            row.p99_us = snap.percentile(0.99);
            row.max_us = snap.max_us;
        }
        latency_[static_cast<std::size_t>(k)].push_back(row);
    }
    process_.push_back({now_ms, probe_.sample()});
    last_snapshot_ms_ = now_ms;
}

void MetricsCollector::write_all() {
    for (int t = 0; t < kNumTaps; ++t) {
        write_throughput_csv(throughput_[static_cast<std::size_t>(t)],
                             throughput_path(dir_, static_cast<TapId>(t)));
    }
    for (int k = 0; k < kNumLatencyKinds; ++k) {
        write_latency_csv(latency_[static_cast<std::size_t>(k)], static_cast<LatencyKind>(k),
                          latency_path(dir_, static_cast<LatencyKind>(k)));
    }
    write_process_csv(process_, process_path(dir_));
}

const std::vector<ThroughputRow>& MetricsCollector::throughput_series(TapId tap) const {
    return throughput_[static_cast<std::size_t>(tap)];
}

const std::vector<LatencyRow>& MetricsCollector::latency_series(LatencyKind kind) const {
    return latency_[static_cast<std::size_t>(kind)];
}

const std::vector<ProcessRow>& MetricsCollector::process_series() const { return process_; }

std::filesystem::path MetricsCollector::throughput_path(const std::filesystem::path& dir,
                                                        TapId tap) {
    return dir / ("throughput_" + std::string(to_string(tap)) + ".csv");
}

std::filesystem::path MetricsCollector::latency_path(const std::filesystem::path& dir,
                                                     LatencyKind kind) {
    return dir / ("latency_" + std::string(to_string(kind)) + ".csv");
}

std::filesystem::path MetricsCollector::process_path(const std::filesystem::path& dir) {
    return dir / "process.csv";
}

namespace {

void check_increasing(std::int64_t prev, std::int64_t ts, const std::filesystem::path& path) {
    if (prev >= 0 && ts <= prev) {
        throw std::runtime_error("sample timestamps must be strictly increasing in " +
                                 path.string());
    }
}

} // namespace

void write_throughput_csv(const std::vector<ThroughputRow>& rows,
                          const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "ts_ms,events_total,bytes_total,events_per_s,mb_per_s\n";
    std::int64_t prev = -1;
    char buf[160];
    for (const auto& r : rows) {
        check_increasing(prev, r.ts_ms, path);
        prev = r.ts_ms;
        std::snprintf(buf, sizeof buf, "%lld,%lld,%lld,%.3f,%.6f\n",
                      static_cast<long long>(r.ts_ms), static_cast<long long>(r.events_total),
                      static_cast<long long>(r.bytes_total), r.events_per_s, r.mb_per_s);
        out << buf;
    }
}

void write_latency_csv(const std::vector<LatencyRow>& rows, LatencyKind kind,
                       const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "ts_ms,kind,count,p50_us,p95_us,p99_us,max_us\n";
    std::int64_t prev = -1;
    char buf[200];
    for (const auto& r : rows) {
        check_increasing(prev, r.ts_ms, path);
        prev = r.ts_ms;
        std::snprintf(buf, sizeof buf, "%lld,%s,%lld,%lld,%lld,%lld,%lld\n",
                      static_cast<long long>(r.ts_ms), to_string(kind),
                      static_cast<long long>(r.count), static_cast<long long>(r.p50_us),
                      static_cast<long long>(r.p95_us), static_cast<long long>(r.p99_us),
                      static_cast<long long>(r.max_us));
        out << buf;
    }
}

void write_process_csv(const std::vector<ProcessRow>& rows,
                       const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "ts_ms,cpu_percent,rss_bytes,reclaim_count,reclaim_time_ms,source\n";
    std::int64_t prev = -1;
    char buf[200];
    for (const auto& r : rows) {
        check_increasing(prev, r.ts_ms, path);
        prev = r.ts_ms;
        std::snprintf(buf, sizeof buf, "%lld,%.2f,%lld,%lld,%lld,%s\n",
                      static_cast<long long>(r.ts_ms), r.sample.cpu_percent,
                      static_cast<long long>(r.sample.rss_bytes),
                      static_cast<long long>(r.sample.reclaim_count),
                      static_cast<long long>(r.sample.reclaim_time_ms),
                      r.sample.source.c_str());
        out << buf;
    }
}

} // namespace strombench
