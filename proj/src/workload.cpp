#include "strombench/workload.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "strombench/clock.hpp"

namespace strombench {

GeneratorPlan plan_generators(std::int64_t total_rate_eps, std::int64_t per_instance_cap_eps,
                              std::uint64_t seed_base) {
    if (total_rate_eps < 1) throw InvalidRateError(total_rate_eps);
    if (per_instance_cap_eps < 1) throw InvalidRateError(per_instance_cap_eps);

    GeneratorPlan plan;
    plan.seed_base = seed_base;
    plan.instance_count =
        static_cast<int>((total_rate_eps + per_instance_cap_eps - 1) / per_instance_cap_eps);
    const std::int64_t base = total_rate_eps / plan.instance_count;
    const std::int64_t remainder = total_rate_eps % plan.instance_count;
    plan.per_instance_rate_eps.resize(static_cast<std::size_t>(plan.instance_count));
    for (int i = 0; i < plan.instance_count; ++i) {
        plan.per_instance_rate_eps[static_cast<std::size_t>(i)] =
            base + (i < remainder ? 1 : 0);
    }
    return plan;
}

namespace {

// Splits `value` across `count` shares; share `index` gets the remainder first.
std::int64_t split_share(std::int64_t value, int count, int index) {
    const std::int64_t base = value / count;
    const std::int64_t remainder = value % count;
    return base + (index < remainder ? 1 : 0);
}

} // namespace

WorkloadSpec instance_workload(const WorkloadSpec& spec, const GeneratorPlan& plan, int index) {
    WorkloadSpec out = spec;
    out.total_rate_eps = plan.per_instance_rate_eps[static_cast<std::size_t>(index)];
    const int n = plan.instance_count;
    if (spec.pattern == WorkloadPattern::kRandom) {
        out.random.min_freq_eps = split_share(spec.random.min_freq_eps, n, index);
        out.random.max_freq_eps = split_share(spec.random.max_freq_eps, n, index);
    } else if (spec.pattern == WorkloadPattern::kBurst) {
        out.burst.burst_freq_eps = split_share(spec.burst.burst_freq_eps, n, index);
    }
    return out;
}

EmissionSchedule::EmissionSchedule(const WorkloadSpec& instance_spec, std::uint64_t seed)
    : rng_(seed) {
    switch (instance_spec.pattern) {
        case WorkloadPattern::kConstant:
            phase_ = Phase::kConstant;
            rate_eps_ = instance_spec.total_rate_eps;
            break;
        case WorkloadPattern::kRandom:
            min_pause_ms_ = instance_spec.random.min_pause_ms;
            max_pause_ms_ = instance_spec.random.max_pause_ms;
            min_freq_eps_ = instance_spec.random.min_freq_eps;
            max_freq_eps_ = instance_spec.random.max_freq_eps;
            enter_active();
            break;
        case WorkloadPattern::kBurst:
            // Burst is random with both bounds collapsed: a fixed-frequency
            // active phase, then a fixed pause until the next interval boundary.
            min_pause_ms_ = max_pause_ms_ =
                std::max<std::int64_t>(instance_spec.burst.interval_ms - kActivePhaseMs, 0);
            min_freq_eps_ = max_freq_eps_ = instance_spec.burst.burst_freq_eps;
            enter_active();
            break;
    }
}

void EmissionSchedule::enter_active() {
    phase_ = Phase::kActive;
    rate_eps_ = std::uniform_int_distribution<std::int64_t>(min_freq_eps_, max_freq_eps_)(rng_);
    phase_left_ms_ = kActivePhaseMs;
    carry_ = 0;
}

void EmissionSchedule::enter_pause() {
    phase_ = Phase::kPaused;
    phase_left_ms_ = std::uniform_int_distribution<std::int64_t>(min_pause_ms_, max_pause_ms_)(rng_);
    carry_ = 0;
    if (phase_left_ms_ == 0) enter_active();
}

std::int64_t EmissionSchedule::next_tick() {
    if (phase_ == Phase::kConstant) {
        carry_ += rate_eps_;
        const std::int64_t due = carry_ / 1000;
        carry_ %= 1000;
        return due;
    }
    if (phase_ == Phase::kPaused) {
        if (--phase_left_ms_ <= 0) enter_active();
        return 0;
    }
    carry_ += rate_eps_;
    const std::int64_t due = carry_ / 1000;
    carry_ %= 1000;
    if (--phase_left_ms_ <= 0) enter_pause();
    return due;
}

std::vector<std::int64_t> EmissionSchedule::instants(const WorkloadSpec& instance_spec,
                                                     std::uint64_t seed,
                                                     std::int64_t duration_ms) {
    EmissionSchedule sched(instance_spec, seed);
    std::vector<std::int64_t> out;
    for (std::int64_t tick = 0; tick < duration_ms; ++tick) {
        const std::int64_t due = sched.next_tick();
        for (std::int64_t i = 0; i < due; ++i) out.push_back(tick);
    }
    return out;
}

SensorEvent generate_event(std::mt19937_64& rng, std::int64_t num_sensors,
                           std::int64_t now_ms) {
    SensorEvent e;
    e.created_at_ms = now_ms;
    e.sensor_id = std::uniform_int_distribution<std::int64_t>(0, num_sensors - 1)(rng);
    const double raw = std::uniform_real_distribution<double>(0.0, 100.0)(rng);
    e.temperature_c = std::round(raw * 10.0) / 10.0;
    return e;
}

namespace {

GeneratorStats run_instance(int index, const WorkloadSpec& spec, const GeneratorPlan& plan,
                            TopicAdapter& sink, std::int64_t duration_s, int event_size_bytes,
                            TapSet* taps) {
    GeneratorStats stats;
    stats.instance = index;

    const WorkloadSpec mine = instance_workload(spec, plan, index);
    EmissionSchedule schedule(mine, plan.seed_base + static_cast<std::uint64_t>(index));
    std::mt19937_64 rng(plan.seed_base ^
                        (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(index + 1)));

    TapSet::Recorder recorder;
    if (taps) recorder = taps->recorder();

    std::int64_t blocked_us = 0;
    const auto start = std::chrono::steady_clock::now();
    const std::int64_t ticks = duration_s * 1000;
    for (std::int64_t tick = 0; tick < ticks; ++tick) {
        const std::int64_t due = schedule.next_tick();
        for (std::int64_t i = 0; i < due; ++i) {
            SensorEvent e = generate_event(rng, mine.num_sensors, Clock::now_ms());
            // Events whose compact encoding exceeds the configured size are
            // emitted at their compact size.
            const std::size_t target =
                std::max<std::size_t>(static_cast<std::size_t>(event_size_bytes),
                                      min_encoded_size(e));
            EncodedRecord record = serialize_event(e, target);
            const auto size = static_cast<std::int64_t>(record.size());
            if (taps) recorder.record(TapId::kGenerator, size);
            try {
                ProduceResult pr = sink.produce(e.sensor_id, std::move(record), e.created_at_ms);
                blocked_us += pr.blocked_us;
                if (taps) {
                    recorder.record(TapId::kBrokerIn, size);
                    recorder.record_latency(TapId::kBrokerIn,
                                            (pr.ingest_ts_ms - e.created_at_ms) * 1000);
                }
            } catch (const TopicClosedError&) {
                stats.sink_closed = true;
                break;
            }
            ++stats.events_emitted;
            stats.bytes_emitted += size;
        }
        if (stats.sink_closed) break;
        const auto wake = start + std::chrono::milliseconds(tick + 1);
        if (std::chrono::steady_clock::now() < wake) {
            std::this_thread::sleep_until(wake);
        }
    }
    const auto wall =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    stats.wall_time_ms = wall.count();
    stats.backpressure_time_ms = blocked_us / 1000;
    stats.achieved_rate_eps =
        stats.wall_time_ms > 0
            ? static_cast<double>(stats.events_emitted) * 1000.0 / static_cast<double>(stats.wall_time_ms)
            : 0.0;
    return stats;
}

} // namespace

GeneratorRun run_generator(const GeneratorPlan& plan, const WorkloadSpec& spec,
                           TopicAdapter& sink, std::int64_t duration_s, int event_size_bytes,
                           TapSet* taps) {
    GeneratorRun run;
    run.instances.resize(static_cast<std::size_t>(plan.instance_count));

    {
        std::vector<std::jthread> threads;
        threads.reserve(static_cast<std::size_t>(plan.instance_count));
        for (int i = 0; i < plan.instance_count; ++i) {
            threads.emplace_back([&, i] {
                run.instances[static_cast<std::size_t>(i)] =
                    run_instance(i, spec, plan, sink, duration_s, event_size_bytes, taps);
            });
        }
    }

    GeneratorStats& agg = run.aggregate;
    for (const GeneratorStats& s : run.instances) {
        agg.events_emitted += s.events_emitted;
        agg.bytes_emitted += s.bytes_emitted;
        agg.wall_time_ms = std::max(agg.wall_time_ms, s.wall_time_ms);
        agg.backpressure_time_ms += s.backpressure_time_ms;
        run.sink_closed = run.sink_closed || s.sink_closed;
    }
    agg.sink_closed = run.sink_closed;
    agg.achieved_rate_eps =
        agg.wall_time_ms > 0
            ? static_cast<double>(agg.events_emitted) * 1000.0 / static_cast<double>(agg.wall_time_ms)
            : 0.0;
    return run;
}

} // namespace strombench
