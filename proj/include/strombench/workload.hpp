#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "strombench/broker.hpp"
#include "strombench/config.hpp"
#include "strombench/event.hpp"
#include "strombench/metrics.hpp"

namespace strombench {

class InvalidRateError : public std::runtime_error {
public:
    explicit InvalidRateError(std::int64_t rate)
        : std::runtime_error("rate must be >= 1 event/s (got " + std::to_string(rate) + ")") {}
};

class SinkClosedError : public std::runtime_error {
public:
    SinkClosedError() : std::runtime_error("sink closed during generation") {}
};

/// How a requested aggregate rate is spread over generator instances.
struct GeneratorPlan {
    int instance_count = 1;
    std::vector<std::int64_t> per_instance_rate_eps;
    std::uint64_t seed_base = 1;
};

/// instance_count = ceil(total/cap); the rate splits evenly with the
/// remainder going one event/s at a time to the lowest-indexed instances, so
/// the per-instance rates sum to the request exactly and never exceed the cap.
GeneratorPlan plan_generators(std::int64_t total_rate_eps, std::int64_t per_instance_cap_eps,
                              std::uint64_t seed_base = 1);

/// The workload one instance runs: pattern frequencies divided across the
/// plan's instances (pauses and intervals are shared).
WorkloadSpec instance_workload(const WorkloadSpec& spec, const GeneratorPlan& plan, int index);

/// Deterministic per-millisecond emission counts for one generator instance.
/// Constant mode spreads the rate with deficit carry-over; random mode
/// alternates drawn-frequency active phases (kActivePhaseMs each) with drawn
/// pauses; burst mode is random mode with both bounds collapsed.
class EmissionSchedule {
public:
    EmissionSchedule(const WorkloadSpec& instance_spec, std::uint64_t seed);

    /// Events due in the next 1 ms tick; advances the schedule.
    std::int64_t next_tick();

    /// Materialized emission instants (ms offsets) over a horizon, one entry
    /// per event. Mostly useful for inspection and tests.
    static std::vector<std::int64_t> instants(const WorkloadSpec& instance_spec,
                                              std::uint64_t seed, std::int64_t duration_ms);

private:
    enum class Phase { kConstant, kActive, kPaused };

    void enter_active();
    void enter_pause();

    std::mt19937_64 rng_;
    Phase phase_ = Phase::kConstant;
    std::int64_t rate_eps_ = 0;     // current emission frequency
    std::int64_t carry_ = 0;        // accumulated thousandths of an event
    std::int64_t phase_left_ms_ = 0;

    std::int64_t min_pause_ms_ = 0;
    std::int64_t max_pause_ms_ = 0;
    std::int64_t min_freq_eps_ = 0;
    std::int64_t max_freq_eps_ = 0;
};

/// Draws one event: sensor id uniform in [0, num_sensors), temperature
/// uniform in [0, 100] quantized to the wire format's one decimal.
SensorEvent generate_event(std::mt19937_64& rng, std::int64_t num_sensors,
                           std::int64_t now_ms);

struct GeneratorStats {
    int instance = -1; // -1 = aggregate
    std::int64_t events_emitted = 0;
    std::int64_t bytes_emitted = 0;
    std::int64_t wall_time_ms = 0;
    double achieved_rate_eps = 0.0;
    std::int64_t backpressure_time_ms = 0;
    bool sink_closed = false;
};

struct GeneratorRun {
    std::vector<GeneratorStats> instances;
    GeneratorStats aggregate;
    bool sink_closed = false; // any instance hit a closed sink (partial stats kept)
};

/// Runs the planned instances concurrently against `sink` for `duration_s`.
/// Each instance follows its schedule and blocks (never drops) on sink
/// backpressure, accruing blocked time. Records at the generator and
/// broker_in taps when `taps` is given.
GeneratorRun run_generator(const GeneratorPlan& plan, const WorkloadSpec& spec,
                           TopicAdapter& sink, std::int64_t duration_s,
                           int event_size_bytes, TapSet* taps = nullptr);

} // namespace strombench
