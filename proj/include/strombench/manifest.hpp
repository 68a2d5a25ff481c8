#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace strombench {

/// Traceability record written beside every run's metrics. Serialized as
/// manifest.json with stable (lexicographic) key order.
struct RunManifest {
    std::string experiment_name;
    std::string run_id;
    std::string config_hash;
    std::string harness_version;
    std::string status = "running"; // running | ok | degraded | failed
    std::string error;              // component + reason when status == failed
    std::int64_t start_ts_ms = 0;
    std::int64_t end_ts_ms = 0;
    std::string hostname;
    std::string os;
    std::string arch;

    std::map<std::string, std::string> params; // resolved parameter assignment

    struct TapCounters {
        std::int64_t events = 0;
        std::int64_t bytes = 0;
    };
    std::map<std::string, TapCounters> taps;

    std::int64_t negative_latency_flags = 0;
    bool drain_timed_out = false;

    std::int64_t generator_events = 0;
    std::int64_t generator_bytes = 0;
    std::int64_t generator_backpressure_ms = 0;
    double generator_achieved_eps = 0.0;
    int generator_instances = 0;

    std::int64_t engine_events_in = 0;
    std::int64_t engine_records_out = 0;
    std::int64_t engine_windows_created = 0;

    std::string to_json() const;
    static RunManifest from_json(const std::string& text);

    void write(const std::filesystem::path& path) const;
    static RunManifest load(const std::filesystem::path& path);
};

/// Fills hostname/os/arch from uname.
void fill_host_descriptor(RunManifest& m);

} // namespace strombench
