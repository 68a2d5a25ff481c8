#include "strombench/manifest.hpp"

#include <sys/utsname.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace strombench {

std::string RunManifest::to_json() const {
    nlohmann::json j;
    j["experiment_name"] = experiment_name;
    j["run_id"] = run_id;
    j["config_hash"] = config_hash;
    j["harness_version"] = harness_version;
    j["status"] = status;
    if (!error.empty()) j["error"] = error;
    j["start_ts_ms"] = start_ts_ms;
    j["end_ts_ms"] = end_ts_ms;
    j["host"] = {{"hostname", hostname}, {"os", os}, {"arch", arch}};
    j["params"] = params;
    nlohmann::json taps_json;
    for (const auto& [name, counters] : taps) {
        taps_json[name] = {{"events", counters.events}, {"bytes", counters.bytes}};
    }
    j["taps"] = taps_json;
    j["negative_latency_flags"] = negative_latency_flags;
    j["drain_timed_out"] = drain_timed_out;
    j["generator"] = {{"events", generator_events},
                      {"bytes", generator_bytes},
                      {"backpressure_ms", generator_backpressure_ms},
                      {"achieved_eps", generator_achieved_eps},
                      {"instances", generator_instances}};
    j["engine"] = {{"events_in", engine_events_in},
                   {"records_out", engine_records_out},
                   {"windows_created", engine_windows_created}};
    return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    RunManifest m;
    m.experiment_name = j.value("experiment_name", "");
    m.run_id = j.value("run_id", "");
    m.config_hash = j.value("config_hash", "");
    m.harness_version = j.value("harness_version", "");
    m.status = j.value("status", "");
    m.error = j.value("error", "");
    m.start_ts_ms = j.value("start_ts_ms", std::int64_t{0});
    m.end_ts_ms = j.value("end_ts_ms", std::int64_t{0});
    if (j.contains("host")) {
        m.hostname = j["host"].value("hostname", "");
        m.os = j["host"].value("os", "");
        m.arch = j["host"].value("arch", "");
    }
    if (j.contains("params")) {
        for (const auto& [k, v] : j["params"].items()) {
            m.params[k] = v.get<std::string>();
        }
    }
    if (j.contains("taps")) {
        for (const auto& [k, v] : j["taps"].items()) {
            m.taps[k] = {v.value("events", std::int64_t{0}), v.value("bytes", std::int64_t{0})};
        }
    }
    m.negative_latency_flags = j.value("negative_latency_flags", std::int64_t{0});
    m.drain_timed_out = j.value("drain_timed_out", false);
    if (j.contains("generator")) {
        const auto& g = j["generator"];
        m.generator_events = g.value("events", std::int64_t{0});
        m.generator_bytes = g.value("bytes", std::int64_t{0});
        m.generator_backpressure_ms = g.value("backpressure_ms", std::int64_t{0});
        m.generator_achieved_eps = g.value("achieved_eps", 0.0);
        m.generator_instances = g.value("instances", 0);
    }
    if (j.contains("engine")) {
        const auto& e = j["engine"];
        m.engine_events_in = e.value("events_in", std::int64_t{0});
        m.engine_records_out = e.value("records_out", std::int64_t{0});
        m.engine_windows_created = e.value("windows_created", std::int64_t{0});
    }
    return m;
}

void RunManifest::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_json();
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

void fill_host_descriptor(RunManifest& m) {
    utsname u{};
    if (uname(&u) == 0) {
        m.hostname = u.nodename;
        m.os = std::string(u.sysname) + " " + u.release;
        m.arch = u.machine;
    }
}

} // namespace strombench
