#include "strombench/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace strombench {

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

double CsvTable::number(std::size_t row, int col) const {
    return std::strtod(rows[row][static_cast<std::size_t>(col)].c_str(), nullptr);
}

std::int64_t CsvTable::integer(std::size_t row, int col) const {
    return std::strtoll(rows[row][static_cast<std::size_t>(col)].c_str(), nullptr, 10);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

} // namespace

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            table.header = split_line(line);
            if (table.header.empty() || table.header[0].empty()) {
                throw LoadError(path, 1, "missing header");
            }
            continue;
        }
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != table.header.size()) {
            throw LoadError(path, line_no,
                            "expected " + std::to_string(table.header.size()) +
                                " fields, got " + std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    if (line_no == 0) throw LoadError(path, 1, "empty file");
    return table;
}

void write_csv(const CsvTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        out << (i ? "," : "") << table.header[i];
    }
    out << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? "," : "") << row[i];
        }
        out << "\n";
    }
}

LoadedRun load_run(const std::filesystem::path& dir) {
    LoadedRun run;
    run.dir = dir;
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) {
        throw LoadError("missing manifest: " + manifest_path.string());
    }
    try {
        run.manifest = RunManifest::load(manifest_path);
    } catch (const std::exception& e) {
        throw LoadError(manifest_path.string() + ": " + e.what());
    }

    const auto metrics_dir = dir / "metrics";
    if (std::filesystem::is_directory(metrics_dir)) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(metrics_dir)) {
            if (entry.path().extension() == ".csv") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            CsvTable table = read_csv(file);
            const int ts_col = table.column("ts_ms");
            if (ts_col != 0) throw LoadError(file, 1, "first column must be ts_ms");
            for (std::size_t r = 0; r < table.rows.size(); ++r) {
                const std::string& cell = table.rows[r][0];
                char* end = nullptr;
                std::strtoll(cell.c_str(), &end, 10);
                if (end == cell.c_str() || *end != '\0') {
                    throw LoadError(file, r + 2, "ts_ms is not an integer: \"" + cell + "\"");
                }
            }
            run.metrics.emplace(file.stem().string(), std::move(table));
        }
    }

    const auto external_dir = dir / "external";
    if (std::filesystem::is_directory(external_dir)) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(external_dir)) {
            if (entry.path().extension() == ".csv") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            CsvTable table = read_csv(file);
            const int ts_col = table.column("ts_ms");
            const int metric_col = table.column("metric");
            const int value_col = table.column("value");
            if (ts_col < 0 || metric_col < 0 || value_col < 0) {
                throw LoadError(file, 1, "external series need ts_ms,metric,value");
            }
            for (std::size_t r = 0; r < table.rows.size(); ++r) {
                run.external[table.rows[r][static_cast<std::size_t>(metric_col)]].emplace_back(
                    table.integer(r, ts_col), table.number(r, value_col));
            }
        }
        for (auto& [name, samples] : run.external) {
            std::sort(samples.begin(), samples.end());
        }
    }
    return run;
}

CsvTable trim_warmup(const CsvTable& series, double fraction) {
    if (fraction < 0.0 || fraction >= 0.5) {
        throw std::invalid_argument("warmup fraction must be in [0, 0.5)");
    }
    const int ts_col = series.column("ts_ms");
    if (ts_col < 0) throw std::invalid_argument("series has no ts_ms column");

    const std::size_t n = series.rows.size();
    const auto cut = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(n)));

    CsvTable out;
    out.header = series.header;
    out.header[static_cast<std::size_t>(ts_col)] = "norm_t";
    if (n == 0 || n <= 2 * cut) return out; // nothing left

    const std::size_t first = cut;
    const std::size_t last = n - cut - 1;
    const std::int64_t t0 = series.integer(first, ts_col);
    const std::int64_t t1 = series.integer(last, ts_col);
    const double span = static_cast<double>(t1 - t0);
    char buf[32];
    for (std::size_t r = first; r <= last; ++r) {
        std::vector<std::string> row = series.rows[r];
        const double norm =
            span > 0 ? static_cast<double>(series.integer(r, ts_col) - t0) / span : 0.0;
        std::snprintf(buf, sizeof buf, "%.6f", norm);
        row[static_cast<std::size_t>(ts_col)] = buf;
        out.rows.push_back(std::move(row));
    }
    return out;
}

std::vector<Violation> validate_run(const LoadedRun& run) {
    std::vector<Violation> violations;
    const RunManifest& m = run.manifest;

    auto tap_events = [&](const char* name) -> std::int64_t {
        auto it = m.taps.find(name);
        return it == m.taps.end() ? 0 : it->second.events;
    };

    const auto pipeline_it = m.params.find("pipeline");
    const std::string pipeline =
        pipeline_it == m.params.end() ? "pass_through" : pipeline_it->second;
    if (pipeline == "memory_intensive") {
        const std::int64_t out_count = tap_events("broker_out");
        if (out_count != m.engine_windows_created) {
            violations.push_back(
                {"ConservationViolation",
                 "window results " + std::to_string(out_count) + " != " +
                     std::to_string(m.engine_windows_created) +
                     " windows predicted from input timestamps (delta " +
                     std::to_string(out_count - m.engine_windows_created) + ")"});
        }
        const std::int64_t in_count = tap_events("generator");
        const std::int64_t processed = tap_events("processor");
        if (in_count != processed) {
            violations.push_back({"ConservationViolation",
                                  "processor consumed " + std::to_string(processed) + " of " +
                                      std::to_string(in_count) + " generated events (delta " +
                                      std::to_string(in_count - processed) + ")"});
        }
    } else {
        const std::int64_t generated = tap_events("generator");
        for (const char* tap : {"broker_in", "processor", "broker_out"}) {
            const std::int64_t count = tap_events(tap);
            if (count != generated) {
                violations.push_back(
                    {"ConservationViolation",
                     std::string(tap) + " saw " + std::to_string(count) + " events, generator " +
                         std::to_string(generated) + " (delta " +
                         std::to_string(count - generated) + ")"});
            }
        }
    }

    if (m.negative_latency_flags != 0) {
        violations.push_back({"LatencyViolation",
                              std::to_string(m.negative_latency_flags) +
                                  " negative-latency samples were flagged"});
    }

    for (const auto& [stem, table] : run.metrics) {
        const int ts_col = table.column("ts_ms");
        if (ts_col < 0) continue;
        std::int64_t prev = std::numeric_limits<std::int64_t>::min();
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const std::int64_t ts = table.integer(r, ts_col);
            if (ts <= prev) {
                violations.push_back({"MonotonicityViolation",
                                      stem + ".csv line " + std::to_string(r + 2) +
                                          ": ts_ms " + std::to_string(ts) +
                                          " does not increase"});
                break;
            }
            prev = ts;
        }
    }
    return violations;
}

namespace {

int param_int(const RunManifest& m, const std::string& key, int fallback) {
    auto it = m.params.find(key);
    return it == m.params.end() ? fallback : std::atoi(it->second.c_str());
}

std::int64_t param_i64(const RunManifest& m, const std::string& key, std::int64_t fallback) {
    auto it = m.params.find(key);
    return it == m.params.end() ? fallback : std::atoll(it->second.c_str());
}

std::string param_str(const RunManifest& m, const std::string& key) {
    auto it = m.params.find(key);
    return it == m.params.end() ? "" : it->second;
}

std::string fmt(double v, const char* spec = "%.3f") {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

} // namespace

RunReport build_report(const LoadedRun& run, double warmup_fraction) {
    RunReport report;
    report.run_id = run.manifest.run_id;
    report.pipeline = param_str(run.manifest, "pipeline");
    report.pattern = param_str(run.manifest, "pattern");
    report.rate_eps = param_i64(run.manifest, "total_rate_eps", 0);
    report.parallelism = param_int(run.manifest, "parallelism", 1);
    report.rep = param_int(run.manifest, "rep_index", 0);
    report.violations = validate_run(run);

    for (int t = 0; t < kNumTaps; ++t) {
        const std::string stem =
            "throughput_" + std::string(to_string(static_cast<TapId>(t)));
        auto it = run.metrics.find(stem);
        if (it == run.metrics.end()) continue;
        const CsvTable trimmed = trim_warmup(it->second, warmup_fraction);
        const int eps_col = trimmed.column("events_per_s");
        const int mbps_col = trimmed.column("mb_per_s");
        if (eps_col < 0 || trimmed.rows.empty()) continue;
        double sum = 0;
        double maxv = 0;
        double mb_sum = 0;
        for (std::size_t r = 0; r < trimmed.rows.size(); ++r) {
            const double v = trimmed.number(r, eps_col);
            sum += v;
            maxv = std::max(maxv, v);
            if (mbps_col >= 0) mb_sum += trimmed.number(r, mbps_col);
        }
        const auto count = static_cast<double>(trimmed.rows.size());
        report.mean_eps[static_cast<std::size_t>(t)] = sum / count;
        report.max_eps[static_cast<std::size_t>(t)] = maxv;
        report.mean_mbps[static_cast<std::size_t>(t)] = mb_sum / count;
    }

    for (int k = 0; k < kNumLatencyKinds; ++k) {
        const std::string stem =
            "latency_" + std::string(to_string(static_cast<LatencyKind>(k)));
        auto it = run.metrics.find(stem);
        if (it == run.metrics.end() || it->second.rows.empty()) continue;
        const CsvTable& table = it->second;
        const std::size_t last = table.rows.size() - 1;
        report.p50_us[static_cast<std::size_t>(k)] = table.integer(last, table.column("p50_us"));
        report.p95_us[static_cast<std::size_t>(k)] = table.integer(last, table.column("p95_us"));
        report.p99_us[static_cast<std::size_t>(k)] = table.integer(last, table.column("p99_us"));
    }
    return report;
}

namespace {

struct Accumulator {
    std::vector<double> throughput;
    std::vector<double> p99;
};

std::vector<ScalingRow> to_rows(std::map<std::int64_t, Accumulator>& groups) {
    std::vector<ScalingRow> rows;
    for (auto& [x, acc] : groups) {
        ScalingRow row;
        row.x = static_cast<double>(x);
        row.n = static_cast<int>(acc.throughput.size());
        const auto n = static_cast<double>(acc.throughput.size());
        double tp_sum = 0;
        double p99_sum = 0;
        for (double v : acc.throughput) tp_sum += v;
        for (double v : acc.p99) p99_sum += v;
        row.throughput_mean_eps = tp_sum / n;
        row.p99_mean_us = p99_sum / n;
        if (acc.throughput.size() > 1) {
            double tp_var = 0;
            double p99_var = 0;
            for (double v : acc.throughput) {
                tp_var += (v - row.throughput_mean_eps) * (v - row.throughput_mean_eps);
            }
            for (double v : acc.p99) {
                p99_var += (v - row.p99_mean_us) * (v - row.p99_mean_us);
            }
            row.throughput_stddev_eps = std::sqrt(tp_var / (n - 1));
            row.p99_stddev_us = std::sqrt(p99_var / (n - 1));
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace

ScalingTables aggregate(const std::vector<RunReport>& reports) {
    std::map<std::int64_t, Accumulator> by_rate;
    std::map<std::int64_t, Accumulator> by_par;
    for (const RunReport& r : reports) {
        auto& rate_acc = by_rate[r.rate_eps];
        rate_acc.throughput.push_back(r.mean_eps[static_cast<std::size_t>(TapId::kBrokerIn)]);
        rate_acc.p99.push_back(
            static_cast<double>(r.p99_us[static_cast<std::size_t>(LatencyKind::kEndToEnd)]));
        auto& par_acc = by_par[r.parallelism];
        par_acc.throughput.push_back(r.mean_eps[static_cast<std::size_t>(TapId::kBrokerOut)]);
        par_acc.p99.push_back(
            static_cast<double>(r.p99_us[static_cast<std::size_t>(LatencyKind::kEndToEnd)]));
    }
    ScalingTables tables;
    tables.by_rate = to_rows(by_rate);
    tables.by_parallelism = to_rows(by_par);
    return tables;
}

namespace {

CsvTable scaling_csv(const std::vector<ScalingRow>& rows, const std::string& x_name,
                     const std::string& tp_name) {
    CsvTable t;
    t.header = {x_name,
                "n",
                tp_name + "_mean_eps",
                tp_name + "_stddev_eps",
                "end_to_end_p99_mean_us",
                "end_to_end_p99_stddev_us"};
    for (const auto& row : rows) {
        t.rows.push_back({fmt(row.x, "%.0f"), std::to_string(row.n),
                          fmt(row.throughput_mean_eps), fmt(row.throughput_stddev_eps),
                          fmt(row.p99_mean_us), fmt(row.p99_stddev_us)});
    }
    return t;
}

void merge_external(CsvTable& table, const LoadedRun& run) {
    if (run.external.empty()) return;
    const int ts_col = table.column("ts_ms");
    if (ts_col < 0) return;
    for (const auto& [metric, samples] : run.external) {
        table.header.push_back(metric);
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const std::int64_t ts = table.integer(r, ts_col);
            // Nearest external sample within 500 ms, else an empty cell.
            auto it = std::lower_bound(samples.begin(), samples.end(),
                                       std::make_pair(ts, -1e300));
            std::int64_t best_delta = std::numeric_limits<std::int64_t>::max();
            double best_value = 0;
            if (it != samples.end()) {
                best_delta = std::llabs(it->first - ts);
                best_value = it->second;
            }
            if (it != samples.begin()) {
                const auto prev = std::prev(it);
                if (std::llabs(prev->first - ts) < best_delta) {
                    best_delta = std::llabs(prev->first - ts);
                    best_value = prev->second;
                }
            }
            table.rows[r].push_back(best_delta <= 500 ? fmt(best_value, "%.6f") : "");
        }
    }
}

} // namespace

void emit_outputs(const std::vector<RunReport>& reports, const std::vector<LoadedRun>& runs,
                  const ScalingTables& tables, const std::filesystem::path& out_dir,
                  double warmup_fraction) {
    std::filesystem::create_directories(out_dir);

    std::vector<const RunReport*> ordered;
    ordered.reserve(reports.size());
    for (const auto& r : reports) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(),
              [](const RunReport* a, const RunReport* b) { return a->run_id < b->run_id; });

    CsvTable summary;
    summary.header = {"run_id",
                      "pipeline",
                      "pattern",
                      "rate_eps",
                      "parallelism",
                      "rep",
                      "generator_mean_eps",
                      "broker_in_mean_eps",
                      "processor_mean_eps",
                      "broker_out_mean_eps",
                      "broker_in_mean_mbps",
                      "broker_out_mean_mbps",
                      "driver_p50_us",
                      "driver_p95_us",
                      "driver_p99_us",
                      "processing_p50_us",
                      "processing_p95_us",
                      "processing_p99_us",
                      "end_to_end_p50_us",
                      "end_to_end_p95_us",
                      "end_to_end_p99_us",
                      "violations"};
    CsvTable violations_table;
    violations_table.header = {"run_id", "kind", "message"};
    for (const RunReport* r : ordered) {
        summary.rows.push_back(
            {r->run_id,
             r->pipeline,
             r->pattern,
             std::to_string(r->rate_eps),
             std::to_string(r->parallelism),
             std::to_string(r->rep),
             fmt(r->mean_eps[0]),
             fmt(r->mean_eps[1]),
             fmt(r->mean_eps[2]),
             fmt(r->mean_eps[3]),
             fmt(r->mean_mbps[1], "%.6f"),
             fmt(r->mean_mbps[3], "%.6f"),
             std::to_string(r->p50_us[0]),
             std::to_string(r->p95_us[0]),
             std::to_string(r->p99_us[0]),
             std::to_string(r->p50_us[1]),
             std::to_string(r->p95_us[1]),
             std::to_string(r->p99_us[1]),
             std::to_string(r->p50_us[2]),
             std::to_string(r->p95_us[2]),
             std::to_string(r->p99_us[2]),
             std::to_string(r->violations.size())});
        for (const Violation& v : r->violations) {
            violations_table.rows.push_back({r->run_id, v.kind, v.message});
        }
    }
    write_csv(summary, out_dir / "summary.csv");
    write_csv(scaling_csv(tables.by_rate, "rate_eps", "broker_in"),
              out_dir / "scaling_rate.csv");
    write_csv(scaling_csv(tables.by_parallelism, "parallelism", "broker_out"),
              out_dir / "scaling_parallelism.csv");
    if (!violations_table.rows.empty()) {
        write_csv(violations_table, out_dir / "violations.csv");
    }

    for (const LoadedRun& run : runs) {
        const auto ts_dir = out_dir / "timeseries" / run.manifest.run_id;
        std::filesystem::create_directories(ts_dir);
        for (const auto& [stem, table] : run.metrics) {
            CsvTable source = table;
            if (stem == "process") merge_external(source, run);
            const CsvTable trimmed = trim_warmup(source, warmup_fraction);
            write_csv(trimmed, ts_dir / (stem + ".csv"));
        }
    }
}

PostprocessResult postprocess_experiment(const std::filesystem::path& results_dir,
                                         const std::filesystem::path& out_dir) {
    std::vector<std::filesystem::path> run_dirs;
    if (std::filesystem::exists(results_dir / "manifest.json")) {
        run_dirs.push_back(results_dir);
    } else if (std::filesystem::is_directory(results_dir)) {
        for (const auto& entry : std::filesystem::directory_iterator(results_dir)) {
            if (entry.is_directory() &&
                std::filesystem::exists(entry.path() / "manifest.json")) {
                run_dirs.push_back(entry.path());
            }
        }
    }
    if (run_dirs.empty()) {
        throw LoadError("no run directories with a manifest.json under " +
                        results_dir.string());
    }
    std::sort(run_dirs.begin(), run_dirs.end());

    PostprocessResult result;
    std::vector<LoadedRun> runs;
    for (const auto& dir : run_dirs) {
        runs.push_back(load_run(dir));
        result.reports.push_back(build_report(runs.back()));
        result.violation_count += result.reports.back().violations.size();
    }
    result.tables = aggregate(result.reports);
    emit_outputs(result.reports, runs, result.tables, out_dir);
    return result;
}

} // namespace strombench
