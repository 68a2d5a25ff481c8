#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "strombench/config.hpp"
#include "strombench/orchestrator.hpp"
#include "strombench/postprocess.hpp"
#include "strombench/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitEnvironment = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int cmd_validate(const std::string& config_path) {
    strombench::ValidationResult result;
    strombench::load_config_file(config_path, result);
    if (!result.ok()) {
        std::cerr << result.to_string();
        std::cerr << result.errors.size() << " error(s)\n";
        return kExitValidation;
    }
    std::cout << result.to_string();
    std::cout << "ok\n";
    return kExitOk;
}

strombench::ExecutionMode resolve_mode(const std::string& flag,
                                       const strombench::ExecutionEnvironment& env) {
    if (flag == "local") return strombench::ExecutionMode::kLocal;
    if (flag == "slurm-interactive") return strombench::ExecutionMode::kSlurmInteractive;
    if (flag == "slurm-batch") return strombench::ExecutionMode::kSlurmBatch;
    return env.mode;
}

int cmd_run(const std::string& config_path, const std::string& mode_flag, bool dry_run) {
    const std::string text = read_file(config_path);
    const strombench::ExecutionEnvironment env = strombench::detect_environment();

    if (strombench::is_resolved_config(text)) {
        const strombench::ResolvedRunConfig run = strombench::parse_resolved_config(text);
        const strombench::RunOutcome outcome = strombench::execute_run(run);
        std::cout << outcome.run_id << "  " << outcome.status << "  "
                  << outcome.run_dir.string() << "\n";
        if (outcome.status == "failed") {
            std::cerr << outcome.error << "\n";
            return kExitRuntime;
        }
        return kExitOk;
    }

    strombench::ValidationResult result;
    strombench::ExperimentConfig cfg = strombench::load_config_file(config_path, result);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    if (!result.ok()) {
        std::cerr << result.to_string();
        return kExitValidation;
    }

    strombench::ExperimentOptions options;
    options.mode = resolve_mode(mode_flag, env);
    options.dry_run = dry_run;

    if (options.mode == strombench::ExecutionMode::kSlurmInteractive) {
        const auto runs = strombench::expand_experiment_matrix(cfg);
        for (const auto& run : runs) {
            const auto shortfalls = strombench::interactive_guard(run, env);
            if (!shortfalls.empty()) {
                std::cerr << "insufficient allocation for " << run.run_id << ":\n";
                for (const auto& s : shortfalls) std::cerr << "  " << s << "\n";
                return kExitEnvironment;
            }
        }
    }

    strombench::ExperimentSummary summary;
    try {
        summary = strombench::run_experiment(cfg, options);
    } catch (const strombench::ResourceOverCapError& e) {
        std::cerr << "resource request over cap: " << e.what() << "\n";
        return kExitEnvironment;
    }

    if (options.mode == strombench::ExecutionMode::kSlurmBatch) {
        for (const auto& script : summary.scripts) {
            std::cout << (dry_run ? "wrote " : "submitted ") << script.string() << "\n";
        }
        return kExitOk;
    }

    std::cout << "run_id  status\n";
    for (const auto& run : summary.runs) {
        std::cout << run.run_id << "  " << run.status;
        if (!run.error.empty()) std::cout << "  (" << run.error << ")";
        std::cout << "\n";
    }
    return summary.all_ok() ? kExitOk : kExitRuntime;
}

int cmd_emit_sbatch(const std::string& config_path, const std::string& out_dir) {
    strombench::ValidationResult result;
    strombench::ExperimentConfig cfg = strombench::load_config_file(config_path, result);
    if (!result.ok()) {
        std::cerr << result.to_string();
        return kExitValidation;
    }
    const auto runs = strombench::expand_experiment_matrix(cfg);
    std::filesystem::create_directories(out_dir);
    std::size_t index = 0;
    for (const auto& run : runs) {
        strombench::ResourceRequest request;
        try {
            request = strombench::compute_resources(run);
        } catch (const strombench::ResourceOverCapError& e) {
            std::cerr << run.run_id << ": " << e.what() << "\n";
            return kExitEnvironment;
        }
        const std::filesystem::path script_path =
            std::filesystem::path(out_dir) / (run.run_id + ".sbatch");
        std::ofstream script(script_path, std::ios::trunc);
        script << strombench::emit_sbatch(run, request, index > 0);
        std::ofstream resolved(std::filesystem::path(out_dir) / (run.run_id + ".resolved.yaml"),
                               std::ios::trunc);
        resolved << strombench::resolved_config_yaml(run);
        std::cout << "wrote " << script_path.string() << "\n";
        ++index;
    }
    return kExitOk;
}

int cmd_postprocess(const std::string& results_dir, std::string out_dir) {
    if (out_dir.empty()) {
        out_dir = (std::filesystem::path(results_dir) / "postprocess").string();
    }
    const strombench::PostprocessResult result =
        strombench::postprocess_experiment(results_dir, out_dir);
    std::cout << result.reports.size() << " run(s) -> " << out_dir << "\n";
    if (result.violation_count > 0) {
        std::cerr << result.violation_count << " validation violation(s); see violations.csv\n";
        return kExitRuntime;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"strombench - stream processing benchmark harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::string mode_flag = "auto";
    bool dry_run = false;
    std::string out_dir;
    std::string results_dir;

    CLI::App* validate = app.add_subcommand("validate", "check a configuration file");
    validate->add_option("--config", config_path, "configuration file")->required();

    CLI::App* run = app.add_subcommand("run", "execute the experiment matrix");
    run->add_option("--config", config_path, "configuration file (or a resolved run)")
        ->required();
    run->add_option("--mode", mode_flag, "auto|local|slurm-interactive|slurm-batch")
        ->check(CLI::IsMember({"auto", "local", "slurm-interactive", "slurm-batch"}));
    run->add_flag("--dry-run", dry_run, "batch mode: write sbatch scripts, do not submit");

    CLI::App* emit = app.add_subcommand("emit-sbatch", "write sbatch scripts for the matrix");
    emit->add_option("--config", config_path, "configuration file")->required();
    emit->add_option("--out", out_dir, "output directory")->required();

    CLI::App* post = app.add_subcommand("postprocess", "aggregate and validate run metrics");
    post->add_option("--results", results_dir, "experiment results directory")->required();
    post->add_option("--out", out_dir, "output directory (default <results>/postprocess)");

    app.add_subcommand("version", "print the harness version");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(config_path);
        if (run->parsed()) return cmd_run(config_path, mode_flag, dry_run);
        if (emit->parsed()) return cmd_emit_sbatch(config_path, out_dir);
        if (post->parsed()) return cmd_postprocess(results_dir, out_dir);
        std::cout << "strombench " << strombench::kVersion << "\n";
        return kExitOk;
    } catch (const strombench::LoadError& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitRuntime;
    }
}
