#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "deepbsde/experiment.hpp"
#include "deepbsde/gradcheck.hpp"
#include "deepbsde/registry.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

void print_summary(const deepbsde::RunSummary& s) {
    using deepbsde::format_g17;
    std::printf("runs: %zu\n", s.runs.size());
    std::printf("u0 mean: %s  (std %s)\n", format_g17(s.u0_mean).c_str(),
                format_g17(s.u0_std).c_str());
    if (s.reference_value) {
        std::printf("reference: %s\n", format_g17(*s.reference_value).c_str());
        std::printf("relative error mean: %s  (std %s)\n",
                    format_g17(s.relative_error_mean).c_str(),
                    format_g17(s.relative_error_std).c_str());
    }
    std::printf("runtime mean: %.1fs\n", s.runtime_seconds_mean);
}

int run_command(const std::string& config_path, const std::string& output_dir, bool parallel,
                bool quiet) {
    deepbsde::ExperimentConfig cfg = deepbsde::load_experiment_config(config_path);
    if (parallel) cfg.train.parallel_runs = true;
    if (!quiet && cfg.output.verbose)
        cfg.train.on_record = [](std::size_t run, const deepbsde::IterationRecord& rec) {
            std::printf("run %zu  it %6zu  loss %-14.6g  u0 %.10g\n", run, rec.iteration, rec.loss,
                        rec.u0);
            std::fflush(stdout);
        };
    deepbsde::RunOutput out = deepbsde::cmd_run(cfg, output_dir);
    print_summary(out.summary);
    for (const auto& p : out.csv_paths) std::printf("wrote %s\n", p.c_str());
    std::printf("wrote %s\n", out.summary_path.c_str());
    return kExitOk;
}

int oracle_command(const std::string& config_path, const std::string& output_dir) {
    deepbsde::ExperimentConfig cfg = deepbsde::load_experiment_config(config_path);
    deepbsde::OracleOutput out = deepbsde::cmd_oracle(cfg, output_dir);
    std::printf("%s\n", out.json.dump(1).c_str());
    std::printf("wrote %s\n", out.path.c_str());
    return kExitOk;
}

int sweep_command(const std::string& config_path, const std::string& output_dir, bool parallel,
                  bool quiet) {
    deepbsde::ExperimentConfig cfg = deepbsde::load_experiment_config(config_path);
    if (parallel) cfg.train.parallel_runs = true;
    if (!quiet && cfg.output.verbose)
        cfg.train.on_record = [](std::size_t run, const deepbsde::IterationRecord& rec) {
            std::printf("run %zu  it %6zu  loss %-14.6g  u0 %.10g\n", run, rec.iteration, rec.loss,
                        rec.u0);
            std::fflush(stdout);
        };
    deepbsde::SweepOutput out = deepbsde::cmd_sweep(cfg, output_dir);
    std::printf("grid points: %zu\n", out.points.size());
    std::printf("wrote %s\n", out.csv_path.c_str());
    return kExitOk;
}

int gradcheck_command(const deepbsde::GradcheckOptions& opt) {
    deepbsde::GradcheckReport report = deepbsde::run_gradcheck(opt);
    for (const auto& inst : report.instances)
        std::printf("%-40s max rel err %.3e  (%s)\n", inst.label.c_str(), inst.max_rel_error,
                    inst.worst_tensor.c_str());
    std::printf("gradcheck: %zu instances, max relative error %.3e, tolerance %.1e: %s\n",
                report.instances.size(), report.max_rel_error, report.options.tolerance,
                report.passed() ? "PASS" : "FAIL");
    return report.passed() ? kExitOk : kExitNumerical;
}

int list_command() {
    for (const auto& info : deepbsde::list_problems()) {
        std::printf("%s\n  %s\n  defaults: %s\n", info.id.c_str(), info.description.c_str(),
                    info.defaults.dump().c_str());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deepbsde: deep BSDE solver for semilinear parabolic PDEs"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    bool parallel = false;
    bool quiet = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("-c,--config", config_path, "experiment config (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("-o,--output-dir", output_dir,
                        "output directory (beats DEEPBSDE_OUTPUT_DIR and the config)");
    };

    CLI::App* run = app.add_subcommand("run", "train and write per-iteration CSVs plus a summary");
    add_common(run);
    run->add_flag("--parallel", parallel, "train independent seeds in parallel");
    run->add_flag("-q,--quiet", quiet, "suppress per-iteration progress");

    CLI::App* oracle = app.add_subcommand("oracle", "evaluate a reference oracle");
    add_common(oracle);

    CLI::App* sweep = app.add_subcommand("sweep", "train across a parameter grid");
    add_common(sweep);
    sweep->add_flag("--parallel", parallel, "train independent seeds in parallel");
    sweep->add_flag("-q,--quiet", quiet, "suppress per-iteration progress");

    deepbsde::GradcheckOptions gopt;
    CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference check of the gradients");
    grad->add_option("--trials", gopt.trials, "randomized instances to draw");
    grad->add_option("--max-dim", gopt.max_dim, "largest state dimension");
    grad->add_option("--max-steps", gopt.max_steps, "largest time step count");
    grad->add_option("--seed", gopt.seed, "base seed");
    grad->add_option("--tolerance", gopt.tolerance, "max allowed relative error");
    grad->add_option("--fd-step", gopt.fd_step, "finite-difference step");

    CLI::App* list = app.add_subcommand("list-problems", "print the problem registry");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) return run_command(config_path, output_dir, parallel, quiet);
        if (oracle->parsed()) return oracle_command(config_path, output_dir);
        if (sweep->parsed()) return sweep_command(config_path, output_dir, parallel, quiet);
        if (grad->parsed()) return gradcheck_command(gopt);
        if (list->parsed()) return list_command();
    } catch (const deepbsde::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const deepbsde::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitOk;
}
