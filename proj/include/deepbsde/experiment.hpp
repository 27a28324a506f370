#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deepbsde/checkpoint.hpp"
#include "deepbsde/gradcheck.hpp"
#include "deepbsde/oracles.hpp"
#include "deepbsde/registry.hpp"
#include "deepbsde/solver.hpp"

namespace deepbsde {

struct OutputOptions {
    std::string dir = "results";
    std::string prefix = "experiment";
    bool save_checkpoint = false;
    bool verbose = false;
};

struct ReferenceOptions {
    // auto: use the reference attached to the problem instance, if any.
    // oracle: compute one (hjb_reference for hjb_lqg, linear_fk otherwise).
    enum class Mode { auto_mode, stored, oracle, value, none };
    Mode mode = Mode::auto_mode;
    double value = 0.0;
    std::uint64_t samples = 1000000;
    std::uint64_t seed = 9001;
};

struct OracleOptions {
    std::string kind;  // "hjb", "linear_fk", "stored", "gobet_exact"
    std::uint64_t samples = 1000000;
    std::uint64_t seed = 9001;
};

struct RegionOptions {
    bool enabled = false;
    double halfwidth = 1.0;
};

struct SweepParameter {
    std::string path;  // dot-separated location in the config, e.g. "problem.lambda"
    std::vector<nlohmann::json> values;
};

struct ExperimentConfig {
    nlohmann::json raw;
    std::string problem_id;
    nlohmann::json problem_params;
    std::size_t grid_N = 20;
    NetConfig net;
    TrainConfig train;
    RegionOptions region;
    ReferenceOptions reference;
    OracleOptions oracle;
    std::vector<SweepParameter> sweep;
    OutputOptions output;
};

namespace detail {

template <typename T>
T json_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

inline NetConfig parse_net(const nlohmann::json& j) {
    NetConfig c;
    c.hidden_layers = json_or<std::size_t>(j, "hidden_layers", c.hidden_layers);
    c.hidden_width = json_or<std::size_t>(j, "hidden_width", c.hidden_width);
    std::string style = json_or<std::string>(j, "style", "plain");
    require(style == "plain" || style == "residual", "config: net.style must be plain or residual");
    c.style = style == "residual" ? NetStyle::residual : NetStyle::plain;
    c.bn_epsilon = json_or(j, "bn_epsilon", c.bn_epsilon);
    c.bn_momentum = json_or(j, "bn_momentum", c.bn_momentum);
    c.input_bn = json_or(j, "input_bn", c.input_bn);
    c.output_gamma_init = json_or(j, "output_gamma_init", c.output_gamma_init);
    std::string init = json_or<std::string>(j, "init", "xavier_uniform");
    require(init == "xavier_uniform" || init == "xavier_normal",
            "config: net.init must be xavier_uniform or xavier_normal");
    c.init = init == "xavier_normal" ? WeightInit::xavier_normal : WeightInit::xavier_uniform;
    return c;
}

inline TrainConfig parse_train(const nlohmann::json& j) {
    TrainConfig c;
    c.batch_size = json_or<std::size_t>(j, "batch_size", c.batch_size);
    c.iterations = json_or<std::size_t>(j, "iterations", c.iterations);
    c.eval_every = json_or<std::size_t>(j, "eval_every", c.eval_every);
    c.runs = json_or<std::size_t>(j, "runs", c.runs);
    c.seed = json_or<std::uint64_t>(j, "seed", c.seed);
    c.z0_init_halfwidth = json_or(j, "z0_init_halfwidth", c.z0_init_halfwidth);
    c.divergence_threshold = json_or(j, "divergence_threshold", c.divergence_threshold);
    c.record_wall_time = json_or(j, "record_wall_time", c.record_wall_time);
    c.parallel_runs = json_or(j, "parallel_runs", c.parallel_runs);
    if (j.contains("lr_schedule")) {
        c.lr_schedule.clear();
        for (const auto& stage : j.at("lr_schedule")) {
            require(stage.is_array() && stage.size() == 2,
                    "config: lr_schedule entries must be [start_iteration, rate] pairs");
            c.lr_schedule.push_back(
                {stage.at(0).get<std::size_t>(), stage.at(1).get<double>()});
        }
    }
    if (j.contains("u0_init")) {
        const auto& b = j.at("u0_init");
        require(b.is_array() && b.size() == 2, "config: u0_init must be [low, high]");
        c.u0_init = std::make_pair(b.at(0).get<double>(), b.at(1).get<double>());
    }
    return c;
}

inline ReferenceOptions parse_reference(const nlohmann::json& j) {
    ReferenceOptions r;
    std::string mode = json_or<std::string>(j, "mode", "auto");
    if (mode == "auto")
        r.mode = ReferenceOptions::Mode::auto_mode;
    else if (mode == "stored")
        r.mode = ReferenceOptions::Mode::stored;
    else if (mode == "oracle")
        r.mode = ReferenceOptions::Mode::oracle;
    else if (mode == "value")
        r.mode = ReferenceOptions::Mode::value;
    else if (mode == "none")
        r.mode = ReferenceOptions::Mode::none;
    else
        throw ConfigError("config: reference.mode must be auto|stored|oracle|value|none");
    r.value = json_or(j, "value", 0.0);
    r.samples = json_or<std::uint64_t>(j, "samples", r.samples);
    r.seed = json_or<std::uint64_t>(j, "seed", r.seed);
    if (r.mode == ReferenceOptions::Mode::value)
        require(j.contains("value"), "config: reference.mode=value requires reference.value");
    return r;
}

inline void apply_override(nlohmann::json& root, const std::string& path,
                           const nlohmann::json& value) {
    nlohmann::json* node = &root;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    require(!parts.empty(), "sweep: empty parameter path");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = value;
}

}  // namespace detail

inline ExperimentConfig parse_experiment(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.raw = j;
    require(j.contains("problem"), "config: missing 'problem' section");
    const auto& p = j.at("problem");
    require(p.contains("id"), "config: missing problem.id");
    cfg.problem_id = p.at("id").get<std::string>();
    cfg.problem_params = p;
    cfg.problem_params.erase("id");

    const auto grid = j.contains("grid") ? j.at("grid") : nlohmann::json::object();
    cfg.grid_N = detail::json_or<std::size_t>(grid, "N", 20);
    require(cfg.grid_N >= 1, "config: grid.N must be >= 1");
    if (grid.contains("T")) cfg.problem_params["T"] = grid.at("T");

    cfg.net = detail::parse_net(j.contains("net") ? j.at("net") : nlohmann::json::object());
    cfg.train = detail::parse_train(j.contains("train") ? j.at("train") : nlohmann::json::object());
    cfg.train.validate();

    if (j.contains("region")) {
        cfg.region.enabled = detail::json_or(j.at("region"), "enabled", false);
        cfg.region.halfwidth = detail::json_or(j.at("region"), "halfwidth", 1.0);
        require(cfg.region.halfwidth > 0.0, "config: region.halfwidth must be > 0");
    }
    cfg.reference = detail::parse_reference(j.contains("reference") ? j.at("reference")
                                                                    : nlohmann::json::object());
    if (j.contains("oracle")) {
        const auto& o = j.at("oracle");
        cfg.oracle.kind = detail::json_or<std::string>(o, "kind", "");
        cfg.oracle.samples = detail::json_or<std::uint64_t>(o, "samples", cfg.oracle.samples);
        cfg.oracle.seed = detail::json_or<std::uint64_t>(o, "seed", cfg.oracle.seed);
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        require(s.contains("parameters") && s.at("parameters").is_array() &&
                    !s.at("parameters").empty(),
                "config: sweep.parameters must be a non-empty array");
        for (const auto& sp : s.at("parameters")) {
            SweepParameter param;
            param.path = sp.at("path").get<std::string>();
            require(sp.contains("values") && sp.at("values").is_array() &&
                        !sp.at("values").empty(),
                    "config: sweep parameter '" + param.path + "' has an empty value list");
            for (const auto& v : sp.at("values")) param.values.push_back(v);
            cfg.sweep.push_back(std::move(param));
        }
    }
    if (j.contains("output")) {
        const auto& o = j.at("output");
        cfg.output.dir = detail::json_or<std::string>(o, "dir", cfg.output.dir);
        cfg.output.prefix = detail::json_or<std::string>(o, "prefix", cfg.output.prefix);
        cfg.output.save_checkpoint = detail::json_or(o, "save_checkpoint", false);
        cfg.output.verbose = detail::json_or(o, "verbose", false);
    }

    // Fail fast on unknown problems and invalid parameters.
    make_problem(cfg.problem_id, cfg.problem_params);
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
    return parse_experiment(j);
}

/// Output directory precedence: explicit CLI override, then the
/// DEEPBSDE_OUTPUT_DIR environment variable, then the config value.
inline std::string resolve_output_dir(const ExperimentConfig& cfg,
                                      const std::string& cli_override = "") {
    if (!cli_override.empty()) return cli_override;
    if (const char* env = std::getenv("DEEPBSDE_OUTPUT_DIR"); env && *env) return env;
    return cfg.output.dir;
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
}

inline std::string csv_path(const std::string& dir, const std::string& prefix, std::size_t run) {
    return dir + "/" + prefix + "_run" + std::to_string(run) + ".csv";
}

inline void write_run_csv(const std::string& path, const RunResult& rr) {
    std::ofstream out(path);
    require(static_cast<bool>(out), "cannot open " + path + " for writing");
    out << "iteration,loss,u0,relative_error,elapsed_s\n";
    for (const auto& rec : rr.records)
        out << rec.iteration << ',' << format_g17(rec.loss) << ',' << format_g17(rec.u0) << ','
            << format_g17(rec.relative_error) << ',' << format_g17(rec.elapsed_s) << '\n';
    require(static_cast<bool>(out), "write failed for " + path);
}

inline nlohmann::json summary_to_json(const ExperimentConfig& cfg, const RunSummary& summary,
                                      const std::optional<ReferenceValue>& reference) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["problem_id"] = cfg.problem_id;
    j["problem_params"] = cfg.problem_params;
    j["grid"] = {{"N", cfg.grid_N}};
    j["region"] = {{"enabled", cfg.region.enabled}, {"halfwidth", cfg.region.halfwidth}};
    j["net"] = net_config_to_json(cfg.net);
    j["train"] = {
        {"batch_size", cfg.train.batch_size}, {"iterations", cfg.train.iterations},
        {"eval_every", cfg.train.eval_every}, {"runs", cfg.train.runs},
        {"seed", cfg.train.seed},
    };
    if (reference)
        j["reference"] = {{"value", reference->value},
                          {"provenance", to_string(reference->provenance)},
                          {"citation", reference->citation}};
    else
        j["reference"] = nullptr;
    j["runs"] = nlohmann::json::array();
    for (const auto& rr : summary.runs)
        j["runs"].push_back({{"run", rr.run_index},
                             {"final_u0", rr.final_u0},
                             {"final_loss", rr.final_loss},
                             {"final_relative_error", rr.final_relative_error},
                             {"runtime_seconds", rr.runtime_seconds},
                             {"iterations_logged", rr.records.size()}});
    j["aggregate"] = {{"u0_mean", summary.u0_mean},
                      {"u0_std", summary.u0_std},
                      {"relative_error_mean", summary.relative_error_mean},
                      {"relative_error_std", summary.relative_error_std},
                      {"runtime_seconds_mean", summary.runtime_seconds_mean}};
    return j;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    require(static_cast<bool>(out), "cannot open " + path + " for writing");
    out << j.dump(1) << "\n";
    require(static_cast<bool>(out), "write failed for " + path);
}

}  // namespace detail

/// Resolves the reference value the trainer logs errors against; may run a
/// Monte Carlo oracle. Returns nullopt when no reference applies.
inline std::optional<ReferenceValue> resolve_reference(const ExperimentConfig& cfg,
                                                       const ProblemSpec& spec) {
    using Mode = ReferenceOptions::Mode;
    switch (cfg.reference.mode) {
        case Mode::none:
            return std::nullopt;
        case Mode::value:
            return ReferenceValue{cfg.reference.value, ReferenceValue::Provenance::closed_form_mc,
                                  "value supplied in config"};
        case Mode::stored:
            return stored_reference(cfg.problem_id);
        case Mode::auto_mode:
            return spec.reference;
        case Mode::oracle: {
            RngStream rng = make_rng(cfg.reference.seed, 0);
            if (cfg.problem_id == "hjb_lqg") {
                double lambda = detail::json_or(cfg.problem_params, "lambda", 1.0);
                McEstimate est = hjb_reference(spec.dim, lambda, spec.horizon, spec.terminal,
                                               spec.start_point, cfg.reference.samples, rng);
                return ReferenceValue{est.value, ReferenceValue::Provenance::closed_form_mc,
                                      "log-transform MC oracle, " +
                                          std::to_string(cfg.reference.samples) + " samples"};
            }
            McEstimate est = linear_fk_reference(spec, cfg.reference.samples, rng);
            return ReferenceValue{est.value, ReferenceValue::Provenance::closed_form_mc,
                                  "linear Feynman-Kac MC oracle, " +
                                      std::to_string(cfg.reference.samples) + " samples"};
        }
    }
    return std::nullopt;
}

struct RunOutput {
    RunSummary summary;
    std::vector<std::string> csv_paths;
    std::string summary_path;
};

/// Executes one training experiment end to end and writes one CSV per run
/// plus an aggregate summary JSON.
inline RunOutput cmd_run(const ExperimentConfig& cfg, const std::string& out_dir_override = "") {
    ProblemSpec spec = make_problem(cfg.problem_id, cfg.problem_params);
    std::optional<ReferenceValue> reference = resolve_reference(cfg, spec);

    TrainConfig train_cfg = cfg.train;
    if (reference) train_cfg.reference_override = reference->value;

    TimeGrid grid = make_grid(cfg.grid_N, spec.horizon);
    NetConfig net_cfg = cfg.net;

    std::pair<ModelParams, RunSummary> result = [&]() {
        if (cfg.region.enabled) {
            double half = cfg.region.halfwidth;
            std::vector<double> center = spec.start_point;
            RegionSampler sampler = [half, center](RngStream& rng, DenseTensor& x0) {
                for (std::size_t i = 0; i < x0.rows(); ++i)
                    for (std::size_t j = 0; j < x0.cols(); ++j)
                        x0.at(i, j) = center[j] + rng.next_uniform(-half, half);
            };
            return train_region_mode(spec, sampler, grid, net_cfg, train_cfg);
        }
        return train(spec, grid, net_cfg, train_cfg);
    }();

    const std::string dir = resolve_output_dir(cfg, out_dir_override);
    detail::ensure_dir(dir);

    RunOutput out;
    out.summary = std::move(result.second);
    for (const auto& rr : out.summary.runs) {
        std::string path = detail::csv_path(dir, cfg.output.prefix, rr.run_index);
        detail::write_run_csv(path, rr);
        out.csv_paths.push_back(path);
    }
    out.summary_path = dir + "/" + cfg.output.prefix + "_summary.json";
    detail::write_json(out.summary_path, detail::summary_to_json(cfg, out.summary, reference));

    if (cfg.output.save_checkpoint) {
        NetConfig saved = net_cfg;
        if (saved.input_dim == 0) saved.input_dim = spec.dim;
        if (saved.output_dim == 0) saved.output_dim = spec.dim;
        save_checkpoint(dir + "/" + cfg.output.prefix + "_checkpoint.json", result.first, saved);
    }
    return out;
}

struct OracleOutput {
    nlohmann::json json;
    std::string path;
};

/// Runs the oracle selected by config (or inferred from the problem) and
/// writes its JSON export.
inline OracleOutput cmd_oracle(const ExperimentConfig& cfg, const std::string& out_dir_override = "") {
    ProblemSpec spec = make_problem(cfg.problem_id, cfg.problem_params);
    std::string kind = cfg.oracle.kind;
    if (kind.empty()) {
        if (cfg.problem_id == "hjb_lqg")
            kind = "hjb";
        else if (spec.linear_rate)
            kind = "linear_fk";
        else if (cfg.problem_id == "gobet")
            kind = "gobet_exact";
        else
            kind = "stored";
    }

    nlohmann::json j;
    j["problem_id"] = cfg.problem_id;
    j["kind"] = kind;
    if (kind == "hjb") {
        require(cfg.problem_id == "hjb_lqg", "oracle kind 'hjb' requires problem hjb_lqg");
        double lambda = detail::json_or(cfg.problem_params, "lambda", 1.0);
        RngStream rng = make_rng(cfg.oracle.seed, 0);
        McEstimate est = hjb_reference(spec.dim, lambda, spec.horizon, spec.terminal,
                                       spec.start_point, cfg.oracle.samples, rng);
        j["value"] = est.value;
        j["std_error"] = est.std_error;
        j["samples"] = est.samples;
        j["seed"] = cfg.oracle.seed;
    } else if (kind == "linear_fk") {
        RngStream rng = make_rng(cfg.oracle.seed, 0);
        McEstimate est = linear_fk_reference(spec, cfg.oracle.samples, rng);
        j["value"] = est.value;
        j["std_error"] = est.std_error;
        j["samples"] = est.samples;
        j["seed"] = cfg.oracle.seed;
    } else if (kind == "gobet_exact") {
        require(spec.reference.has_value(), "gobet_exact oracle requires an exact reference");
        j["value"] = spec.reference->value;
        j["std_error"] = 0.0;
        j["samples"] = 0;
        j["provenance"] = to_string(spec.reference->provenance);
        j["citation"] = spec.reference->citation;
    } else if (kind == "stored") {
        ReferenceValue ref = stored_reference(cfg.problem_id);
        j["value"] = ref.value;
        j["std_error"] = 0.0;
        j["samples"] = 0;
        j["provenance"] = to_string(ref.provenance);
        j["citation"] = ref.citation;
    } else {
        throw ConfigError("unknown oracle kind '" + kind +
                          "' (expected hjb, linear_fk, gobet_exact, or stored)");
    }

    const std::string dir = resolve_output_dir(cfg, out_dir_override);
    detail::ensure_dir(dir);
    OracleOutput out;
    out.json = std::move(j);
    out.path = dir + "/" + cfg.output.prefix + "_oracle.json";
    detail::write_json(out.path, out.json);
    return out;
}

struct SweepOutput {
    std::string csv_path;
    std::vector<RunOutput> points;
};

/// Cartesian sweep over the declared parameter lists; each grid point is a
/// full cmd_run, and one combined CSV collects the aggregates.
inline SweepOutput cmd_sweep(const ExperimentConfig& cfg, const std::string& out_dir_override = "") {
    require(!cfg.sweep.empty(), "sweep: config declares no sweep parameters");

    std::vector<std::size_t> index(cfg.sweep.size(), 0);
    const std::string dir = resolve_output_dir(cfg, out_dir_override);
    detail::ensure_dir(dir);

    std::ofstream csv(dir + "/" + cfg.output.prefix + "_sweep.csv");
    require(static_cast<bool>(csv), "cannot open sweep CSV for writing");
    for (const auto& p : cfg.sweep) csv << p.path << ',';
    csv << "u0_mean,u0_std,relative_error_mean,relative_error_std,final_loss_mean\n";

    SweepOutput out;
    out.csv_path = dir + "/" + cfg.output.prefix + "_sweep.csv";
    std::size_t point = 0;
    while (true) {
        nlohmann::json raw = cfg.raw;
        raw.erase("sweep");
        for (std::size_t k = 0; k < cfg.sweep.size(); ++k)
            detail::apply_override(raw, cfg.sweep[k].path, cfg.sweep[k].values[index[k]]);
        ExperimentConfig point_cfg = parse_experiment(raw);
        point_cfg.output.prefix = cfg.output.prefix + "_point" + std::to_string(point);

        RunOutput run = cmd_run(point_cfg, dir);
        double loss_mean = 0.0;
        for (const auto& rr : run.summary.runs) loss_mean += rr.final_loss;
        loss_mean /= static_cast<double>(run.summary.runs.size());

        for (std::size_t k = 0; k < cfg.sweep.size(); ++k) {
            const auto& v = cfg.sweep[k].values[index[k]];
            if (v.is_number())
                csv << format_g17(v.get<double>()) << ',';
            else
                csv << v.dump() << ',';
        }
        csv << format_g17(run.summary.u0_mean) << ',' << format_g17(run.summary.u0_std) << ','
            << format_g17(run.summary.relative_error_mean) << ','
            << format_g17(run.summary.relative_error_std) << ',' << format_g17(loss_mean) << '\n';
        out.points.push_back(std::move(run));

        ++point;
        std::size_t k = cfg.sweep.size();
        while (k-- > 0) {
            if (++index[k] < cfg.sweep[k].values.size()) break;
            index[k] = 0;
            if (k == 0) {
                require(static_cast<bool>(csv), "write failed for sweep CSV");
                return out;
            }
        }
    }
}

}  // namespace deepbsde
