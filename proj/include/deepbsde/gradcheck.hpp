#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "deepbsde/problems.hpp"
#include "deepbsde/solver.hpp"

namespace deepbsde {

struct GradcheckOptions {
    std::size_t trials = 24;
    std::size_t max_dim = 3;    // d ranges over 1..max_dim
    std::size_t max_steps = 4;  // N ranges over 2..max_steps
    std::uint64_t seed = 2024;
    double tolerance = 1e-5;
    double fd_step = 1e-6;
};

struct GradcheckInstanceResult {
    std::string label;
    double max_rel_error = 0.0;
    std::string worst_tensor;
};

struct GradcheckReport {
    GradcheckOptions options;
    std::vector<GradcheckInstanceResult> instances;
    double max_rel_error = 0.0;

    bool passed() const { return max_rel_error <= options.tolerance; }
};

/// Test seam: mutates the analytic gradients before they are compared, so a
/// deliberately corrupted backward pass is provably caught by the check.
using GradMutationHook = std::function<void(const std::vector<TensorRef>&)>;

namespace detail {

inline ProblemSpec gradcheck_problem(std::size_t which, std::size_t d) {
    switch (which % 4) {
        case 0: return hjb_lqg(d, 1.3, 0.9);
        case 1: return allen_cahn(d, 0.4);
        case 2: return bs_default_risk(d, DefaultRiskParams{}, 0.7, 100.0);
        default: return gobet_oscillating(d, 1.6, 0.3, 0.8);
    }
}

}  // namespace detail

/// Central finite-difference validation of backward_rollout on randomized
/// small instances cycling through all four benchmark generators, both net
/// styles, and both start-point modes. Relative error uses
/// |a - b| / max(1, |a|, |b|) per coordinate.
inline GradcheckReport run_gradcheck(const GradcheckOptions& opt,
                                     const GradMutationHook& hook = nullptr) {
    require(opt.trials >= 1, "gradcheck: trials must be >= 1");
    require(opt.max_dim >= 1, "gradcheck: max_dim must be >= 1");
    require(opt.max_steps >= 2, "gradcheck: max_steps must be >= 2");
    require(opt.fd_step > 0.0, "gradcheck: fd_step must be > 0");

    GradcheckReport report;
    report.options = opt;

    for (std::size_t trial = 0; trial < opt.trials; ++trial) {
        const std::size_t d = 1 + (trial / 4) % opt.max_dim;
        const std::size_t N = 2 + trial % (opt.max_steps - 1);
        const std::size_t H = trial % 3;
        const std::size_t B = (trial % 2) ? 4 : 2;
        const bool residual = (trial % 3) == 1;
        const bool region = (trial % 8) == 7;

        ProblemSpec spec = detail::gradcheck_problem(trial, d);
        TimeGrid grid = make_grid(N, spec.horizon);
        NetConfig cfg;
        cfg.input_dim = d;
        cfg.output_dim = d;
        cfg.hidden_layers = H;
        cfg.hidden_width = residual ? d : 5;
        cfg.style = residual ? NetStyle::residual : NetStyle::plain;

        RngStream init_rng = make_rng(opt.seed, 1000 + 3 * trial);
        RngStream path_rng = make_rng(opt.seed, 1000 + 3 * trial + 1);
        RngStream region_rng = make_rng(opt.seed, 1000 + 3 * trial + 2);
        ModelParams params =
            init_model(spec, grid, cfg, region, spec.u0_bracket, 0.1, init_rng);

        const DenseTensor* x0 = nullptr;
        DenseTensor x0_batch;
        if (region) {
            x0_batch = DenseTensor::matrix(B, d);
            double half = 0.1 * (std::abs(spec.start_point[0]) + 1.0);
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    x0_batch.at(i, j) =
                        spec.start_point[j] + region_rng.next_uniform(-half, half);
            x0 = &x0_batch;
        }
        PathBatch paths = sample_paths(spec, grid, B, path_rng, x0);

        RolloutResult roll = rollout(spec, grid, params, paths);
        ModelParams grads = backward_rollout(spec, grid, params, paths, roll);
        auto grad_refs = trainable_tensors(grads);
        if (hook) hook(grad_refs);

        auto param_refs = trainable_tensors(params);
        GradcheckInstanceResult res;
        res.label = spec.id + " d=" + std::to_string(d) + " N=" + std::to_string(N) + " H=" +
                    std::to_string(H) + " B=" + std::to_string(B) +
                    (residual ? " residual" : " plain") + (region ? " region" : "");

        const double h = opt.fd_step;
        for (std::size_t k = 0; k < param_refs.size(); ++k) {
            DenseTensor& t = *param_refs[k].tensor;
            const DenseTensor& g = *grad_refs[k].tensor;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double saved = t[i];
                t[i] = saved + h;
                double lp = rollout(spec, grid, params, paths).loss;
                t[i] = saved - h;
                double lm = rollout(spec, grid, params, paths).loss;
                t[i] = saved;
                double fd = (lp - lm) / (2.0 * h);
                double rel = std::abs(fd - g[i]) /
                             std::max({1.0, std::abs(fd), std::abs(g[i])});
                if (rel > res.max_rel_error) {
                    res.max_rel_error = rel;
                    res.worst_tensor = param_refs[k].name;
                }
            }
        }
        if (res.max_rel_error > report.max_rel_error) report.max_rel_error = res.max_rel_error;
        report.instances.push_back(std::move(res));
    }
    return report;
}

}  // namespace deepbsde
