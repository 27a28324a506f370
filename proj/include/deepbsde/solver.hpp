#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "deepbsde/adam.hpp"
#include "deepbsde/net.hpp"
#include "deepbsde/problems.hpp"
#include "deepbsde/rng.hpp"

namespace deepbsde {

/// Equidistant grid 0 = t_0 < t_1 < ... < t_N = T.
struct TimeGrid {
    std::size_t N = 1;
    double T = 1.0;

    double dt() const { return T / static_cast<double>(N); }
    double t(std::size_t n) const { return T * static_cast<double>(n) / static_cast<double>(N); }
};

inline TimeGrid make_grid(std::size_t N, double T) {
    require(N >= 1, "TimeGrid: N must be >= 1");
    require(T > 0.0, "TimeGrid: T must be > 0");
    return TimeGrid{N, T};
}

/// All trainable state of the model. In point mode the value and scaled
/// gradient at (0, xi) are free parameters u0 and z0; in region mode they
/// are replaced by two networks evaluated at the sampled start points.
struct ModelParams {
    DenseTensor u0{std::vector<std::size_t>{1}, 0.0};
    DenseTensor z0{std::vector<std::size_t>{1}, 0.0};
    std::vector<SubNetParams> subnets;  // one per interior grid time t_1 .. t_{N-1}
    bool region_mode = false;
    SubNetParams u_net, z_net;
};

template <typename Fn>
void visit_trainable(ModelParams& p, Fn&& fn) {
    if (p.region_mode) {
        visit_trainable(p.u_net, "u_net/", fn);
        visit_trainable(p.z_net, "z_net/", fn);
    } else {
        fn(TensorRef{"u0", &p.u0});
        fn(TensorRef{"z0", &p.z0});
    }
    for (std::size_t n = 0; n < p.subnets.size(); ++n)
        visit_trainable(p.subnets[n], "subnet" + std::to_string(n + 1) + "/", fn);
}

template <typename Fn>
void visit_all(ModelParams& p, Fn&& fn) {
    if (p.region_mode) {
        visit_all(p.u_net, "u_net/", fn);
        visit_all(p.z_net, "z_net/", fn);
    } else {
        fn(TensorRef{"u0", &p.u0});
        fn(TensorRef{"z0", &p.z0});
    }
    for (std::size_t n = 0; n < p.subnets.size(); ++n)
        visit_all(p.subnets[n], "subnet" + std::to_string(n + 1) + "/", fn);
}

inline std::vector<TensorRef> trainable_tensors(ModelParams& p) {
    std::vector<TensorRef> refs;
    visit_trainable(p, [&](const TensorRef& r) { refs.push_back(r); });
    return refs;
}

inline ModelParams zero_like(const ModelParams& p) {
    ModelParams g;
    g.u0 = DenseTensor(p.u0.shape(), 0.0);
    g.z0 = DenseTensor(p.z0.shape(), 0.0);
    g.region_mode = p.region_mode;
    if (p.region_mode) {
        g.u_net = zero_like(p.u_net);
        g.z_net = zero_like(p.z_net);
    }
    g.subnets.reserve(p.subnets.size());
    for (const auto& s : p.subnets) g.subnets.push_back(zero_like(s));
    return g;
}

/// Sampled Euler paths and Brownian increments, stored step-major: X has
/// N+1 tensors of shape B x d, dW has N.
struct PathBatch {
    std::vector<DenseTensor> X;
    std::vector<DenseTensor> dW;
    std::size_t batch = 0;
};

/// Simulates X_{t_{n+1}} = X_{t_n} + mu(t_n, X_{t_n}) dt + sigma(t_n, X_{t_n}) dW_n
/// from the given start rows (defaults to xi broadcast over the batch).
inline PathBatch sample_paths(const ProblemSpec& spec, const TimeGrid& grid, std::size_t B,
                              RngStream& rng, const DenseTensor* x0 = nullptr) {
    require(B >= 1, "sample_paths: batch size must be >= 1");
    const std::size_t d = spec.dim;
    PathBatch pb;
    pb.batch = B;
    pb.X.reserve(grid.N + 1);
    pb.dW.reserve(grid.N);

    DenseTensor X = DenseTensor::matrix(B, d);
    if (x0) {
        require(x0->rank() == 2 && x0->rows() == B && x0->cols() == d,
                "sample_paths: x0 override must be B x d");
        X = *x0;
    } else {
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < d; ++j) X.at(i, j) = spec.start_point[j];
    }
    pb.X.push_back(X);

    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);
    std::vector<double> mu(d), sdw(d);
    for (std::size_t n = 0; n < grid.N; ++n) {
        DenseTensor dW = DenseTensor::matrix(B, d);
        fill_normal(rng, std::span<double>(dW.data(), dW.size()));
        for (std::size_t i = 0; i < dW.size(); ++i) dW[i] *= sqrt_dt;

        const double tn = grid.t(n);
        DenseTensor Xn = pb.X.back();
        DenseTensor Xnext = DenseTensor::matrix(B, d);
        for (std::size_t i = 0; i < B; ++i) {
            std::span<const double> xi(Xn.data() + i * d, d);
            std::span<const double> dwi(dW.data() + i * d, d);
            spec.drift(tn, xi, std::span<double>(mu.data(), d));
            spec.diffusion_apply(tn, xi, dwi, std::span<double>(sdw.data(), d));
            for (std::size_t j = 0; j < d; ++j) {
                double v = xi[j] + mu[j] * dt + sdw[j];
                if (!std::isfinite(v))
                    throw NumericalError("sample_paths: non-finite state at step " +
                                         std::to_string(n) + ", batch index " + std::to_string(i));
                Xnext.at(i, j) = v;
            }
        }
        pb.dW.push_back(std::move(dW));
        pb.X.push_back(std::move(Xnext));
    }
    return pb;
}

/// Everything the backward pass needs from one forward rollout.
struct RolloutResult {
    DenseTensor u;                    // B x (N+1) value trajectory
    std::vector<DenseTensor> z;       // N tensors of B x d
    DenseTensor g_terminal;           // B
    double loss = 0.0;
    std::vector<ForwardCache> caches; // one per sub-network (steps 1..N-1)
    ForwardCache u_net_cache, z_net_cache;
};

/// Forward recursion of the value along sampled paths:
///   u_{n+1} = u_n - f(t_n, X_n, u_n, z_n) dt + <z_n, dW_n>,
/// starting from u0 (or u_net(X_0)) with z_0 = z0 (or z_net(X_0)); interior
/// z_n come from the per-step sub-networks in training mode. The loss is the
/// batch mean of (g(X_T) - u_N)^2.
inline RolloutResult rollout(const ProblemSpec& spec, const TimeGrid& grid, ModelParams& params,
                             const PathBatch& paths) {
    const std::size_t B = paths.batch;
    const std::size_t d = spec.dim;
    const std::size_t N = grid.N;
    require(params.subnets.size() == N - 1, "rollout: expected N-1 sub-networks");
    require(paths.X.size() == N + 1 && paths.dW.size() == N, "rollout: path/grid mismatch");

    RolloutResult r;
    r.u = DenseTensor::matrix(B, N + 1);
    r.z.reserve(N);
    r.caches.resize(params.subnets.size());

    if (params.region_mode) {
        DenseTensor u0b = forward_train(params.u_net, paths.X[0], r.u_net_cache);
        for (std::size_t i = 0; i < B; ++i) r.u.at(i, 0) = u0b[i];
        r.z.push_back(forward_train(params.z_net, paths.X[0], r.z_net_cache));
    } else {
        for (std::size_t i = 0; i < B; ++i) r.u.at(i, 0) = params.u0[0];
        DenseTensor z0b = DenseTensor::matrix(B, d);
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < d; ++j) z0b.at(i, j) = params.z0[j];
        r.z.push_back(std::move(z0b));
    }

    const double dt = grid.dt();
    for (std::size_t n = 0; n < N; ++n) {
        if (n >= 1) r.z.push_back(forward_train(params.subnets[n - 1], paths.X[n], r.caches[n - 1]));
        const DenseTensor& zn = r.z[n];
        const DenseTensor& Xn = paths.X[n];
        const DenseTensor& dWn = paths.dW[n];
        const double tn = grid.t(n);
        for (std::size_t i = 0; i < B; ++i) {
            std::span<const double> xi(Xn.data() + i * d, d);
            std::span<const double> zi(zn.data() + i * d, d);
            double un = r.u.at(i, n);
            double f = spec.generator(tn, xi, un, zi);
            double inc = 0.0;
            for (std::size_t j = 0; j < d; ++j) inc += zi[j] * dWn.at(i, j);
            double next = un - f * dt + inc;
            if (!std::isfinite(next))
                throw NumericalError("rollout: non-finite u at step " + std::to_string(n + 1) +
                                     ", batch index " + std::to_string(i));
            r.u.at(i, n + 1) = next;
        }
    }

    r.g_terminal = DenseTensor::vector(B);
    double loss = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        std::span<const double> xT(paths.X[N].data() + i * d, d);
        double g = spec.terminal(xT);
        if (!std::isfinite(g)) throw NumericalError("rollout: non-finite terminal value");
        r.g_terminal[i] = g;
        double e = g - r.u.at(i, N);
        loss += e * e;
    }
    r.loss = loss / static_cast<double>(B);
    return r;
}

/// Exact gradients of the rollout loss with respect to every trainable
/// tensor. The value recursion is differentiated end to end: with
/// ubar_n = dL/du_n, the chain rule gives
///   ubar_n = ubar_{n+1} (1 - df/dy dt),   dL/dz_n = ubar_{n+1} (dW_n - df/dz dt),
/// seeded by ubar_N = -2 (g(X_T) - u_N) / B.
inline ModelParams backward_rollout(const ProblemSpec& spec, const TimeGrid& grid,
                                    ModelParams& params, const PathBatch& paths,
                                    const RolloutResult& r) {
    require(spec.generator_dy && spec.generator_dz,
            "backward_rollout: problem lacks analytic generator derivatives");
    const std::size_t B = paths.batch;
    const std::size_t d = spec.dim;
    const std::size_t N = grid.N;
    const double dt = grid.dt();

    ModelParams grads = zero_like(params);
    std::vector<double> ubar(B);
    for (std::size_t i = 0; i < B; ++i)
        ubar[i] = -2.0 * (r.g_terminal[i] - r.u.at(i, N)) / static_cast<double>(B);

    std::vector<double> fz(d);
    for (std::size_t n = N; n-- > 0;) {
        const DenseTensor& Xn = paths.X[n];
        const DenseTensor& dWn = paths.dW[n];
        const DenseTensor& zn = r.z[n];
        const double tn = grid.t(n);

        DenseTensor zbar = DenseTensor::matrix(B, d);
        for (std::size_t i = 0; i < B; ++i) {
            std::span<const double> xi(Xn.data() + i * d, d);
            std::span<const double> zi(zn.data() + i * d, d);
            double un = r.u.at(i, n);
            spec.generator_dz(tn, xi, un, zi, std::span<double>(fz.data(), d));
            for (std::size_t j = 0; j < d; ++j)
                zbar.at(i, j) = ubar[i] * (dWn.at(i, j) - fz[j] * dt);
            double fy = spec.generator_dy(tn, xi, un, zi);
            ubar[i] *= 1.0 - fy * dt;
        }

        if (n >= 1) {
            backward(params.subnets[n - 1], r.caches[n - 1], zbar, grads.subnets[n - 1]);
        } else if (params.region_mode) {
            backward(params.z_net, r.z_net_cache, zbar, grads.z_net);
        } else {
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t j = 0; j < d; ++j) grads.z0[j] += zbar.at(i, j);
        }
    }

    if (params.region_mode) {
        DenseTensor ubar0 = DenseTensor::matrix(B, 1);
        for (std::size_t i = 0; i < B; ++i) ubar0.at(i, 0) = ubar[i];
        backward(params.u_net, r.u_net_cache, ubar0, grads.u_net);
    } else {
        double s = 0.0;
        for (std::size_t i = 0; i < B; ++i) s += ubar[i];
        grads.u0[0] += s;
    }
    return grads;
}

struct LrStage {
    std::size_t start_iteration = 0;
    double rate = 0.01;
};

struct IterationRecord;

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t iterations = 2000;
    std::size_t eval_every = 100;
    std::size_t runs = 5;
    std::uint64_t seed = 1;
    std::vector<LrStage> lr_schedule{{0, 0.01}};
    std::optional<std::pair<double, double>> u0_init;  // overrides the problem bracket
    double z0_init_halfwidth = 0.1;
    double divergence_threshold = 1e10;
    bool record_wall_time = false;  // keeps logs byte-deterministic when off
    std::optional<double> reference_override;
    bool parallel_runs = false;
    // Continuation: run r starts from (*warm_start)[r] instead of a fresh
    // initialization. Size must equal `runs`; shapes must match the grid.
    std::shared_ptr<const std::vector<ModelParams>> warm_start;
    // Called as records are produced; invoked from worker threads when
    // parallel_runs is set.
    std::function<void(std::size_t run, const IterationRecord&)> on_record;
    // Receives each run's trained parameters (same threading as on_record).
    std::function<void(std::size_t run, const ModelParams&)> on_final_params;

    void validate() const {
        require(batch_size >= 2, "TrainConfig: batch_size must be >= 2");
        require(iterations >= 1, "TrainConfig: iterations must be >= 1");
        require(eval_every >= 1, "TrainConfig: eval_every must be >= 1");
        require(runs >= 1, "TrainConfig: runs must be >= 1");
        require(!lr_schedule.empty(), "TrainConfig: lr_schedule must be non-empty");
        for (std::size_t k = 0; k < lr_schedule.size(); ++k) {
            require(lr_schedule[k].rate > 0.0, "TrainConfig: learning rates must be > 0");
            if (k > 0)
                require(lr_schedule[k - 1].start_iteration < lr_schedule[k].start_iteration,
                        "TrainConfig: lr_schedule must be sorted by start_iteration");
        }
    }
};

inline double scheduled_lr(const std::vector<LrStage>& schedule, std::size_t iteration) {
    double lr = schedule.front().rate;
    for (const auto& st : schedule)
        if (st.start_iteration <= iteration) lr = st.rate;
    return lr;
}

struct IterationRecord {
    std::size_t iteration = 0;
    double loss = 0.0;
    double u0 = 0.0;
    double relative_error = std::numeric_limits<double>::quiet_NaN();
    double elapsed_s = std::numeric_limits<double>::quiet_NaN();
};

struct RunResult {
    std::size_t run_index = 0;
    std::vector<IterationRecord> records;
    double final_u0 = 0.0;
    double final_loss = 0.0;
    double final_relative_error = std::numeric_limits<double>::quiet_NaN();
    double runtime_seconds = 0.0;
};

struct RunSummary {
    std::vector<RunResult> runs;
    std::optional<double> reference_value;
    double u0_mean = 0.0;
    double u0_std = 0.0;
    double relative_error_mean = std::numeric_limits<double>::quiet_NaN();
    double relative_error_std = std::numeric_limits<double>::quiet_NaN();
    double runtime_seconds_mean = 0.0;
};

using RegionSampler = std::function<void(RngStream&, DenseTensor&)>;

/// Fresh model parameters for one run: u0 uniform in the bracket, z0
/// componentwise uniform in [-z0_halfwidth, z0_halfwidth], sub-networks
/// Xavier-initialized in grid order (region mode draws its two extra
/// networks first instead of the scalars).
inline ModelParams init_model(const ProblemSpec& spec, const TimeGrid& grid,
                              const NetConfig& net_cfg, bool region_mode,
                              std::pair<double, double> u0_bracket, double z0_halfwidth,
                              RngStream& rng) {
    ModelParams params;
    params.region_mode = region_mode;
    if (region_mode) {
        NetConfig ucfg = net_cfg;
        ucfg.output_dim = 1;
        params.u_net = init_subnet(ucfg, rng);
        params.z_net = init_subnet(net_cfg, rng);
    } else {
        params.u0[0] = rng.next_uniform(u0_bracket.first, u0_bracket.second);
        params.z0 = DenseTensor::vector(spec.dim);
        for (std::size_t j = 0; j < spec.dim; ++j)
            params.z0[j] = rng.next_uniform(-z0_halfwidth, z0_halfwidth);
    }
    params.subnets.reserve(grid.N - 1);
    for (std::size_t n = 1; n < grid.N; ++n) params.subnets.push_back(init_subnet(net_cfg, rng));
    return params;
}

namespace detail {

inline double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

struct RunContext {
    const ProblemSpec* spec;
    const TimeGrid* grid;
    NetConfig net_cfg;
    const TrainConfig* cfg;
    const RegionSampler* region;  // null in point mode
    std::optional<double> reference;
};

// Train-mode probe of u_net at the start point, normalized with batch
// statistics from a sampler-drawn batch (row 0 pinned to xi). This matches
// the function training actually optimizes; an eval-mode probe would divide
// by the vanishing moving variance a degenerate (point-mass) sampler
// produces. The stream is taken by value and the network copied, so probing
// has no side effects on the run.
inline double region_probe_u0(const ModelParams& params, const ProblemSpec& spec,
                              const RegionSampler& sampler, RngStream probe_rng,
                              std::size_t batch) {
    const std::size_t B = std::max<std::size_t>(batch, 2);
    DenseTensor x = DenseTensor::matrix(B, spec.dim);
    sampler(probe_rng, x);
    for (std::size_t j = 0; j < spec.dim; ++j) x.at(0, j) = spec.start_point[j];
    SubNetParams u_net = params.u_net;
    ForwardCache cache;
    return forward_train(u_net, x, cache)[0];
}

inline std::pair<ModelParams, RunResult> train_single_run(const RunContext& ctx, std::size_t run) {
    const ProblemSpec& spec = *ctx.spec;
    const TimeGrid& grid = *ctx.grid;
    const TrainConfig& cfg = *ctx.cfg;
    const std::size_t d = spec.dim;

    RngStream init_rng = make_rng(cfg.seed, 3 * run);
    RngStream path_rng = make_rng(cfg.seed, 3 * run + 1);
    RngStream region_rng = make_rng(cfg.seed, 3 * run + 2);

    ModelParams params;
    if (cfg.warm_start) {
        params = (*cfg.warm_start)[run];
    } else {
        auto bracket = cfg.u0_init ? *cfg.u0_init : spec.u0_bracket;
        params = init_model(spec, grid, ctx.net_cfg, ctx.region != nullptr, bracket,
                            cfg.z0_init_halfwidth, init_rng);
    }

    auto param_refs = trainable_tensors(params);
    AdamState adam = init_adam(param_refs);

    RunResult rr;
    rr.run_index = run;
    auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&]() {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    double u0_est = 0.0, loss = 0.0;
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        DenseTensor x0_override;
        const DenseTensor* x0 = nullptr;
        if (params.region_mode) {
            x0_override = DenseTensor::matrix(cfg.batch_size, d);
            (*ctx.region)(region_rng, x0_override);
            x0 = &x0_override;
        }
        PathBatch paths;
        RolloutResult roll;
        try {
            paths = sample_paths(spec, grid, cfg.batch_size, path_rng, x0);
            roll = rollout(spec, grid, params, paths);
        } catch (const NumericalError& e) {
            throw NumericalError("train: run " + std::to_string(run) + ", iteration " +
                                 std::to_string(it) + ": " + e.what());
        }
        loss = roll.loss;
        if (!std::isfinite(loss) || loss > cfg.divergence_threshold)
            throw NumericalError("train: divergence at run " + std::to_string(run) +
                                 ", iteration " + std::to_string(it) +
                                 " (loss = " + format_g17(loss) + ")");

        ModelParams grads = backward_rollout(spec, grid, params, paths, roll);
        auto grad_refs = trainable_tensors(grads);
        adam_step(param_refs, grad_refs, adam, scheduled_lr(cfg.lr_schedule, it));

        if (it % cfg.eval_every == 0 || it + 1 == cfg.iterations) {
            u0_est = params.region_mode
                         ? region_probe_u0(params, spec, *ctx.region, region_rng, cfg.batch_size)
                         : params.u0[0];
            IterationRecord rec;
            rec.iteration = it;
            rec.loss = loss;
            rec.u0 = u0_est;
            if (ctx.reference && *ctx.reference != 0.0)
                rec.relative_error = std::abs(u0_est - *ctx.reference) / std::abs(*ctx.reference);
            if (cfg.record_wall_time) rec.elapsed_s = elapsed();
            if (cfg.on_record) cfg.on_record(run, rec);
            rr.records.push_back(rec);
        }
    }

    rr.final_u0 = params.region_mode
                      ? region_probe_u0(params, spec, *ctx.region, region_rng, cfg.batch_size)
                      : params.u0[0];
    rr.final_loss = loss;
    if (ctx.reference && *ctx.reference != 0.0)
        rr.final_relative_error = std::abs(rr.final_u0 - *ctx.reference) / std::abs(*ctx.reference);
    rr.runtime_seconds = elapsed();
    return {std::move(params), std::move(rr)};
}

inline std::pair<ModelParams, RunSummary> train_impl(const ProblemSpec& spec, const TimeGrid& grid,
                                                     NetConfig net_cfg, const TrainConfig& cfg,
                                                     const RegionSampler* region) {
    cfg.validate();
    require(spec.generator_dy && spec.generator_dz,
            "train: problem lacks analytic generator derivatives");
    require(grid.N >= 1, "train: grid must have at least one step");
    if (net_cfg.input_dim == 0) net_cfg.input_dim = spec.dim;
    if (net_cfg.output_dim == 0) net_cfg.output_dim = spec.dim;
    require(net_cfg.input_dim == spec.dim && net_cfg.output_dim == spec.dim,
            "train: net dimensions must match the problem dimension");
    net_cfg.validate();
    if (cfg.warm_start) {
        require(cfg.warm_start->size() == cfg.runs,
                "train: warm_start must supply one parameter set per run");
        for (const auto& p : *cfg.warm_start) {
            require(p.region_mode == (region != nullptr),
                    "train: warm_start parameters were built for a different start mode");
            require(p.subnets.size() + 1 == grid.N,
                    "train: warm_start parameters do not match the time grid");
        }
    }

    RunContext ctx;
    ctx.spec = &spec;
    ctx.grid = &grid;
    ctx.net_cfg = net_cfg;
    ctx.cfg = &cfg;
    ctx.region = region;
    ctx.reference = cfg.reference_override;
    if (!ctx.reference && spec.reference) ctx.reference = spec.reference->value;

    RunSummary summary;
    summary.reference_value = ctx.reference;
    summary.runs.resize(cfg.runs);
    ModelParams last_params;

    if (cfg.parallel_runs && cfg.runs > 1) {
        std::vector<ModelParams> all_params(cfg.runs);
        std::vector<std::exception_ptr> errors(cfg.runs);
        std::vector<std::thread> workers;
        workers.reserve(cfg.runs);
        for (std::size_t r = 0; r < cfg.runs; ++r)
            workers.emplace_back([&, r]() {
                try {
                    auto [mp, rr] = train_single_run(ctx, r);
                    if (cfg.on_final_params) cfg.on_final_params(r, mp);
                    all_params[r] = std::move(mp);
                    summary.runs[r] = std::move(rr);
                } catch (...) {
                    errors[r] = std::current_exception();
                }
            });
        for (auto& w : workers) w.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
        last_params = std::move(all_params.back());
    } else {
        for (std::size_t r = 0; r < cfg.runs; ++r) {
            auto [mp, rr] = train_single_run(ctx, r);
            if (cfg.on_final_params) cfg.on_final_params(r, mp);
            summary.runs[r] = std::move(rr);
            last_params = std::move(mp);
        }
    }

    std::vector<double> u0s, errs, times;
    for (const auto& rr : summary.runs) {
        u0s.push_back(rr.final_u0);
        times.push_back(rr.runtime_seconds);
        if (std::isfinite(rr.final_relative_error)) errs.push_back(rr.final_relative_error);
    }
    double n = static_cast<double>(u0s.size());
    summary.u0_mean = 0.0;
    for (double v : u0s) summary.u0_mean += v;
    summary.u0_mean /= n;
    summary.u0_std = sample_std(u0s, summary.u0_mean);
    summary.runtime_seconds_mean = 0.0;
    for (double v : times) summary.runtime_seconds_mean += v;
    summary.runtime_seconds_mean /= n;
    if (!errs.empty()) {
        double m = 0.0;
        for (double v : errs) m += v;
        m /= static_cast<double>(errs.size());
        summary.relative_error_mean = m;
        summary.relative_error_std = sample_std(errs, m);
    }
    return {std::move(last_params), std::move(summary)};
}

}  // namespace detail

/// Trains `runs` independent models (fresh seeds, fresh parameters) and
/// aggregates cross-run statistics. Returns the parameters of the last run.
inline std::pair<ModelParams, RunSummary> train(const ProblemSpec& spec, const TimeGrid& grid,
                                                const NetConfig& net_cfg, const TrainConfig& cfg) {
    return detail::train_impl(spec, grid, net_cfg, cfg, nullptr);
}

/// Region-mode training: X_0 is drawn from `sampler` each iteration and the
/// start-point value/gradient come from two additional networks.
inline std::pair<ModelParams, RunSummary> train_region_mode(const ProblemSpec& spec,
                                                            const RegionSampler& sampler,
                                                            const TimeGrid& grid,
                                                            const NetConfig& net_cfg,
                                                            const TrainConfig& cfg) {
    require(static_cast<bool>(sampler), "train_region_mode: sampler is required");
    return detail::train_impl(spec, grid, net_cfg, cfg, &sampler);
}

}  // namespace deepbsde
