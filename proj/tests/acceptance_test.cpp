// Acceptance suite: every check prints exactly one line
//   ACCEPTANCE C<k> <name>: PASS|FAIL
// plus indented detail lines with the measured numbers. Tolerances are the
// release gates and are pinned here, not configurable.

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "deepbsde/gradcheck.hpp"
#include "deepbsde/net.hpp"
#include "deepbsde/oracles.hpp"
#include "deepbsde/problems.hpp"
#include "deepbsde/rng.hpp"
#include "deepbsde/solver.hpp"

namespace {

using namespace deepbsde;

constexpr double kGradTolerance = 1e-5;       // C1 max backprop-vs-FD relative error
constexpr double kSigmaGate = 3.0;            // C2, C6 oracle clause: combined std errors
constexpr double kTolHjb = 0.010;             // C3 mean relative error
constexpr double kTolSweep = 0.020;           // C4 per-lambda relative error
constexpr double kTolAllenCahn = 0.010;       // C5 mean relative error
constexpr double kTolDefaultRisk = 0.015;     // C6 mean relative error
constexpr double kTolDepthH2 = 0.015;         // C7 full-study H=2 mean relative error
constexpr double kBudgetLinearSec = 120.0;    // C2 wall-clock budget
constexpr double kBudgetPropertySec = 60.0;   // C8 wall-clock budget
constexpr std::size_t kProtocolRuns = 5;      // independent seeds per stochastic target

bool report(int k, const char* name, bool pass) {
    std::printf("ACCEPTANCE C%d %s: %s\n", k, name, pass ? "PASS" : "FAIL");
    std::fflush(stdout);
    return pass;
}

void note(const char* fmt, ...) {
    std::va_list args;
    va_start(args, fmt);
    std::printf("  detail: ");
    std::vprintf(fmt, args);
    std::printf("\n");
    va_end(args);
    std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

NetConfig benchmark_net(std::size_t d) {
    NetConfig net;
    net.input_dim = d;
    return net;  // two hidden layers of width d + 10, the benchmark default
}

RunSummary train_summary(const ProblemSpec& spec, std::size_t N, const NetConfig& net,
                         TrainConfig cfg, double reference) {
    TimeGrid grid = make_grid(N, spec.horizon);
    cfg.reference_override = reference;
    auto [params, summary] = train(spec, grid, net, cfg);
    return summary;
}

}  // namespace

// C1: backpropagated gradients agree with central finite differences on
// randomized small instances covering all four generators, both net styles,
// and both start-point modes.
TEST(Acceptance, C1GradientCorrectness) {
    auto t0 = std::chrono::steady_clock::now();
    GradcheckOptions opt;  // 24 trials, d <= 3, N <= 4, H <= 2
    opt.tolerance = kGradTolerance;
    GradcheckReport rep = run_gradcheck(opt);

    note("%zu instances, max relative error %.3e, tolerance %.1e, %.1fs",
           rep.instances.size(), rep.max_rel_error, kGradTolerance, seconds_since(t0));
    EXPECT_TRUE(report(1, "gradcheck-backprop-vs-finite-difference", rep.passed()));
}

// C2: with f == 0 the trained u0 must equal the Feynman-Kac expectation. Both
// dimensions are gated at 3 combined standard errors (MC error plus the
// across-seed error of the trained mean). d=10 trains on a finer grid because
// the min-of-assets payoff carries an Euler weak error of roughly 2.9/N,
// which must sit well below the statistical band for the comparison to mean
// anything.
TEST(Acceptance, C2LinearFeynmanKac) {
    auto t0 = std::chrono::steady_clock::now();
    DefaultRiskParams p;
    p.rate = 0.0;

    struct Case {
        std::size_t d, N, iterations;
        std::pair<double, double> u0_init;
    };
    const std::vector<Case> cases{{1, 20, 1200, {95.0, 110.0}}, {10, 100, 1000, {70.0, 90.0}}};

    bool pass = true;
    for (const auto& c : cases) {
        ProblemSpec spec = linear_bs_no_default(c.d, p, 1.0, 100.0);
        RngStream mc_rng = make_rng(9001, 0);
        McEstimate mc = linear_fk_reference(spec, 1'000'000, mc_rng);

        TrainConfig cfg;
        cfg.iterations = c.iterations;
        cfg.eval_every = 200;
        cfg.runs = kProtocolRuns;
        cfg.seed = 7;
        cfg.lr_schedule = {{0, 0.1}, {400, 0.02}, {800, 0.004}};
        cfg.u0_init = c.u0_init;
        RunSummary s = train_summary(spec, c.N, benchmark_net(c.d), cfg, mc.value);

        double se_mean = s.u0_std / std::sqrt(double(cfg.runs));
        double combined = std::sqrt(mc.std_error * mc.std_error + se_mean * se_mean);
        double gap = std::abs(s.u0_mean - mc.value);
        note("d=%zu: trained %.5f, MC %.5f (se %.5f), gap %.5f = %.2f combined se", c.d,
               s.u0_mean, mc.value, mc.std_error, gap, gap / combined);
        pass = pass && gap <= kSigmaGate * combined;
    }
    double elapsed = seconds_since(t0);
    note("runtime %.1fs (budget %.0fs)", elapsed, kBudgetLinearSec);
    pass = pass && elapsed <= kBudgetLinearSec;
    EXPECT_TRUE(report(2, "linear-feynman-kac-equivalence", pass));
}

// C3: the d=100 LQG value at lambda=1 against the log-transform Monte Carlo
// oracle, five seeds, N=20, lr 0.01.
TEST(Acceptance, C3HjbHundredDimensions) {
    auto t0 = std::chrono::steady_clock::now();
    ProblemSpec spec = hjb_lqg(100, 1.0, 1.0);
    RngStream mc_rng = make_rng(9001, 0);
    McEstimate mc = hjb_reference(spec.dim, 1.0, spec.horizon, spec.terminal, spec.start_point,
                                  1'000'000, mc_rng);

    TrainConfig cfg;
    cfg.iterations = 4000;
    cfg.eval_every = 1000;
    cfg.runs = kProtocolRuns;
    cfg.seed = 1;
    cfg.lr_schedule = {{0, 0.01}};
    RunSummary s = train_summary(spec, 20, benchmark_net(spec.dim), cfg, mc.value);

    note("u0 %.5f vs oracle %.5f, mean relative error %.4f%% (tolerance %.1f%%), %.0fs",
           s.u0_mean, mc.value, 100.0 * s.relative_error_mean, 100.0 * kTolHjb,
           seconds_since(t0));
    EXPECT_TRUE(report(3, "hjb-d100-lambda1-relative-error",
                       s.relative_error_mean <= kTolHjb));
}

// C4: the control-strength sweep. The trained u0 must decrease strictly in
// lambda and stay within 2% of the per-lambda oracle. Larger lambda starts
// the control smaller (output_gamma_init) so the quadratic cost term cannot
// trade a wrong u0 against inflated control noise early in training.
TEST(Acceptance, C4HjbLambdaSweep) {
    auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> lambdas{1.0, 5.0, 10.0, 20.0, 30.0, 50.0};

    bool within = true;
    bool decreasing = true;
    double prev = 0.0;
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        double lam = lambdas[k];
        ProblemSpec spec = hjb_lqg(100, lam, 1.0);
        RngStream mc_rng = make_rng(9001, 0);
        McEstimate mc = hjb_reference(spec.dim, lam, spec.horizon, spec.terminal,
                                      spec.start_point, 1'000'000, mc_rng);

        NetConfig net = benchmark_net(spec.dim);
        net.output_gamma_init = lam >= 5.0 ? 0.02 : 1.0;
        TrainConfig cfg;
        cfg.iterations = 4000;
        cfg.eval_every = 1000;
        cfg.runs = kProtocolRuns;
        cfg.seed = 1;
        cfg.lr_schedule = {{0, 0.01}};
        RunSummary s = train_summary(spec, 20, net, cfg, mc.value);

        double rel = std::abs(s.u0_mean - mc.value) / std::abs(mc.value);
        note("lambda %.0f: u0 %.5f vs oracle %.5f, error %.3f%%", lam, s.u0_mean, mc.value,
               100.0 * rel);
        within = within && rel <= kTolSweep;
        if (k > 0) decreasing = decreasing && s.u0_mean < prev;
        prev = s.u0_mean;
    }
    note("runtime %.0fs", seconds_since(t0));
    EXPECT_TRUE(report(4, "hjb-lambda-sweep-monotone-within-2pct", within && decreasing));
}

// C5: the d=100 reaction-diffusion value at T=0.3 against the published
// 0.0528, five seeds, N=20, lr 0.0005. The control starts at 1% scale and u0
// inside [0, 0.3]: the cubic reaction term is unstable beyond |u| > 1, and an
// order-one initial control walks terminal values into that basin.
TEST(Acceptance, C5AllenCahn) {
    auto t0 = std::chrono::steady_clock::now();
    ProblemSpec spec = allen_cahn(100, 0.3);
    ReferenceValue ref = stored_reference("allen_cahn");

    NetConfig net = benchmark_net(spec.dim);
    net.output_gamma_init = 0.01;
    TrainConfig cfg;
    cfg.iterations = 4000;
    cfg.eval_every = 1000;
    cfg.runs = kProtocolRuns;
    cfg.seed = 1;
    cfg.lr_schedule = {{0, 0.0005}};
    cfg.u0_init = {0.0, 0.3};
    RunSummary s = train_summary(spec, 20, net, cfg, ref.value);

    note("u0 %.6f vs stored %.4f, mean relative error %.4f%% (tolerance %.1f%%), %.0fs",
           s.u0_mean, ref.value, 100.0 * s.relative_error_mean, 100.0 * kTolAllenCahn,
           seconds_since(t0));
    EXPECT_TRUE(report(5, "allen-cahn-d100-relative-error",
                       s.relative_error_mean <= kTolAllenCahn));
}

// C6: the d=100 default-risk value against the published 57.300, five seeds,
// N=40, lr 0.008; and the no-default linear variant's Monte Carlo oracle must
// reproduce the published 60.781 within 3 standard errors.
TEST(Acceptance, C6DefaultRisk) {
    auto t0 = std::chrono::steady_clock::now();
    ProblemSpec spec = bs_default_risk(100, DefaultRiskParams{}, 1.0, 100.0);
    ReferenceValue ref = stored_reference("bs_default_risk");

    TrainConfig cfg;
    cfg.iterations = 3000;
    cfg.eval_every = 1000;
    cfg.runs = kProtocolRuns;
    cfg.seed = 1;
    cfg.lr_schedule = {{0, 0.008}};
    RunSummary s = train_summary(spec, 40, benchmark_net(spec.dim), cfg, ref.value);
    bool trained_ok = s.relative_error_mean <= kTolDefaultRisk;
    note("u0 %.4f vs stored %.3f, mean relative error %.4f%% (tolerance %.1f%%)", s.u0_mean,
           ref.value, 100.0 * s.relative_error_mean, 100.0 * kTolDefaultRisk);

    DefaultRiskParams lin;
    lin.rate = 0.0;  // published comparison value is the undiscounted expectation
    ProblemSpec linear = linear_bs_no_default(100, lin, 1.0, 100.0);
    RngStream mc_rng = make_rng(9001, 0);
    McEstimate mc = linear_fk_reference(linear, 1'000'000, mc_rng);
    double gap = std::abs(mc.value - 60.781);
    bool oracle_ok = gap <= kSigmaGate * mc.std_error;
    note("no-default oracle %.4f vs published 60.781, gap %.4f = %.2f se", mc.value, gap,
           gap / mc.std_error);
    note("runtime %.0fs", seconds_since(t0));

    EXPECT_TRUE(report(6, "default-risk-d100-value-and-linear-oracle", trained_ok && oracle_ok));
}

// C7: error decreases monotonically in sub-network depth on the oscillating
// reaction-diffusion problem. The full study (d=100, width d, 40000
// iterations) takes hours single-threaded, so it only runs when
// DEEPBSDE_ACCEPT_FULL_TABLE1=1; CI runs a d=20 smoke variant whose lambda is
// scaled so lambda^2*d matches the d=100 geometry (same phase spread, same
// amplitude decay), keeping depth capacity the binding constraint.
TEST(Acceptance, C7DepthStudy) {
    auto t0 = std::chrono::steady_clock::now();
    const char* env = std::getenv("DEEPBSDE_ACCEPT_FULL_TABLE1");
    const bool full = env && std::string(env) == "1";

    const std::size_t d = full ? 100 : 20;
    const double lambda = full ? 0.1 : 0.2236;
    const std::size_t iterations = full ? 40000 : 8000;
    ProblemSpec spec = gobet_oscillating(d, 1.6, lambda, 1.0);

    std::vector<double> errors;
    for (std::size_t H = 0; H <= 2; ++H) {
        NetConfig net;
        net.input_dim = d;
        net.hidden_layers = H;
        net.hidden_width = d;
        net.style = NetStyle::residual;
        net.output_gamma_init = 0.1;
        TrainConfig cfg;
        cfg.iterations = iterations;
        cfg.eval_every = 2000;
        cfg.runs = kProtocolRuns;
        cfg.seed = 1;
        cfg.lr_schedule = {{0, 0.01}, {iterations / 2, 0.001}};
        RunSummary s = train_summary(spec, 30, net, cfg, spec.reference->value);
        errors.push_back(s.relative_error_mean);
        note("H=%zu: mean relative error %.4f%% (u0 %.5f)", H, 100.0 * s.relative_error_mean,
               s.u0_mean);
    }

    bool monotone = errors[0] > errors[1] && errors[1] > errors[2];
    bool pass = full ? (monotone && errors[2] <= kTolDepthH2) : monotone;
    note("%s variant, runtime %.0fs", full ? "full" : "smoke", seconds_since(t0));
    EXPECT_TRUE(report(7, "depth-study-monotone", pass));
}

// C8: structural properties checked with no training at all.
TEST(Acceptance, C8PropertySuite) {
    auto t0 = std::chrono::steady_clock::now();
    bool pass = true;

    {  // Batch norm emits zero-mean, unit-variance columns at gamma=1, beta=0.
        RngStream rng = make_rng(81, 0);
        DenseTensor a = standard_normal(rng, {128, 7});
        for (std::size_t j = 0; j < a.cols(); ++j)
            for (std::size_t i = 0; i < a.rows(); ++i) a.at(i, j) = 0.3 + 1.7 * a.at(i, j);
        BatchNormParams bn(7);
        DenseTensor out = DenseTensor::matrix(128, 7), xhat, invstd;
        detail::bn_forward_train(a, bn, 1e-6, 0.99, out, xhat, invstd);
        double worst_mean = 0.0, worst_var = 0.0;
        for (std::size_t j = 0; j < out.cols(); ++j) {
            double mean = 0.0, var = 0.0;
            for (std::size_t i = 0; i < out.rows(); ++i) mean += out.at(i, j);
            mean /= double(out.rows());
            for (std::size_t i = 0; i < out.rows(); ++i) {
                double c = out.at(i, j) - mean;
                var += c * c;
            }
            var /= double(out.rows());
            worst_mean = std::max(worst_mean, std::abs(mean));
            worst_var = std::max(worst_var, std::abs(var - 1.0));
        }
        bool ok = worst_mean <= 1e-12 && worst_var <= 1e-4;
        note("batch norm: |col mean| <= %.2e, |col var - 1| <= %.2e -> %s", worst_mean,
               worst_var, ok ? "ok" : "FAIL");
        pass = pass && ok;
    }

    {  // <w, sigma v> == <sigma^T w, v> for both non-trivial diffusions.
        RngStream rng = make_rng(82, 0);
        double worst = 0.0;
        for (const ProblemSpec& spec :
             {hjb_lqg(7, 1.0, 1.0), bs_default_risk(7, DefaultRiskParams{}, 1.0, 100.0)}) {
            std::vector<double> x(spec.dim), v(spec.dim), w(spec.dim), sv(spec.dim),
                stw(spec.dim);
            for (std::size_t rep = 0; rep < 20; ++rep) {
                for (auto* vec : {&x, &v, &w})
                    for (auto& c : *vec) c = rng.next_uniform(0.5, 2.0);
                spec.diffusion_apply(0.4, x, v, sv);
                spec.diffusion_transpose_apply(0.4, x, w, stw);
                double lhs = 0.0, rhs = 0.0;
                for (std::size_t i = 0; i < spec.dim; ++i) {
                    lhs += w[i] * sv[i];
                    rhs += stw[i] * v[i];
                }
                worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
            }
        }
        bool ok = worst <= 1e-12;
        note("diffusion adjointness: max relative mismatch %.2e -> %s", worst,
               ok ? "ok" : "FAIL");
        pass = pass && ok;
    }

    {  // Default intensity: continuous, non-increasing, correct plateaus.
        DefaultRiskParams p;
        double jump_h = std::abs(intensity_q(p.v_h - 1e-9, p) - intensity_q(p.v_h, p));
        double jump_l = std::abs(intensity_q(p.v_l - 1e-9, p) - intensity_q(p.v_l, p));
        bool ok = jump_h <= 1e-7 && jump_l <= 1e-7;
        ok = ok && intensity_q(p.v_h - 30.0, p) == p.gamma_h &&
             intensity_q(p.v_l + 30.0, p) == p.gamma_l;
        double prev = intensity_q(0.0, p);
        for (double y = 0.1; y <= 120.0; y += 0.1) {
            double q = intensity_q(y, p);
            ok = ok && q <= prev + 1e-15;
            prev = q;
        }
        note("default intensity: knot jumps %.2e / %.2e, non-increasing -> %s", jump_h,
               jump_l, ok ? "ok" : "FAIL");
        pass = pass && ok;
    }

    {  // The oscillating exact solution satisfies its PDE: u_t + laplacian/2 = 0.
        const std::size_t d = 3;
        const double kappa = 1.6, lam = 0.3, T = 0.8, h = 1e-4;
        RngStream rng = make_rng(83, 0);
        double worst = 0.0;
        for (std::size_t rep = 0; rep < 10; ++rep) {
            double t = rng.next_uniform(0.05, T - 0.05);
            std::vector<double> x(d);
            for (auto& c : x) c = rng.next_uniform(-1.0, 1.0);
            auto u = [&](double tt, std::span<const double> xx) {
                return gobet_exact(tt, xx, kappa, lam, d, T);
            };
            double ut = (u(t + h, x) - u(t - h, x)) / (2.0 * h);
            double lap = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                std::vector<double> xp = x, xm = x;
                xp[i] += h;
                xm[i] -= h;
                lap += (u(t, xp) - 2.0 * u(t, x) + u(t, xm)) / (h * h);
            }
            worst = std::max(worst, std::abs(ut + 0.5 * lap));
        }
        bool ok = worst <= 1e-5;
        note("oscillating solution residual: max |u_t + lap/2| = %.2e -> %s", worst,
               ok ? "ok" : "FAIL");
        pass = pass && ok;
    }

    {  // Same seed, same bytes: paths, rollout, and a short training run.
        ProblemSpec spec = hjb_lqg(3, 1.0, 1.0);
        TimeGrid grid = make_grid(4, spec.horizon);
        bool ok = true;
        for (int rep = 0; rep < 2; ++rep) {
            RngStream ra = make_rng(17, 5), rb = make_rng(17, 5);
            PathBatch pa = sample_paths(spec, grid, 16, ra);
            PathBatch pb = sample_paths(spec, grid, 16, rb);
            for (std::size_t n = 0; n <= 4 && ok; ++n)
                for (std::size_t i = 0; i < pa.X[n].size(); ++i)
                    ok = ok && pa.X[n][i] == pb.X[n][i];
        }
        NetConfig net = benchmark_net(3);
        TrainConfig cfg;
        cfg.batch_size = 8;
        cfg.iterations = 20;
        cfg.runs = 1;
        cfg.seed = 9;
        auto [par_a, sum_a] = train(spec, grid, net, cfg);
        auto [par_b, sum_b] = train(spec, grid, net, cfg);
        ok = ok && sum_a.runs[0].final_u0 == sum_b.runs[0].final_u0 &&
             sum_a.runs[0].final_loss == sum_b.runs[0].final_loss;
        note("determinism: repeated paths and training byte-identical -> %s",
               ok ? "ok" : "FAIL");
        pass = pass && ok;
    }

    {  // With f == 0 the rolled-forward value is a discrete martingale: the
       // batch mean of u_N - u_0 vanishes within Monte Carlo error even for an
       // untrained network.
        DefaultRiskParams p;
        p.rate = 0.0;
        ProblemSpec spec = linear_bs_no_default(10, p, 1.0, 100.0);
        TimeGrid grid = make_grid(10, spec.horizon);
        RngStream init_rng = make_rng(84, 0), path_rng = make_rng(84, 1);
        ModelParams params =
            init_model(spec, grid, benchmark_net(10), false, spec.u0_bracket, 0.1, init_rng);
        const std::size_t B = 8192;
        PathBatch paths = sample_paths(spec, grid, B, path_rng);
        RolloutResult roll = rollout(spec, grid, params, paths);
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < B; ++i) mean += roll.u.at(i, 10) - roll.u.at(i, 0);
        mean /= double(B);
        for (std::size_t i = 0; i < B; ++i) {
            double c = roll.u.at(i, 10) - roll.u.at(i, 0) - mean;
            var += c * c;
        }
        var /= double(B - 1);
        double se = std::sqrt(var / double(B));
        bool ok = std::abs(mean) <= 3.0 * se;
        note("martingale: batch mean of u_N - u_0 = %.4f (se %.4f) -> %s", mean, se,
               ok ? "ok" : "FAIL");
        pass = pass && ok;
    }

    double elapsed = seconds_since(t0);
    note("runtime %.1fs (budget %.0fs)", elapsed, kBudgetPropertySec);
    pass = pass && elapsed <= kBudgetPropertySec;
    EXPECT_TRUE(report(8, "property-suite-no-training", pass));
}
