#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deepbsde/rng.hpp"
#include "deepbsde/tensor.hpp"

namespace deepbsde {

/// Provenance-tagged reference value attached to a problem instance.
struct ReferenceValue {
    enum class Provenance { closed_form_mc, external_published, exact_function };
    double value = 0.0;
    Provenance provenance = Provenance::closed_form_mc;
    std::string citation;
};

inline const char* to_string(ReferenceValue::Provenance p) {
    switch (p) {
        case ReferenceValue::Provenance::closed_form_mc: return "closed_form_mc";
        case ReferenceValue::Provenance::external_published: return "external_published";
        case ReferenceValue::Provenance::exact_function: return "exact_function";
    }
    return "?";
}

/// One semilinear parabolic PDE instance in terminal-condition form:
///
///   u_t + 1/2 Tr(sigma sigma^T Hess u) + mu . grad u + f(t, x, u, sigma^T grad u) = 0,
///   u(T, x) = g(x).
///
/// The diffusion enters only through matrix-free apply / transpose-apply
/// operators; the solver works exclusively with z = sigma^T grad u, so sigma
/// never needs to be inverted or materialized. Generator derivatives df/dy
/// and df/dz are supplied analytically; the backward pass requires them.
struct ProblemSpec {
    using DriftFn = std::function<void(double, std::span<const double>, std::span<double>)>;
    using DiffusionFn =
        std::function<void(double, std::span<const double>, std::span<const double>, std::span<double>)>;
    using GeneratorFn = std::function<double(double, std::span<const double>, double, std::span<const double>)>;
    using GeneratorGradZFn =
        std::function<void(double, std::span<const double>, double, std::span<const double>, std::span<double>)>;
    using TerminalFn = std::function<double(std::span<const double>)>;
    using TerminalSampler = std::function<void(RngStream&, std::span<double>)>;

    std::string id;
    std::size_t dim = 0;
    double horizon = 0.0;
    std::vector<double> start_point;

    DriftFn drift;
    DiffusionFn diffusion_apply;
    DiffusionFn diffusion_transpose_apply;
    GeneratorFn generator;
    TerminalFn terminal;

    // Analytic partial derivatives of the generator, required for training.
    GeneratorFn generator_dy;
    GeneratorGradZFn generator_dz;

    std::optional<ReferenceValue> reference;

    // Bracket the scalar u0 parameter is initialized from.
    std::pair<double, double> u0_bracket{0.0, 1.0};

    // Set when f(t,x,y,z) = -rate*y with no z dependence; enables the linear
    // Feynman-Kac oracle.
    std::optional<double> linear_rate;

    // Draws X_T directly from its exact law when one is known, bypassing
    // Euler stepping in Monte Carlo oracles.
    TerminalSampler sample_terminal;
};

/// Parameters of the default-risk Black-Scholes model.
struct DefaultRiskParams {
    double delta = 2.0 / 3.0;  // recovery fraction, in [0,1)
    double rate = 0.02;        // risk-free rate R
    double mu_bar = 0.02;      // asset drift
    double sigma_bar = 0.2;    // asset volatility
    double v_h = 50.0;         // intensity threshold, high hazard below
    double v_l = 70.0;         // intensity threshold, low hazard above
    double gamma_h = 0.2;      // hazard level for low claim values
    double gamma_l = 0.02;     // hazard level for high claim values

    void validate() const {
        require(v_h < v_l, "DefaultRiskParams: v_h must be < v_l");
        require(gamma_h > gamma_l, "DefaultRiskParams: gamma_h must be > gamma_l");
        require(delta >= 0.0 && delta < 1.0, "DefaultRiskParams: delta must be in [0,1)");
    }
};

/// Piecewise-linear default intensity: gamma_h below v_h, gamma_l from v_l
/// up, linear in between. Continuous and non-increasing.
inline double intensity_q(double y, const DefaultRiskParams& p) {
    if (y < p.v_h) return p.gamma_h;
    if (y >= p.v_l) return p.gamma_l;
    return (p.gamma_h - p.gamma_l) / (p.v_h - p.v_l) * (y - p.v_h) + p.gamma_h;
}

/// Derivative of intensity_q; the half-open middle interval [v_h, v_l) makes
/// the choice at the kinks: its slope applies at y = v_h, zero at y = v_l.
inline double intensity_q_dy(double y, const DefaultRiskParams& p) {
    if (y < p.v_h || y >= p.v_l) return 0.0;
    return (p.gamma_h - p.gamma_l) / (p.v_h - p.v_l);
}

namespace detail {

inline double squared_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

inline double sum(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
}

inline ProblemSpec::DriftFn zero_drift() {
    return [](double, std::span<const double>, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
    };
}

inline ProblemSpec::DiffusionFn scaled_identity_diffusion(double c) {
    return [c](double, std::span<const double>, std::span<const double> v, std::span<double> out) {
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = c * v[i];
    };
}

inline void fill_zero(std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); }

}  // namespace detail

/// LQG control benchmark. State dynamics dX = 2 sqrt(lambda) m dt + sqrt(2) dW
/// lead, after the HJB equation is written in terminal form, to mu = 0,
/// sigma = sqrt(2) Id and generator f = -lambda ||z||^2 / 2: with
/// z = sigma^T grad u = sqrt(2) grad u, lambda ||grad u||^2 = lambda ||z||^2 / 2.
inline ProblemSpec hjb_lqg(std::size_t d, double lambda, double T) {
    require(d >= 1, "hjb_lqg: d must be >= 1");
    require(lambda > 0.0, "hjb_lqg: lambda must be > 0");
    require(T > 0.0, "hjb_lqg: T must be > 0");
    ProblemSpec s;
    s.id = "hjb_lqg";
    s.dim = d;
    s.horizon = T;
    s.start_point.assign(d, 0.0);
    s.drift = detail::zero_drift();
    s.diffusion_apply = detail::scaled_identity_diffusion(std::sqrt(2.0));
    s.diffusion_transpose_apply = s.diffusion_apply;
    s.generator = [lambda](double, std::span<const double>, double, std::span<const double> z) {
        return -0.5 * lambda * detail::squared_norm(z);
    };
    s.generator_dy = [](double, std::span<const double>, double, std::span<const double>) { return 0.0; };
    s.generator_dz = [lambda](double, std::span<const double>, double, std::span<const double> z,
                              std::span<double> out) {
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = -lambda * z[i];
    };
    s.terminal = [](std::span<const double> x) {
        return std::log(0.5 * (1.0 + detail::squared_norm(x)));
    };
    s.u0_bracket = {0.0, 5.0};
    double scale = std::sqrt(2.0 * T);
    auto x0 = s.start_point;
    s.sample_terminal = [x0, scale](RngStream& rng, std::span<double> out) {
        fill_normal(rng, out);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = x0[i] + scale * out[i];
    };
    return s;
}

/// Allen-Cahn equation with double-well nonlinearity, delivered pre-reversed
/// in time: the solver's u(0, xi) equals the original equation's value at
/// time T started from the bump initial condition g.
inline ProblemSpec allen_cahn(std::size_t d, double T) {
    require(d >= 1, "allen_cahn: d must be >= 1");
    require(T > 0.0, "allen_cahn: T must be > 0");
    ProblemSpec s;
    s.id = "allen_cahn";
    s.dim = d;
    s.horizon = T;
    s.start_point.assign(d, 0.0);
    s.drift = detail::zero_drift();
    s.diffusion_apply = detail::scaled_identity_diffusion(std::sqrt(2.0));
    s.diffusion_transpose_apply = s.diffusion_apply;
    s.generator = [](double, std::span<const double>, double y, std::span<const double>) {
        return y - y * y * y;
    };
    s.generator_dy = [](double, std::span<const double>, double y, std::span<const double>) {
        return 1.0 - 3.0 * y * y;
    };
    s.generator_dz = [](double, std::span<const double>, double, std::span<const double>,
                        std::span<double> out) { detail::fill_zero(out); };
    s.terminal = [](std::span<const double> x) {
        return 1.0 / (2.0 + 0.4 * detail::squared_norm(x));
    };
    s.u0_bracket = {0.0, 1.0};
    double scale = std::sqrt(2.0 * T);
    auto x0 = s.start_point;
    s.sample_terminal = [x0, scale](RngStream& rng, std::span<double> out) {
        fill_normal(rng, out);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = x0[i] + scale * out[i];
    };
    return s;
}

/// Black-Scholes claim on the minimum of d assets under a recursive
/// default-risk valuation: the hazard Q depends on the claim value itself,
/// making the pricing PDE semilinear.
inline ProblemSpec bs_default_risk(std::size_t d, const DefaultRiskParams& p, double T,
                                   double x0_component) {
    require(d >= 1, "bs_default_risk: d must be >= 1");
    require(T > 0.0, "bs_default_risk: T must be > 0");
    p.validate();
    ProblemSpec s;
    s.id = "bs_default_risk";
    s.dim = d;
    s.horizon = T;
    s.start_point.assign(d, x0_component);
    double mu_bar = p.mu_bar, sigma_bar = p.sigma_bar;
    s.drift = [mu_bar](double, std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = mu_bar * x[i];
    };
    auto diag = [sigma_bar](double, std::span<const double> x, std::span<const double> v,
                            std::span<double> out) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigma_bar * x[i] * v[i];
    };
    s.diffusion_apply = diag;
    s.diffusion_transpose_apply = diag;
    s.generator = [p](double, std::span<const double>, double y, std::span<const double>) {
        return -(1.0 - p.delta) * intensity_q(y, p) * y - p.rate * y;
    };
    s.generator_dy = [p](double, std::span<const double>, double y, std::span<const double>) {
        return -(1.0 - p.delta) * (intensity_q_dy(y, p) * y + intensity_q(y, p)) - p.rate;
    };
    s.generator_dz = [](double, std::span<const double>, double, std::span<const double>,
                        std::span<double> out) { detail::fill_zero(out); };
    s.terminal = [](std::span<const double> x) {
        return *std::min_element(x.begin(), x.end());
    };
    s.u0_bracket = {40.0, 70.0};
    double log_drift = (mu_bar - 0.5 * sigma_bar * sigma_bar) * T;
    double log_scale = sigma_bar * std::sqrt(T);
    s.sample_terminal = [x0_component, log_drift, log_scale](RngStream& rng, std::span<double> out) {
        fill_normal(rng, out);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = x0_component * std::exp(log_drift + log_scale * out[i]);
    };
    return s;
}

/// Same dynamics as bs_default_risk with the default hazard removed; the
/// generator is linear, f = -R*y, so the value has a Feynman-Kac Monte Carlo
/// representation (see linear_fk_reference).
inline ProblemSpec linear_bs_no_default(std::size_t d, const DefaultRiskParams& p, double T,
                                        double x0_component) {
    ProblemSpec s = bs_default_risk(d, p, T, x0_component);
    s.id = "bs_linear";
    double rate = p.rate;
    s.generator = [rate](double, std::span<const double>, double y, std::span<const double>) {
        return -rate * y;
    };
    s.generator_dy = [rate](double, std::span<const double>, double, std::span<const double>) {
        return -rate;
    };
    s.linear_rate = rate;
    return s;
}

/// The explicit oscillating solution of the reaction-diffusion benchmark.
inline double gobet_exact(double t, std::span<const double> x, double kappa, double lam,
                          std::size_t d, double T) {
    require(x.size() == d, "gobet_exact: x size does not match d");
    return kappa + std::sin(lam * detail::sum(x)) *
                       std::exp(0.5 * lam * lam * static_cast<double>(d) * (t - T));
}

/// Reaction-diffusion benchmark with a known oscillating solution u*; the
/// generator min{1, (y - u*)^2} vanishes on the exact solution, which makes
/// u* solve the PDE and gives an exact_function reference at (0, xi).
inline ProblemSpec gobet_oscillating(std::size_t d, double kappa, double lam, double T) {
    require(d >= 1, "gobet_oscillating: d must be >= 1");
    require(T > 0.0, "gobet_oscillating: T must be > 0");
    ProblemSpec s;
    s.id = "gobet";
    s.dim = d;
    s.horizon = T;
    s.start_point.assign(d, 0.0);
    s.drift = detail::zero_drift();
    s.diffusion_apply = detail::scaled_identity_diffusion(1.0);
    s.diffusion_transpose_apply = s.diffusion_apply;
    auto ustar = [kappa, lam, d, T](double t, std::span<const double> x) {
        return kappa + std::sin(lam * detail::sum(x)) *
                           std::exp(0.5 * lam * lam * static_cast<double>(d) * (t - T));
    };
    s.generator = [ustar](double t, std::span<const double> x, double y, std::span<const double>) {
        double r = y - ustar(t, x);
        return std::min(1.0, r * r);
    };
    // Derivative 0 when (y-u*)^2 >= 1, including at equality.
    s.generator_dy = [ustar](double t, std::span<const double> x, double y, std::span<const double>) {
        double r = y - ustar(t, x);
        return r * r < 1.0 ? 2.0 * r : 0.0;
    };
    s.generator_dz = [](double, std::span<const double>, double, std::span<const double>,
                        std::span<double> out) { detail::fill_zero(out); };
    s.terminal = [kappa, lam](std::span<const double> x) {
        return kappa + std::sin(lam * detail::sum(x));
    };
    s.u0_bracket = {0.0, 1.0};
    s.reference = ReferenceValue{
        gobet_exact(0.0, s.start_point, kappa, lam, d, T),
        ReferenceValue::Provenance::exact_function,
        "explicit oscillating solution evaluated at (0, xi)",
    };
    double scale = std::sqrt(T);
    auto x0 = s.start_point;
    s.sample_terminal = [x0, scale](RngStream& rng, std::span<double> out) {
        fill_normal(rng, out);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = x0[i] + scale * out[i];
    };
    return s;
}

}  // namespace deepbsde
