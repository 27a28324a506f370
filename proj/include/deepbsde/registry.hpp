#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "deepbsde/oracles.hpp"
#include "deepbsde/problems.hpp"

namespace deepbsde {

struct ProblemInfo {
    std::string id;
    std::string description;
    nlohmann::json defaults;
};

inline std::vector<ProblemInfo> list_problems() {
    return {
        {"hjb_lqg",
         "LQG control value via its HJB equation; reference computed by the log-transform "
         "Monte Carlo oracle",
         {{"dim", 100}, {"T", 1.0}, {"lambda", 1.0}}},
        {"allen_cahn",
         "Allen-Cahn equation (time-reversed); u(0, xi) of the solved problem is the original "
         "equation's value at time T",
         {{"dim", 100}, {"T", 0.3}}},
        {"bs_default_risk",
         "Black-Scholes price of a min-of-d-assets claim under recursive default-risk valuation",
         {{"dim", 100},
          {"T", 1.0},
          {"x0_component", 100.0},
          {"delta", 2.0 / 3.0},
          {"rate", 0.02},
          {"mu_bar", 0.02},
          {"sigma_bar", 0.2},
          {"v_h", 50.0},
          {"v_l", 70.0},
          {"gamma_h", 0.2},
          {"gamma_l", 0.02}}},
        {"bs_linear",
         "No-default linear variant of bs_default_risk (f = -R*y). The default rate is 0: the "
         "published comparison value 60.781 is the undiscounted expectation of the minimum asset "
         "price; with rate 0.02 the discounted value is 59.577",
         {{"dim", 100},
          {"T", 1.0},
          {"x0_component", 100.0},
          {"delta", 2.0 / 3.0},
          {"rate", 0.0},
          {"mu_bar", 0.02},
          {"sigma_bar", 0.2},
          {"v_h", 50.0},
          {"v_l", 70.0},
          {"gamma_h", 0.2},
          {"gamma_l", 0.02}}},
        {"gobet",
         "Reaction-diffusion equation with a known oscillating solution (exact reference)",
         {{"dim", 100}, {"T", 1.0}, {"kappa", 1.6}, {"lambda", 0.1}}},
    };
}

namespace detail {

template <typename T>
T param_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("problem parameter '") + key + "': " + e.what());
    }
}

inline DefaultRiskParams default_risk_from_json(const nlohmann::json& j,
                                                const DefaultRiskParams& base) {
    DefaultRiskParams p = base;
    p.delta = param_or(j, "delta", p.delta);
    p.rate = param_or(j, "rate", p.rate);
    p.mu_bar = param_or(j, "mu_bar", p.mu_bar);
    p.sigma_bar = param_or(j, "sigma_bar", p.sigma_bar);
    p.v_h = param_or(j, "v_h", p.v_h);
    p.v_l = param_or(j, "v_l", p.v_l);
    p.gamma_h = param_or(j, "gamma_h", p.gamma_h);
    p.gamma_l = param_or(j, "gamma_l", p.gamma_l);
    return p;
}

inline bool approx(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

}  // namespace detail

/// Builds a registry problem from JSON parameters (missing keys take the
/// registry defaults). Stored published references are attached only when
/// the instance matches the configuration they were computed for.
inline ProblemSpec make_problem(const std::string& id, const nlohmann::json& params) {
    using detail::param_or;
    if (id == "hjb_lqg") {
        auto d = param_or<std::size_t>(params, "dim", 100);
        auto lambda = param_or(params, "lambda", 1.0);
        auto T = param_or(params, "T", 1.0);
        return hjb_lqg(d, lambda, T);
    }
    if (id == "allen_cahn") {
        auto d = param_or<std::size_t>(params, "dim", 100);
        auto T = param_or(params, "T", 0.3);
        ProblemSpec s = allen_cahn(d, T);
        if (d == 100 && detail::approx(T, 0.3)) s.reference = stored_reference(id);
        return s;
    }
    if (id == "bs_default_risk" || id == "bs_linear") {
        auto d = param_or<std::size_t>(params, "dim", 100);
        auto T = param_or(params, "T", 1.0);
        auto x0 = param_or(params, "x0_component", 100.0);
        DefaultRiskParams base;
        if (id == "bs_linear") base.rate = 0.0;
        DefaultRiskParams p = detail::default_risk_from_json(params, base);
        if (id == "bs_linear") return linear_bs_no_default(d, p, T, x0);
        ProblemSpec s = bs_default_risk(d, p, T, x0);
        DefaultRiskParams paper;
        bool paper_params = detail::approx(p.delta, paper.delta) &&
                            detail::approx(p.rate, paper.rate) &&
                            detail::approx(p.mu_bar, paper.mu_bar) &&
                            detail::approx(p.sigma_bar, paper.sigma_bar) &&
                            detail::approx(p.v_h, paper.v_h) && detail::approx(p.v_l, paper.v_l) &&
                            detail::approx(p.gamma_h, paper.gamma_h) &&
                            detail::approx(p.gamma_l, paper.gamma_l);
        if (d == 100 && detail::approx(T, 1.0) && detail::approx(x0, 100.0) && paper_params)
            s.reference = stored_reference(id);
        return s;
    }
    if (id == "gobet") {
        auto d = param_or<std::size_t>(params, "dim", 100);
        auto T = param_or(params, "T", 1.0);
        auto kappa = param_or(params, "kappa", 1.6);
        auto lam = param_or(params, "lambda", 0.1);
        return gobet_oscillating(d, kappa, lam, T);
    }
    std::string known;
    for (const auto& info : list_problems()) known += (known.empty() ? "" : ", ") + info.id;
    throw ConfigError("unknown problem id '" + id + "'; registry: " + known);
}

}  // namespace deepbsde
