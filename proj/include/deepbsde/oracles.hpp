#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "deepbsde/problems.hpp"
#include "deepbsde/rng.hpp"
#include "deepbsde/solver.hpp"

namespace deepbsde {

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t samples = 0;
};

/// Monte Carlo evaluation of the log-transform formula
///   u(0, x) = -(1/lambda) ln E[ exp(-lambda g(x + sqrt(2) W_T)) ]
/// with a running-max shifted accumulation so exp never overflows or
/// underflows to zero, and a delta-method standard error.
inline McEstimate hjb_reference(std::size_t d, double lambda, double T,
                                const std::function<double(std::span<const double>)>& g,
                                std::span<const double> x, std::uint64_t samples, RngStream& rng) {
    require(lambda > 0.0, "hjb_reference: lambda must be > 0");
    require(samples >= 1000, "hjb_reference: need at least 1e3 samples");
    require(x.size() == d, "hjb_reference: x size does not match d");

    const double scale = std::sqrt(2.0 * T);
    const std::size_t chunk = 4096;
    std::vector<double> z(chunk * d), y(d);

    // Shifted accumulation of s1 = sum exp(a - m) and s2 = sum exp(2(a - m))
    // with a = -lambda * g; m tracks the running maximum.
    double m = -std::numeric_limits<double>::infinity();
    double s1 = 0.0, s2 = 0.0;
    std::uint64_t done = 0;
    while (done < samples) {
        std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(chunk, samples - done));
        fill_normal(rng, std::span<double>(z.data(), n * d));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) y[j] = x[j] + scale * z[i * d + j];
            double a = -lambda * g(std::span<const double>(y.data(), d));
            if (a > m) {
                if (s1 > 0.0) {
                    double r = std::exp(m - a);
                    s1 *= r;
                    s2 *= r * r;
                }
                m = a;
            }
            double e = std::exp(a - m);
            s1 += e;
            s2 += e * e;
        }
        done += n;
    }

    const double M = static_cast<double>(samples);
    double mean_shifted = s1 / M;                       // E[e^{a-m}]
    double log_mean = m + std::log(mean_shifted);       // ln E[e^a]
    double var_shifted = s2 / M - mean_shifted * mean_shifted;
    if (var_shifted < 0.0) var_shifted = 0.0;
    // Delta method: se(ln mean) = se(mean)/mean, invariant under the shift.
    double se_log = std::sqrt(var_shifted / M) / mean_shifted;

    McEstimate est;
    est.value = -log_mean / lambda;
    est.std_error = se_log / lambda;
    est.samples = samples;
    return est;
}

/// Feynman-Kac value e^{-R T} E[g(X_T)] of a problem whose generator is
/// f = -R*y with no z dependence. X_T is drawn from its exact law when the
/// problem provides one, otherwise by Euler stepping on a fine grid.
inline McEstimate linear_fk_reference(const ProblemSpec& spec, std::uint64_t samples,
                                      RngStream& rng, std::size_t euler_steps = 1000) {
    require(spec.linear_rate.has_value(),
            "linear_fk_reference: generator must be linear (f = -R*y); spec '" + spec.id +
                "' does not declare a linear rate");
    require(samples >= 2, "linear_fk_reference: need at least 2 samples");
    const std::size_t d = spec.dim;
    const double discount = std::exp(-*spec.linear_rate * spec.horizon);

    double sum = 0.0, sum_sq = 0.0;
    if (spec.sample_terminal) {
        std::vector<double> xT(d);
        for (std::uint64_t i = 0; i < samples; ++i) {
            spec.sample_terminal(rng, std::span<double>(xT.data(), d));
            double g = spec.terminal(std::span<const double>(xT.data(), d));
            sum += g;
            sum_sq += g * g;
        }
    } else {
        TimeGrid grid = make_grid(euler_steps, spec.horizon);
        const std::size_t chunk = 256;
        std::uint64_t done = 0;
        while (done < samples) {
            std::size_t B = static_cast<std::size_t>(std::min<std::uint64_t>(chunk, samples - done));
            PathBatch pb = sample_paths(spec, grid, B, rng);
            const DenseTensor& XT = pb.X.back();
            for (std::size_t i = 0; i < B; ++i) {
                double g = spec.terminal(std::span<const double>(XT.data() + i * d, d));
                sum += g;
                sum_sq += g * g;
            }
            done += B;
        }
    }

    const double M = static_cast<double>(samples);
    double mean = sum / M;
    double var = sum_sq / M - mean * mean;
    if (var < 0.0) var = 0.0;

    McEstimate est;
    est.value = discount * mean;
    est.std_error = discount * std::sqrt(var / M);
    est.samples = samples;
    return est;
}

/// Published constants for the two problems whose references come from
/// external high-accuracy solvers rather than anything computed here.
inline ReferenceValue stored_reference(const std::string& problem_id) {
    if (problem_id == "bs_default_risk")
        return ReferenceValue{57.300, ReferenceValue::Provenance::external_published,
                              "published multilevel Picard value, d=100, T=1"};
    if (problem_id == "allen_cahn")
        return ReferenceValue{0.0528, ReferenceValue::Provenance::external_published,
                              "published branching-diffusion value, d=100, T=0.3"};
    throw ConfigError("stored_reference: no stored constant for '" + problem_id +
                      "' (computed references come from their oracles)");
}

}  // namespace deepbsde
