#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "deepbsde/net.hpp"

namespace deepbsde {

/// Adam moment accumulators, one (m, v) pair per trainable tensor in the
/// canonical visit order, plus a single global step counter. Moving BN
/// statistics are not trainable and never appear here.
struct AdamState {
    std::vector<DenseTensor> m, v;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

inline AdamState init_adam(const std::vector<TensorRef>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& p : params) {
        s.m.emplace_back(p.tensor->shape(), 0.0);
        s.v.emplace_back(p.tensor->shape(), 0.0);
    }
    return s;
}

/// One Adam update over aligned parameter/gradient tensor lists. Throws
/// NumericalError naming the offending tensor if a gradient is non-finite.
inline void adam_step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
                      AdamState& state, double lr) {
    require(params.size() == grads.size() && params.size() == state.m.size(),
            "adam_step: parameter/gradient/state lists misaligned");
    state.step += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        DenseTensor& theta = *params[k].tensor;
        const DenseTensor& g = *grads[k].tensor;
        require(theta.same_shape(g), "adam_step: gradient shape mismatch for " + params[k].name);
        if (!g.all_finite())
            throw NumericalError("adam_step: non-finite gradient in tensor '" + params[k].name + "'");
        DenseTensor& m = state.m[k];
        DenseTensor& v = state.v[k];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            double mhat = m[i] / corr1;
            double vhat = v[i] / corr2;
            theta[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

}  // namespace deepbsde
