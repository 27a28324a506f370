#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "deepbsde/rng.hpp"
#include "deepbsde/tensor.hpp"

namespace deepbsde {

enum class NetStyle { plain, residual };
enum class WeightInit { xavier_uniform, xavier_normal };

/// Architecture of one sub-network: input batch norm (optional), H hidden
/// blocks [affine -> BN -> ReLU], and an output block [affine -> BN] without
/// activation. In residual style each hidden block whose input and output
/// widths match gains a trainable skip matrix, initialized to the identity.
struct NetConfig {
    std::size_t input_dim = 0;
    std::size_t hidden_layers = 2;
    std::size_t hidden_width = 0;  // 0 means input_dim + 10
    std::size_t output_dim = 0;    // 0 means input_dim
    NetStyle style = NetStyle::plain;
    double bn_epsilon = 1e-6;
    double bn_momentum = 0.99;
    bool input_bn = true;
    WeightInit init = WeightInit::xavier_uniform;
    // Initial gamma of the output block's batch norm. A fresh network emits
    // unit-variance outputs per feature; this scales them, fixing the size of
    // the control z before any training. Generators that grow superlinearly
    // in the value (the cubic reaction term, or |z|^2 at large lambda) can
    // push the rollout to overflow within the very first batch when z starts
    // at unit scale in 100 dimensions, so those experiment configs start
    // smaller. 1.0 leaves the canonical gamma=1 initialization untouched.
    double output_gamma_init = 1.0;

    std::size_t width() const { return hidden_width ? hidden_width : input_dim + 10; }
    std::size_t out_dim() const { return output_dim ? output_dim : input_dim; }

    void validate() const {
        require(input_dim > 0, "NetConfig: input_dim must be positive");
        require(width() > 0, "NetConfig: hidden width must be positive");
        require(out_dim() > 0, "NetConfig: output_dim must be positive");
        require(bn_epsilon > 0.0, "NetConfig: bn_epsilon must be > 0");
        require(bn_momentum > 0.0 && bn_momentum < 1.0, "NetConfig: bn_momentum must be in (0,1)");
        require(output_gamma_init > 0.0, "NetConfig: output_gamma_init must be > 0");
    }
};

struct BatchNormParams {
    DenseTensor gamma, beta, moving_mean, moving_var;

    explicit BatchNormParams(std::size_t features = 1)
        : gamma(DenseTensor::vector(features, 1.0)),
          beta(DenseTensor::vector(features, 0.0)),
          moving_mean(DenseTensor::vector(features, 0.0)),
          moving_var(DenseTensor::vector(features, 1.0)) {}
};

struct DenseLayerParams {
    DenseTensor W;     // {in, out}
    DenseTensor b;     // {out}
    BatchNormParams bn;
    DenseTensor skip;  // {in, out}, present only on residual hidden blocks with in == out
    bool has_skip = false;
    bool relu = true;

    DenseLayerParams(std::size_t in, std::size_t out)
        : W(DenseTensor::matrix(in, out)), b(DenseTensor::vector(out)), bn(out) {}
};

struct SubNetParams {
    NetConfig cfg;
    BatchNormParams input_bn{1};
    std::vector<DenseLayerParams> layers;  // hidden blocks then the output block
};

/// Named reference to one trainable tensor; the enumeration order defined by
/// visit_trainable is the canonical order for Adam state, checkpoints, and
/// gradient checking.
struct TensorRef {
    std::string name;
    DenseTensor* tensor;
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

inline ConstMatMap mat(const DenseTensor& t) {
    return ConstMatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                       static_cast<Eigen::Index>(t.cols()));
}

inline MatMap mat(DenseTensor& t) {
    return MatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

}  // namespace detail

template <typename Fn>
void visit_trainable(SubNetParams& p, const std::string& prefix, Fn&& fn) {
    if (p.cfg.input_bn) {
        fn(TensorRef{prefix + "input_bn/gamma", &p.input_bn.gamma});
        fn(TensorRef{prefix + "input_bn/beta", &p.input_bn.beta});
    }
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& layer = p.layers[l];
        std::string base = prefix + "layer" + std::to_string(l) + "/";
        fn(TensorRef{base + "W", &layer.W});
        fn(TensorRef{base + "b", &layer.b});
        if (layer.has_skip) fn(TensorRef{base + "skip", &layer.skip});
        fn(TensorRef{base + "bn_gamma", &layer.bn.gamma});
        fn(TensorRef{base + "bn_beta", &layer.bn.beta});
    }
}

/// Visits every tensor including moving statistics (checkpoint payload).
template <typename Fn>
void visit_all(SubNetParams& p, const std::string& prefix, Fn&& fn) {
    visit_trainable(p, prefix, fn);
    if (p.cfg.input_bn) {
        fn(TensorRef{prefix + "input_bn/moving_mean", &p.input_bn.moving_mean});
        fn(TensorRef{prefix + "input_bn/moving_var", &p.input_bn.moving_var});
    }
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& layer = p.layers[l];
        std::string base = prefix + "layer" + std::to_string(l) + "/";
        fn(TensorRef{base + "bn_moving_mean", &layer.bn.moving_mean});
        fn(TensorRef{base + "bn_moving_var", &layer.bn.moving_var});
    }
}

inline std::size_t trainable_parameter_count(SubNetParams& p) {
    std::size_t n = 0;
    visit_trainable(p, "", [&](const TensorRef& r) { n += r.tensor->size(); });
    return n;
}

inline void fill_xavier(DenseTensor& W, std::size_t fan_in, std::size_t fan_out, WeightInit init,
                        RngStream& rng) {
    if (init == WeightInit::xavier_uniform) {
        double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < W.size(); ++i) W[i] = rng.next_uniform(-limit, limit);
    } else {
        double stddev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
        fill_normal(rng, std::span<double>(W.data(), W.size()));
        for (std::size_t i = 0; i < W.size(); ++i) W[i] *= stddev;
    }
}

/// Fresh parameters: Xavier weights, zero biases, BN at gamma=1, beta=0
/// (the output block's gamma starts at cfg.output_gamma_init), moving
/// statistics at (mean 0, variance 1). Only weight matrices consume
/// randomness, in layer order, so initialization is stream-deterministic.
inline SubNetParams init_subnet(const NetConfig& cfg, RngStream& rng) {
    cfg.validate();
    SubNetParams p;
    p.cfg = cfg;
    if (cfg.input_bn) p.input_bn = BatchNormParams(cfg.input_dim);

    std::size_t in = cfg.input_dim;
    for (std::size_t h = 0; h < cfg.hidden_layers; ++h) {
        std::size_t out = cfg.width();
        DenseLayerParams layer(in, out);
        fill_xavier(layer.W, in, out, cfg.init, rng);
        if (cfg.style == NetStyle::residual && in == out) {
            layer.skip = DenseTensor::matrix(in, out, 0.0);
            for (std::size_t i = 0; i < in; ++i) layer.skip.at(i, i) = 1.0;
            layer.has_skip = true;
        }
        p.layers.push_back(std::move(layer));
        in = out;
    }
    DenseLayerParams out_layer(in, cfg.out_dim());
    fill_xavier(out_layer.W, in, cfg.out_dim(), cfg.init, rng);
    out_layer.relu = false;
    for (std::size_t j = 0; j < out_layer.bn.gamma.size(); ++j)
        out_layer.bn.gamma[j] = cfg.output_gamma_init;
    p.layers.push_back(std::move(out_layer));
    return p;
}

struct LayerCache {
    DenseTensor input;   // activations entering the block (B x in)
    DenseTensor xhat;    // normalized pre-activations (B x out)
    DenseTensor invstd;  // 1/sqrt(batch_var + eps) per feature
    DenseTensor mask;    // ReLU mask, empty for the output block
};

struct ForwardCache {
    std::size_t batch = 0;
    DenseTensor input_xhat;    // input-BN normalized values, empty if disabled
    DenseTensor input_invstd;
    std::vector<LayerCache> layers;
};

namespace detail {

/// Training-mode batch norm over features: returns gamma*xhat + beta in
/// `out`, records xhat and invstd, and advances the moving statistics.
inline void bn_forward_train(const DenseTensor& a, BatchNormParams& bn, double eps, double momentum,
                             DenseTensor& out, DenseTensor& xhat, DenseTensor& invstd) {
    const std::size_t B = a.rows(), F = a.cols();
    xhat = DenseTensor::matrix(B, F);
    invstd = DenseTensor::vector(F);
    for (std::size_t j = 0; j < F; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < B; ++i) mean += a.at(i, j);
        mean /= static_cast<double>(B);
        double var = 0.0;
        for (std::size_t i = 0; i < B; ++i) {
            double c = a.at(i, j) - mean;
            var += c * c;
        }
        var /= static_cast<double>(B);
        double is = 1.0 / std::sqrt(var + eps);
        invstd[j] = is;
        double g = bn.gamma[j], be = bn.beta[j];
        for (std::size_t i = 0; i < B; ++i) {
            double xh = (a.at(i, j) - mean) * is;
            xhat.at(i, j) = xh;
            out.at(i, j) = g * xh + be;
        }
        bn.moving_mean[j] = momentum * bn.moving_mean[j] + (1.0 - momentum) * mean;
        bn.moving_var[j] = momentum * bn.moving_var[j] + (1.0 - momentum) * var;
    }
}

inline void bn_forward_eval(const DenseTensor& a, const BatchNormParams& bn, double eps,
                            DenseTensor& out) {
    const std::size_t B = a.rows(), F = a.cols();
    for (std::size_t j = 0; j < F; ++j) {
        double is = 1.0 / std::sqrt(bn.moving_var[j] + eps);
        double g = bn.gamma[j], be = bn.beta[j], m = bn.moving_mean[j];
        for (std::size_t i = 0; i < B; ++i) out.at(i, j) = g * ((a.at(i, j) - m) * is) + be;
    }
}

/// Reverse of bn_forward_train. Consumes dY, emits dA; gradients flow
/// through the batch mean and variance.
inline void bn_backward(const DenseTensor& dY, const DenseTensor& xhat, const DenseTensor& invstd,
                        const BatchNormParams& bn, DenseTensor& dgamma, DenseTensor& dbeta,
                        DenseTensor& dA) {
    const std::size_t B = dY.rows(), F = dY.cols();
    const double invB = 1.0 / static_cast<double>(B);
    for (std::size_t j = 0; j < F; ++j) {
        double g = bn.gamma[j];
        double sum_d = 0.0, sum_dx = 0.0, dg = 0.0;
        for (std::size_t i = 0; i < B; ++i) {
            double dy = dY.at(i, j);
            double dxh = dy * g;
            dg += dy * xhat.at(i, j);
            sum_d += dxh;
            sum_dx += dxh * xhat.at(i, j);
        }
        dgamma[j] += dg;
        double db = 0.0;
        for (std::size_t i = 0; i < B; ++i) db += dY.at(i, j);
        dbeta[j] += db;
        double is = invstd[j];
        for (std::size_t i = 0; i < B; ++i) {
            double dxh = dY.at(i, j) * g;
            dA.at(i, j) = is * (dxh - invB * sum_d - xhat.at(i, j) * invB * sum_dx);
        }
    }
}

}  // namespace detail

/// Training-mode forward pass. Requires B >= 2 so batch statistics exist;
/// updates the moving statistics in `params` as a side effect.
inline DenseTensor forward_train(SubNetParams& params, const DenseTensor& x_batch,
                                 ForwardCache& cache) {
    const NetConfig& cfg = params.cfg;
    require(x_batch.rank() == 2 && x_batch.cols() == cfg.input_dim,
            "forward_train: input must be B x input_dim");
    require(x_batch.rows() >= 2, "forward_train: batch size must be >= 2 in training mode");
    const std::size_t B = x_batch.rows();
    cache.batch = B;
    cache.layers.clear();
    cache.layers.reserve(params.layers.size());

    DenseTensor h = x_batch;
    if (cfg.input_bn) {
        DenseTensor normed = DenseTensor::matrix(B, cfg.input_dim);
        detail::bn_forward_train(x_batch, params.input_bn, cfg.bn_epsilon, cfg.bn_momentum, normed,
                                 cache.input_xhat, cache.input_invstd);
        h = std::move(normed);
    }

    for (auto& layer : params.layers) {
        LayerCache lc;
        lc.input = h;
        const std::size_t out = layer.W.cols();
        DenseTensor a = DenseTensor::matrix(B, out);
        detail::mat(a).noalias() = detail::mat(h) * detail::mat(layer.W);
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < out; ++j) a.at(i, j) += layer.b[j];

        DenseTensor y = DenseTensor::matrix(B, out);
        detail::bn_forward_train(a, layer.bn, cfg.bn_epsilon, cfg.bn_momentum, y, lc.xhat,
                                 lc.invstd);

        if (layer.relu) {
            lc.mask = DenseTensor::matrix(B, out);
            for (std::size_t i = 0; i < y.size(); ++i) {
                // Subgradient at exactly 0 is defined as 0.
                bool on = y[i] > 0.0;
                lc.mask[i] = on ? 1.0 : 0.0;
                if (!on) y[i] = 0.0;
            }
        }
        if (layer.has_skip)
            detail::mat(y).noalias() += detail::mat(lc.input) * detail::mat(layer.skip);
        cache.layers.push_back(std::move(lc));
        h = std::move(y);
    }
    return h;
}

/// Inference-mode forward pass using moving statistics; B = 1 is allowed and
/// no state is mutated.
inline DenseTensor forward_eval(const SubNetParams& params, const DenseTensor& x_batch) {
    const NetConfig& cfg = params.cfg;
    require(x_batch.rank() == 2 && x_batch.cols() == cfg.input_dim,
            "forward_eval: input must be B x input_dim");
    const std::size_t B = x_batch.rows();

    DenseTensor h = x_batch;
    if (cfg.input_bn) {
        DenseTensor normed = DenseTensor::matrix(B, cfg.input_dim);
        detail::bn_forward_eval(x_batch, params.input_bn, cfg.bn_epsilon, normed);
        h = std::move(normed);
    }
    for (const auto& layer : params.layers) {
        const std::size_t out = layer.W.cols();
        DenseTensor a = DenseTensor::matrix(B, out);
        detail::mat(a).noalias() = detail::mat(h) * detail::mat(layer.W);
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < out; ++j) a.at(i, j) += layer.b[j];
        DenseTensor y = DenseTensor::matrix(B, out);
        detail::bn_forward_eval(a, layer.bn, cfg.bn_epsilon, y);
        if (layer.relu)
            for (std::size_t i = 0; i < y.size(); ++i)
                if (y[i] <= 0.0) y[i] = 0.0;
        if (layer.has_skip) detail::mat(y).noalias() += detail::mat(h) * detail::mat(layer.skip);
        h = std::move(y);
    }
    return h;
}

/// Gradient container with the same structure as the parameters it mirrors.
inline SubNetParams zero_like(const SubNetParams& p) {
    SubNetParams g;
    g.cfg = p.cfg;
    if (p.cfg.input_bn) {
        g.input_bn = BatchNormParams(p.input_bn.gamma.size());
        for (std::size_t i = 0; i < g.input_bn.gamma.size(); ++i) g.input_bn.gamma[i] = 0.0;
    }
    for (const auto& layer : p.layers) {
        DenseLayerParams gl(layer.W.rows(), layer.W.cols());
        for (std::size_t i = 0; i < gl.bn.gamma.size(); ++i) gl.bn.gamma[i] = 0.0;
        if (layer.has_skip) {
            gl.skip = DenseTensor::matrix(layer.skip.rows(), layer.skip.cols(), 0.0);
            gl.has_skip = true;
        }
        gl.relu = layer.relu;
        g.layers.push_back(std::move(gl));
    }
    return g;
}

/// Exact reverse-mode pass for forward_train. `grad_z` is dL/d(output);
/// parameter gradients are accumulated into `grads` and the gradient with
/// respect to x_batch is returned.
inline DenseTensor backward(const SubNetParams& params, const ForwardCache& cache,
                            const DenseTensor& grad_z, SubNetParams& grads) {
    const NetConfig& cfg = params.cfg;
    require(cache.layers.size() == params.layers.size(), "backward: cache does not match params");
    const std::size_t B = cache.batch;
    require(grad_z.rank() == 2 && grad_z.rows() == B && grad_z.cols() == cfg.out_dim(),
            "backward: grad_z shape mismatch");

    DenseTensor dh = grad_z;
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const auto& layer = params.layers[li];
        const auto& lc = cache.layers[li];
        auto& gl = grads.layers[li];
        const std::size_t in = layer.W.rows();

        DenseTensor dskip_input;
        if (layer.has_skip) {
            detail::mat(gl.skip).noalias() +=
                detail::mat(lc.input).transpose() * detail::mat(dh);
            dskip_input = DenseTensor::matrix(B, in);
            detail::mat(dskip_input).noalias() = detail::mat(dh) * detail::mat(layer.skip).transpose();
        }

        DenseTensor dY = std::move(dh);
        if (layer.relu)
            for (std::size_t i = 0; i < dY.size(); ++i) dY[i] *= lc.mask[i];

        DenseTensor dA = DenseTensor::matrix(B, layer.W.cols());
        detail::bn_backward(dY, lc.xhat, lc.invstd, layer.bn, gl.bn.gamma, gl.bn.beta, dA);

        detail::mat(gl.W).noalias() += detail::mat(lc.input).transpose() * detail::mat(dA);
        for (std::size_t j = 0; j < layer.W.cols(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < B; ++i) s += dA.at(i, j);
            gl.b[j] += s;
        }
        dh = DenseTensor::matrix(B, in);
        detail::mat(dh).noalias() = detail::mat(dA) * detail::mat(layer.W).transpose();
        if (layer.has_skip)
            for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dskip_input[i];
    }

    if (cfg.input_bn) {
        DenseTensor dx = DenseTensor::matrix(B, cfg.input_dim);
        detail::bn_backward(dh, cache.input_xhat, cache.input_invstd, params.input_bn,
                            grads.input_bn.gamma, grads.input_bn.beta, dx);
        return dx;
    }
    return dh;
}

}  // namespace deepbsde
