#pragma once

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deepbsde/solver.hpp"

namespace deepbsde {

namespace detail {

inline nlohmann::json net_config_to_json(const NetConfig& c) {
    return nlohmann::json{
        {"input_dim", c.input_dim},
        {"hidden_layers", c.hidden_layers},
        {"hidden_width", c.hidden_width},
        {"output_dim", c.output_dim},
        {"style", c.style == NetStyle::residual ? "residual" : "plain"},
        {"bn_epsilon", c.bn_epsilon},
        {"bn_momentum", c.bn_momentum},
        {"input_bn", c.input_bn},
        {"init", c.init == WeightInit::xavier_normal ? "xavier_normal" : "xavier_uniform"},
        {"output_gamma_init", c.output_gamma_init},
    };
}

inline NetConfig net_config_from_json(const nlohmann::json& j) {
    NetConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.hidden_layers = j.at("hidden_layers").get<std::size_t>();
    c.hidden_width = j.at("hidden_width").get<std::size_t>();
    c.output_dim = j.at("output_dim").get<std::size_t>();
    std::string style = j.at("style").get<std::string>();
    require(style == "plain" || style == "residual", "checkpoint: unknown net style " + style);
    c.style = style == "residual" ? NetStyle::residual : NetStyle::plain;
    c.bn_epsilon = j.at("bn_epsilon").get<double>();
    c.bn_momentum = j.at("bn_momentum").get<double>();
    c.input_bn = j.at("input_bn").get<bool>();
    std::string init = j.at("init").get<std::string>();
    require(init == "xavier_uniform" || init == "xavier_normal",
            "checkpoint: unknown init " + init);
    c.init = init == "xavier_normal" ? WeightInit::xavier_normal : WeightInit::xavier_uniform;
    if (j.contains("output_gamma_init")) c.output_gamma_init = j.at("output_gamma_init").get<double>();
    return c;
}

inline nlohmann::json tensor_to_json(const DenseTensor& t) {
    return nlohmann::json{{"shape", t.shape()}, {"data", t.storage()}};
}

inline void tensor_from_json(const nlohmann::json& j, DenseTensor& t) {
    auto shape = j.at("shape").get<std::vector<std::size_t>>();
    auto data = j.at("data").get<std::vector<double>>();
    DenseTensor loaded(shape);
    require(loaded.size() == data.size(), "checkpoint: tensor data length mismatch");
    std::copy(data.begin(), data.end(), loaded.data());
    t = std::move(loaded);
}

}  // namespace detail

/// Serializes every tensor of the model (trainable plus moving statistics)
/// with its name and shape. Doubles survive the JSON round trip bit-exactly.
inline nlohmann::json model_to_json(ModelParams& params, const NetConfig& net_cfg) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["net_config"] = detail::net_config_to_json(net_cfg);
    j["region_mode"] = params.region_mode;
    j["subnet_count"] = params.subnets.size();
    nlohmann::json tensors = nlohmann::json::object();
    visit_all(params, [&](const TensorRef& r) { tensors[r.name] = detail::tensor_to_json(*r.tensor); });
    j["tensors"] = std::move(tensors);
    return j;
}

inline void save_checkpoint(const std::string& path, ModelParams& params, const NetConfig& net_cfg) {
    std::ofstream out(path);
    require(static_cast<bool>(out), "save_checkpoint: cannot open " + path);
    out << model_to_json(params, net_cfg).dump(1) << "\n";
    require(static_cast<bool>(out), "save_checkpoint: write failed for " + path);
}

/// Rebuilds a model with the stored NetConfig, then overwrites every tensor
/// from the file. Shapes are validated tensor by tensor.
inline std::pair<ModelParams, NetConfig> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "load_checkpoint: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("load_checkpoint: malformed JSON in " + path + ": " + e.what());
    }
    require(j.at("schema_version").get<int>() == 1, "load_checkpoint: unsupported schema version");

    NetConfig net_cfg = detail::net_config_from_json(j.at("net_config"));
    ModelParams params;
    params.region_mode = j.at("region_mode").get<bool>();
    std::size_t subnet_count = j.at("subnet_count").get<std::size_t>();

    RngStream scratch = make_rng(0, 0);
    if (params.region_mode) {
        NetConfig ucfg = net_cfg;
        ucfg.output_dim = 1;
        params.u_net = init_subnet(ucfg, scratch);
        params.z_net = init_subnet(net_cfg, scratch);
    } else {
        params.z0 = DenseTensor::vector(net_cfg.input_dim);
    }
    for (std::size_t n = 0; n < subnet_count; ++n)
        params.subnets.push_back(init_subnet(net_cfg, scratch));

    const auto& tensors = j.at("tensors");
    visit_all(params, [&](const TensorRef& r) {
        require(tensors.contains(r.name), "load_checkpoint: missing tensor " + r.name);
        DenseTensor loaded;
        detail::tensor_from_json(tensors.at(r.name), loaded);
        require(loaded.same_shape(*r.tensor),
                "load_checkpoint: shape mismatch for tensor " + r.name);
        *r.tensor = std::move(loaded);
    });
    return {std::move(params), net_cfg};
}

}  // namespace deepbsde
