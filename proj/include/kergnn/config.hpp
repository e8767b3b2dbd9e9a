#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kergnn/error.hpp"
#include "kergnn/kernel.hpp"
#include "kergnn/model.hpp"

namespace kergnn {

using json = nlohmann::json;

/// Optimization and architecture hyperparameters. Serialized as a flat JSON
/// object whose keys are the field names below.
struct TrainConfig {
    double lr = 0.01;
    int lr_half_every = 50;
    int epochs = 100;
    int batch_size = 32;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double dropout = 0.2;
    /// Max global gradient norm; 0 disables clipping.
    double grad_clip = 0.0;

    int layers = 1;
    int filters = 16;
    int filter_nodes = 6;
    int k_max = 10;
    int hops = 1;
    int walk_steps = 2;
    /// Empty means lambda_p = 1 for every p.
    std::vector<double> lambdas;
    std::string kernel = "plain";
    bool normalize = false;
    int input_map_dim = 0;
    int mlp_hidden = 32;
    /// Number of affine maps in the classifier head (>= 1).
    int mlp_layers = 2;
    bool post_relu = false;

    RWKernelConfig kernel_config() const {
        RWKernelConfig k = RWKernelConfig::uniform(walk_steps, kernel_variant_from_string(kernel));
        if (!lambdas.empty()) k.lambdas = lambdas;
        k.normalize = normalize;
        return k;
    }

    /// Throws ConfigError on any out-of-range field.
    void validate() const {
        auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
        if (!(lr > 0.0)) fail("lr must be > 0");
        if (lr_half_every < 1) fail("lr_half_every must be >= 1");
        if (epochs < 1) fail("epochs must be >= 1");
        if (batch_size < 1) fail("batch_size must be >= 1");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("adam betas must be in [0, 1)");
        if (!(eps > 0.0)) fail("eps must be > 0");
        if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
        if (grad_clip < 0.0) fail("grad_clip must be >= 0");
        if (layers < 0) fail("layers must be >= 0");
        if (filters < 1) fail("filters must be >= 1");
        if (filter_nodes < 1) fail("filter_nodes must be >= 1");
        if (k_max < 1) fail("k_max must be >= 1");
        if (hops < 1) fail("hops must be >= 1");
        if (walk_steps < 0) fail("walk_steps must be >= 0");
        if (input_map_dim < 0) fail("input_map_dim must be >= 0");
        if (mlp_hidden < 1) fail("mlp_hidden must be >= 1");
        if (mlp_layers < 1) fail("mlp_layers must be >= 1");
        try {
            kernel_config().validate();
        } catch (const ArgumentError& e) {
            fail(e.what());
        }
    }

    ModelConfig model_config(Index input_dim, int num_classes) const {
        ModelConfig m;
        m.input_dim = input_dim;
        m.num_classes = num_classes;
        m.input_map_dim = input_map_dim;
        m.layer_filters.assign(static_cast<std::size_t>(layers), filters);
        m.filter_nodes = {filter_nodes};
        m.k_max = k_max;
        m.hops = hops;
        m.kernel = kernel_config();
        m.mlp_hidden.assign(static_cast<std::size_t>(mlp_layers - 1), mlp_hidden);
        m.dropout = dropout;
        m.post_relu = post_relu;
        return m;
    }
};

inline void to_json(json& j, const TrainConfig& c) {
    j = json{{"lr", c.lr},
             {"lr_half_every", c.lr_half_every},
             {"epochs", c.epochs},
             {"batch_size", c.batch_size},
             {"seed", c.seed},
             {"beta1", c.beta1},
             {"beta2", c.beta2},
             {"eps", c.eps},
             {"dropout", c.dropout},
             {"grad_clip", c.grad_clip},
             {"layers", c.layers},
             {"filters", c.filters},
             {"filter_nodes", c.filter_nodes},
             {"k_max", c.k_max},
             {"hops", c.hops},
             {"walk_steps", c.walk_steps},
             {"lambdas", c.lambdas},
             {"kernel", c.kernel},
             {"normalize", c.normalize},
             {"input_map_dim", c.input_map_dim},
             {"mlp_hidden", c.mlp_hidden},
             {"mlp_layers", c.mlp_layers},
             {"post_relu", c.post_relu}};
}

namespace config_detail {

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = [] {
        std::set<std::string> k;
        const json defaults = TrainConfig{};
        for (auto& [key, _] : defaults.items()) k.insert(key);
        return k;
    }();
    return keys;
}

template <typename T>
void read(const json& j, const char* key, T& field) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(field);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

} // namespace config_detail

/// Reads a single (non-grid) config; missing keys keep their defaults,
/// unknown keys are rejected.
inline void from_json(const json& j, TrainConfig& c) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (auto& [key, _] : j.items()) {
        if (!config_detail::known_keys().count(key)) throw ConfigError("unknown config field '" + key + "'");
    }
    using config_detail::read;
    read(j, "lr", c.lr);
    read(j, "lr_half_every", c.lr_half_every);
    read(j, "epochs", c.epochs);
    read(j, "batch_size", c.batch_size);
    read(j, "seed", c.seed);
    read(j, "beta1", c.beta1);
    read(j, "beta2", c.beta2);
    read(j, "eps", c.eps);
    read(j, "dropout", c.dropout);
    read(j, "grad_clip", c.grad_clip);
    read(j, "layers", c.layers);
    read(j, "filters", c.filters);
    read(j, "filter_nodes", c.filter_nodes);
    read(j, "k_max", c.k_max);
    read(j, "hops", c.hops);
    read(j, "walk_steps", c.walk_steps);
    read(j, "lambdas", c.lambdas);
    read(j, "kernel", c.kernel);
    read(j, "normalize", c.normalize);
    read(j, "input_map_dim", c.input_map_dim);
    read(j, "mlp_hidden", c.mlp_hidden);
    read(j, "mlp_layers", c.mlp_layers);
    read(j, "post_relu", c.post_relu);
}

/// Expands a config document into a grid. Any field given as an array of
/// candidate values (for `lambdas`: an array of arrays) becomes a grid axis;
/// the cartesian product is enumerated with the first key varying slowest,
/// keys in lexicographic order.
inline std::vector<TrainConfig> expand_grid(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    std::vector<json> points{json::object()};
    for (auto& [key, value] : doc.items()) {
        const bool axis = value.is_array() &&
                          (key != "lambdas" || (!value.empty() && value.front().is_array()));
        std::vector<json> next;
        if (axis) {
            if (value.empty()) throw ConfigError("grid axis '" + key + "' is empty");
            for (const auto& p : points) {
                for (const auto& candidate : value) {
                    json q = p;
                    q[key] = candidate;
                    next.push_back(std::move(q));
                }
            }
        } else {
            for (auto p : points) {
                p[key] = value;
                next.push_back(std::move(p));
            }
        }
        points = std::move(next);
    }
    std::vector<TrainConfig> grid;
    grid.reserve(points.size());
    for (const auto& p : points) grid.push_back(p.get<TrainConfig>());
    return grid;
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": invalid JSON: " + e.what());
    }
}

inline std::vector<TrainConfig> load_config_grid(const std::filesystem::path& path) {
    return expand_grid(read_json_file(path));
}

} // namespace kergnn
