#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "kergnn/config.hpp"
#include "kergnn/error.hpp"
#include "kergnn/model.hpp"

namespace kergnn {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "kergnn-checkpoint";

struct Checkpoint {
    ModelParams params;
    TrainConfig config;
    std::uint64_t seed = 0;
};

namespace ckpt_detail {

template <typename M>
json matrix_to_json(const M& m) {
    json data = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    }
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Index>();
    const auto cols = j.at("cols").get<Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols)) {
        throw FormatError("checkpoint tensor size does not match its shape");
    }
    Matrix m(rows, cols);
    std::size_t k = 0;
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
    }
    return m;
}

inline json affine_to_json(const Affine& a) {
    return json{{"weight", matrix_to_json(a.weight)}, {"bias", matrix_to_json(Matrix(a.bias))}};
}

inline Affine affine_from_json(const json& j) {
    Matrix b = matrix_from_json(j.at("bias"));
    if (b.cols() != 1) throw FormatError("checkpoint bias must be a column");
    return {matrix_from_json(j.at("weight")), Vector(b.col(0))};
}

} // namespace ckpt_detail

inline json model_to_json(const ModelParams& p) {
    using namespace ckpt_detail;
    json layers = json::array();
    for (const auto& l : p.layers) {
        json filters = json::array();
        for (const auto& f : l.filters) {
            filters.push_back({{"adjacency", matrix_to_json(f.adjacency)}, {"attributes", matrix_to_json(f.attributes)}});
        }
        json deep = json::array();
        for (const auto& w : l.deep_weights) deep.push_back(matrix_to_json(w));
        layers.push_back({{"walk_steps", l.kernel.max_steps},
                          {"lambdas", l.kernel.lambdas},
                          {"kernel", to_string(l.kernel.variant)},
                          {"normalize", l.kernel.normalize},
                          {"hops", l.hops},
                          {"k_max", l.k_max},
                          {"post_relu", l.post_relu},
                          {"filters", std::move(filters)},
                          {"deep_weights", std::move(deep)}});
    }
    json mlp = json::array();
    for (const auto& a : p.mlp) mlp.push_back(affine_to_json(a));
    return json{{"input_dim", p.input_dim},
                {"input_map", p.input_map ? affine_to_json(*p.input_map) : json(nullptr)},
                {"layers", std::move(layers)},
                {"mlp", std::move(mlp)},
                {"dropout", p.dropout}};
}

inline ModelParams model_from_json(const json& j) {
    using namespace ckpt_detail;
    ModelParams p;
    p.input_dim = j.at("input_dim").get<Index>();
    if (!j.at("input_map").is_null()) p.input_map = affine_from_json(j.at("input_map"));
    for (const auto& jl : j.at("layers")) {
        KerGNNLayer l;
        l.kernel.max_steps = jl.at("walk_steps").get<int>();
        l.kernel.lambdas = jl.at("lambdas").get<std::vector<double>>();
        l.kernel.variant = kernel_variant_from_string(jl.at("kernel").get<std::string>());
        l.kernel.normalize = jl.at("normalize").get<bool>();
        l.hops = jl.at("hops").get<int>();
        l.k_max = jl.at("k_max").get<Index>();
        l.post_relu = jl.at("post_relu").get<bool>();
        for (const auto& jf : jl.at("filters")) {
            l.filters.push_back({matrix_from_json(jf.at("adjacency")), matrix_from_json(jf.at("attributes"))});
        }
        for (const auto& jw : jl.at("deep_weights")) l.deep_weights.push_back(matrix_from_json(jw));
        p.layers.push_back(std::move(l));
    }
    for (const auto& ja : j.at("mlp")) p.mlp.push_back(affine_from_json(ja));
    p.dropout = j.at("dropout").get<double>();
    return p;
}

/// Self-describing JSON container: format tag, version, seed, config, tensors.
inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    const json doc{{"format", kCheckpointFormat},
                   {"version", kCheckpointVersion},
                   {"seed", ckpt.seed},
                   {"config", ckpt.config},
                   {"model", model_to_json(ckpt.params)}};
    out << doc.dump(1) << '\n';
    if (!out) throw IoError("error while writing checkpoint " + path.string());
}

/// Throws LoadError if unreadable, FormatError on corruption or a version mismatch.
inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const json doc = read_json_file(path);
    try {
        if (!doc.is_object() || doc.value("format", "") != kCheckpointFormat) {
            throw FormatError(path.string() + ": not a kergnn checkpoint");
        }
        const int version = doc.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version) +
                              " (expected " + std::to_string(kCheckpointVersion) + ")");
        }
        Checkpoint ckpt;
        ckpt.seed = doc.at("seed").get<std::uint64_t>();
        ckpt.config = doc.at("config").get<TrainConfig>();
        ckpt.params = model_from_json(doc.at("model"));
        ckpt.params.validate();
        return ckpt;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": malformed checkpoint: " + e.what());
    } catch (const ArgumentError& e) {
        throw FormatError(path.string() + ": inconsistent checkpoint: " + e.what());
    }
}

} // namespace kergnn
