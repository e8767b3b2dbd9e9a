#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kergnn/error.hpp"
#include "kergnn/filter.hpp"
#include "kergnn/graph.hpp"
#include "kergnn/kernel.hpp"

namespace kergnn {

/// y = weight * x + bias; weight is (out x in).
struct Affine {
    Matrix weight;
    Vector bias;

    Index in_dim() const { return weight.cols(); }
    Index out_dim() const { return weight.rows(); }
};

/// Architecture hyperparameters. Dataset-dependent widths (input_dim,
/// num_classes) are filled in by the caller.
struct ModelConfig {
    Index input_dim = 0;
    int num_classes = 2;
    /// Width of the optional linear map applied to raw attributes; 0 disables it.
    Index input_map_dim = 0;
    /// Number of filters (output width) of each KerGNN layer.
    std::vector<Index> layer_filters{16};
    /// Filter node count per layer; a single entry applies to every layer.
    std::vector<Index> filter_nodes{6};
    Index k_max = 10;
    int hops = 1;
    RWKernelConfig kernel = RWKernelConfig::uniform(2);
    /// Hidden widths of the classifier head; empty means a single affine map.
    std::vector<Index> mlp_hidden{32};
    double dropout = 0.2;
    /// ReLU on kernel outputs. Off by default: the kernel is the nonlinearity.
    bool post_relu = false;

    Index nodes_of_layer(std::size_t l) const {
        return filter_nodes.size() == 1 ? filter_nodes[0] : filter_nodes.at(l);
    }

    void validate() const {
        auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
        if (input_dim < 1) fail("input_dim must be >= 1");
        if (num_classes < 1) fail("num_classes must be >= 1");
        if (input_map_dim < 0) fail("input_map_dim must be >= 0");
        for (auto d : layer_filters) {
            if (d < 1) fail("every layer needs at least one filter");
        }
        if (!layer_filters.empty()) {
            if (filter_nodes.empty()) fail("filter_nodes must not be empty");
            if (filter_nodes.size() != 1 && filter_nodes.size() != layer_filters.size()) {
                fail("filter_nodes must have one entry or one per layer");
            }
            for (auto n : filter_nodes) {
                if (n < 1) fail("filter_nodes must be >= 1");
            }
        }
        if (k_max < 1) fail("k_max must be >= 1");
        if (hops < 1) fail("hops must be >= 1");
        for (auto h : mlp_hidden) {
            if (h < 1) fail("mlp hidden widths must be >= 1");
        }
        if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
        try {
            kernel.validate();
        } catch (const ArgumentError& e) {
            fail(e.what());
        }
    }
};

struct KerGNNLayer {
    std::vector<GraphFilter> filters;
    RWKernelConfig kernel;
    /// One (filter nodes x k_max) matrix per filter for the deep variant, else empty.
    std::vector<Matrix> deep_weights;
    int hops = 1;
    Index k_max = 10;
    bool post_relu = false;

    Index in_dim() const { return filters.empty() ? 0 : filters.front().attr_dim(); }
    Index out_dim() const { return static_cast<Index>(filters.size()); }
    Index filter_nodes() const { return filters.empty() ? 0 : filters.front().n_nodes(); }
    const Matrix* deep_weights_of(std::size_t i) const {
        return kernel.variant == KernelVariant::deep ? &deep_weights[i] : nullptr;
    }
};

struct ModelParams {
    Index input_dim = 0;
    std::optional<Affine> input_map;
    std::vector<KerGNNLayer> layers;
    std::vector<Affine> mlp;
    double dropout = 0.0;

    Index layer0_dim() const { return input_map ? input_map->out_dim() : input_dim; }
    Index readout_dim() const {
        Index d = layer0_dim();
        for (const auto& l : layers) d += l.out_dim();
        return d;
    }
    int num_classes() const { return mlp.empty() ? 0 : static_cast<int>(mlp.back().out_dim()); }

    /// Same shapes, every tensor zero. Used as a gradient accumulator.
    ModelParams zeros_like() const {
        ModelParams z = *this;
        if (z.input_map) {
            z.input_map->weight.setZero();
            z.input_map->bias.setZero();
        }
        for (auto& l : z.layers) {
            for (auto& f : l.filters) {
                f.adjacency.setZero();
                f.attributes.setZero();
            }
            for (auto& w : l.deep_weights) w.setZero();
        }
        for (auto& a : z.mlp) {
            a.weight.setZero();
            a.bias.setZero();
        }
        return z;
    }

    /// Checks the width chain input -> layers -> readout -> head.
    void validate() const {
        Index width = input_dim;
        if (input_map) {
            detail::require(input_map->in_dim() == input_dim, "input map width mismatch");
            detail::require(input_map->bias.size() == input_map->out_dim(), "input map bias size mismatch");
            width = input_map->out_dim();
        }
        for (const auto& l : layers) {
            detail::require(!l.filters.empty(), "layer without filters");
            for (const auto& f : l.filters) {
                f.validate();
                detail::require(f.attr_dim() == width, "filter attribute width does not match layer input width");
                detail::require(f.n_nodes() == l.filter_nodes(), "filters of a layer must share their node count");
            }
            if (l.kernel.variant == KernelVariant::deep) {
                detail::require(l.deep_weights.size() == l.filters.size(), "one deep weight matrix per filter");
                for (const auto& w : l.deep_weights) {
                    detail::require(w.rows() == l.filter_nodes() && w.cols() == l.k_max, "deep weight shape mismatch");
                }
            }
            width = l.out_dim();
        }
        detail::require(!mlp.empty(), "classifier head is empty");
        Index in = readout_dim();
        for (const auto& a : mlp) {
            detail::require(a.in_dim() == in, "classifier layer width mismatch");
            detail::require(a.bias.size() == a.out_dim(), "classifier bias size mismatch");
            in = a.out_dim();
        }
    }
};

/// Flat view of one trainable tensor. `symmetric` marks filter adjacencies,
/// whose (i, j) and (j, i) slots hold one shared parameter.
template <typename T>
struct TensorView {
    std::string name;
    std::span<T> data;
    Index rows = 0;
    Index cols = 0;
    bool symmetric = false;
};

namespace model_detail {

template <typename T, typename M>
TensorView<T> view(std::string name, M& m, bool symmetric = false) {
    return {std::move(name), std::span<T>(m.data(), static_cast<std::size_t>(m.size())), m.rows(), m.cols(), symmetric};
}

template <typename T, typename P>
std::vector<TensorView<T>> tensor_views(P& p) {
    std::vector<TensorView<T>> out;
    if (p.input_map) {
        out.push_back(view<T>("input_map.weight", p.input_map->weight));
        out.push_back(view<T>("input_map.bias", p.input_map->bias));
    }
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& layer = p.layers[l];
        const std::string pre = "layer" + std::to_string(l + 1) + ".";
        for (std::size_t i = 0; i < layer.filters.size(); ++i) {
            const std::string fp = pre + "filter" + std::to_string(i) + ".";
            out.push_back(view<T>(fp + "adjacency", layer.filters[i].adjacency, true));
            out.push_back(view<T>(fp + "attributes", layer.filters[i].attributes));
        }
        for (std::size_t i = 0; i < layer.deep_weights.size(); ++i) {
            out.push_back(view<T>(pre + "deep_weights" + std::to_string(i), layer.deep_weights[i]));
        }
    }
    for (std::size_t i = 0; i < p.mlp.size(); ++i) {
        out.push_back(view<T>("mlp" + std::to_string(i) + ".weight", p.mlp[i].weight));
        out.push_back(view<T>("mlp" + std::to_string(i) + ".bias", p.mlp[i].bias));
    }
    return out;
}

} // namespace model_detail

/// Every trainable tensor in a fixed order (input map, layers, head).
inline std::vector<TensorView<double>> tensor_views(ModelParams& p) { return model_detail::tensor_views<double>(p); }
inline std::vector<TensorView<const double>> tensor_views(const ModelParams& p) {
    return model_detail::tensor_views<const double>(p);
}

/// acc += scale * g, tensor by tensor.
inline void accumulate(ModelParams& acc, const ModelParams& g, double scale = 1.0) {
    auto a = tensor_views(acc);
    auto b = tensor_views(g);
    detail::require(a.size() == b.size(), "accumulate: parameter structure mismatch");
    for (std::size_t t = 0; t < a.size(); ++t) {
        detail::require(a[t].data.size() == b[t].data.size(), "accumulate: tensor size mismatch");
        for (std::size_t i = 0; i < a[t].data.size(); ++i) a[t].data[i] += scale * b[t].data[i];
    }
}

inline std::size_t num_parameters(const ModelParams& p) {
    std::size_t n = 0;
    for (const auto& t : tensor_views(p)) {
        // symmetric tensors expose n*n slots but only the strict upper triangle is free
        n += t.symmetric ? static_cast<std::size_t>(t.rows * (t.rows - 1) / 2) : t.data.size();
    }
    return n;
}

/// Random initialization:
///   filter attributes ~ Normal(0, 1/sqrt(d_in)), filter adjacency upper
///   triangle ~ Uniform[0, 1), affine maps ~ Uniform(+-1/sqrt(fan_in)),
///   deep weights = 1.
inline ModelParams init_params(const ModelConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    auto affine = [&](Index in, Index out) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-bound, bound);
        Affine a{Matrix(out, in), Vector(out)};
        for (Index r = 0; r < out; ++r) {
            for (Index c = 0; c < in; ++c) a.weight(r, c) = u(rng);
        }
        for (Index r = 0; r < out; ++r) a.bias(r) = u(rng);
        return a;
    };

    ModelParams p;
    p.input_dim = cfg.input_dim;
    p.dropout = cfg.dropout;
    Index width = cfg.input_dim;
    if (cfg.input_map_dim > 0) {
        p.input_map = affine(cfg.input_dim, cfg.input_map_dim);
        width = cfg.input_map_dim;
    }
    for (std::size_t l = 0; l < cfg.layer_filters.size(); ++l) {
        KerGNNLayer layer;
        layer.kernel = cfg.kernel;
        layer.hops = cfg.hops;
        layer.k_max = cfg.k_max;
        layer.post_relu = cfg.post_relu;
        const Index n = cfg.nodes_of_layer(l);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(width)));
        for (Index i = 0; i < cfg.layer_filters[l]; ++i) {
            GraphFilter f{Matrix::Zero(n, n), Matrix(n, width)};
            for (Index r = 0; r < n; ++r) {
                for (Index c = r + 1; c < n; ++c) {
                    f.adjacency(r, c) = unif(rng);
                    f.adjacency(c, r) = f.adjacency(r, c);
                }
            }
            for (Index r = 0; r < n; ++r) {
                for (Index c = 0; c < width; ++c) f.attributes(r, c) = normal(rng);
            }
            layer.filters.push_back(std::move(f));
            if (cfg.kernel.variant == KernelVariant::deep) layer.deep_weights.push_back(Matrix::Ones(n, cfg.k_max));
        }
        width = cfg.layer_filters[l];
        p.layers.push_back(std::move(layer));
    }
    Index in = p.readout_dim();
    for (Index h : cfg.mlp_hidden) {
        p.mlp.push_back(affine(in, h));
        in = h;
    }
    p.mlp.push_back(affine(in, cfg.num_classes));
    return p;
}

enum class Mode { train, eval };

/// Intermediate values of one forward pass, kept for the backward pass.
struct ForwardCache {
    /// feats[0] = (mapped) input attributes, feats[l] = output of layer l; rows are nodes.
    std::vector<Matrix> feats;
    /// Kernel outputs before the optional post-ReLU, per layer (index l-1).
    std::vector<Matrix> kernel_out;
    /// subgraphs[l-1][v] = neighborhood of v used by layer l.
    std::vector<std::vector<Subgraph>> subgraphs;
    Vector readout;
    /// Input of each head layer (after activation and dropout).
    std::vector<Vector> head_inputs;
    /// Pre-activation of each hidden head layer.
    std::vector<Vector> head_pre;
    /// Inverted-dropout multipliers per hidden head layer (empty in eval mode).
    std::vector<Vector> dropout_masks;
    Vector logits;
};

/// One KerGNN layer: output(v, i) = K(neighborhood of v, filter i), with the
/// neighborhood carrying the current features `feats`.
inline Matrix layer_forward(const Graph& g, const Matrix& feats, const KerGNNLayer& layer,
                            std::vector<Subgraph>* subgraphs_out = nullptr) {
    if (feats.cols() != layer.in_dim()) {
        throw ArgumentError("layer_forward: feature width " + std::to_string(feats.cols()) +
                            " != filter attribute width " + std::to_string(layer.in_dim()));
    }
    detail::require(feats.rows() == g.num_nodes(), "layer_forward: one feature row per node required");
    const Index n = g.num_nodes();
    Matrix out(n, layer.out_dim());
    if (subgraphs_out) {
        subgraphs_out->clear();
        subgraphs_out->reserve(static_cast<std::size_t>(n));
    }
    for (Index v = 0; v < n; ++v) {
        Subgraph sub = extract_subgraph(g, feats, v, layer.hops, layer.k_max);
        for (std::size_t i = 0; i < layer.filters.size(); ++i) {
            out(v, static_cast<Index>(i)) = rw_kernel(sub, layer.filters[i], layer.kernel, layer.deep_weights_of(i));
        }
        if (subgraphs_out) subgraphs_out->push_back(std::move(sub));
    }
    return out;
}

inline Matrix layer_activation(const Matrix& kernel_out, bool post_relu) {
    return post_relu ? Matrix(kernel_out.cwiseMax(0.0)) : kernel_out;
}

/// Full forward pass. `rng` is required in train mode when dropout > 0.
inline ForwardCache model_forward_cached(const Graph& g, const ModelParams& params, Mode mode,
                                         std::mt19937_64* rng = nullptr) {
    if (g.attr_dim() != params.input_dim) {
        throw ArgumentError("model_forward: graph attribute width " + std::to_string(g.attr_dim()) +
                            " != model input width " + std::to_string(params.input_dim));
    }
    ForwardCache c;
    Matrix f0 = g.attributes();
    if (params.input_map) {
        f0 = (g.attributes() * params.input_map->weight.transpose()).rowwise() +
             params.input_map->bias.transpose();
    }
    c.feats.push_back(std::move(f0));
    for (const auto& layer : params.layers) {
        c.subgraphs.emplace_back();
        c.kernel_out.push_back(layer_forward(g, c.feats.back(), layer, &c.subgraphs.back()));
        c.feats.push_back(layer_activation(c.kernel_out.back(), layer.post_relu));
    }
    c.readout = Vector(params.readout_dim());
    Index off = 0;
    for (const auto& f : c.feats) {
        c.readout.segment(off, f.cols()) = f.colwise().sum().transpose();
        off += f.cols();
    }

    const bool drop = mode == Mode::train && params.dropout > 0.0;
    if (drop && rng == nullptr) throw ArgumentError("model_forward: train mode with dropout needs an rng");
    Vector h = c.readout;
    for (std::size_t i = 0; i < params.mlp.size(); ++i) {
        c.head_inputs.push_back(h);
        Vector z = params.mlp[i].weight * h + params.mlp[i].bias;
        if (i + 1 == params.mlp.size()) {
            c.logits = std::move(z);
            break;
        }
        h = z.cwiseMax(0.0);
        c.head_pre.push_back(std::move(z));
        if (drop) {
            std::bernoulli_distribution keep(1.0 - params.dropout);
            Vector mask(h.size());
            for (Index k = 0; k < h.size(); ++k) mask(k) = keep(*rng) ? 1.0 / (1.0 - params.dropout) : 0.0;
            h = h.cwiseProduct(mask);
            c.dropout_masks.push_back(std::move(mask));
        }
    }
    return c;
}

struct ModelOutput {
    Vector logits;
    std::vector<Matrix> per_layer_feats;
};

inline ModelOutput model_forward(const Graph& g, const ModelParams& params, Mode mode,
                                 std::mt19937_64* rng = nullptr) {
    auto c = model_forward_cached(g, params, mode, rng);
    return {std::move(c.logits), std::move(c.feats)};
}

inline int predict(const Graph& g, const ModelParams& params) {
    Index best = 0;
    model_forward_cached(g, params, Mode::eval).logits.maxCoeff(&best);
    return static_cast<int>(best);
}

/// Softmax cross-entropy and its gradient with respect to the logits.
inline double cross_entropy(const Vector& logits, int label, Vector* d_logits = nullptr) {
    detail::require(label >= 0 && label < logits.size(), "cross_entropy: label out of range");
    const double m = logits.maxCoeff();
    const Vector e = (logits.array() - m).exp();
    const double z = e.sum();
    if (d_logits) {
        *d_logits = e / z;
        (*d_logits)(label) -= 1.0;
    }
    return std::log(z) + m - logits(label);
}

/// Backpropagates d_logits through a cached forward pass, adding the
/// parameter gradients into `grad` (same structure as `params`).
inline void model_backward(const Graph& g, const ModelParams& params, const ForwardCache& c, const Vector& d_logits,
                           ModelParams& grad) {
    // classifier head
    Vector d_h = d_logits;
    for (std::size_t i = params.mlp.size(); i-- > 0;) {
        const auto& a = params.mlp[i];
        grad.mlp[i].weight.noalias() += d_h * c.head_inputs[i].transpose();
        grad.mlp[i].bias += d_h;
        Vector d_in = a.weight.transpose() * d_h;
        if (i == 0) {
            d_h = std::move(d_in);
            break;
        }
        // head_inputs[i] = dropout(relu(head_pre[i-1]))
        if (!c.dropout_masks.empty()) d_in = d_in.cwiseProduct(c.dropout_masks[i - 1]);
        d_h = d_in.cwiseProduct((c.head_pre[i - 1].array() > 0.0).cast<double>().matrix());
    }
    const Vector& d_readout = d_h;

    // readout: every node of layer l receives the same slice of d_readout
    std::vector<Matrix> d_feats(c.feats.size());
    Index off = 0;
    for (std::size_t l = 0; l < c.feats.size(); ++l) {
        const Index w = c.feats[l].cols();
        d_feats[l] = d_readout.segment(off, w).transpose().replicate(g.num_nodes(), 1);
        off += w;
    }

    for (std::size_t l = params.layers.size(); l-- > 0;) {
        const auto& layer = params.layers[l];
        auto& glayer = grad.layers[l];
        Matrix d_kernel = d_feats[l + 1];
        if (layer.post_relu) d_kernel = d_kernel.cwiseProduct((c.kernel_out[l].array() > 0.0).cast<double>().matrix());
        const bool need_input_grad = l > 0 || params.input_map.has_value();
        for (Index v = 0; v < g.num_nodes(); ++v) {
            const Subgraph& sub = c.subgraphs[l][static_cast<std::size_t>(v)];
            for (std::size_t i = 0; i < layer.filters.size(); ++i) {
                const double up = d_kernel(v, static_cast<Index>(i));
                if (up == 0.0) continue;
                const auto r = rw_kernel_grad(sub, layer.filters[i], layer.kernel, layer.deep_weights_of(i), need_input_grad);
                // one shared parameter per unordered pair: dK/dtheta_ij = G_ij + G_ji
                Matrix d_adj = 2.0 * r.grads.d_adjacency;
                d_adj.diagonal().setZero();
                glayer.filters[i].adjacency += up * d_adj;
                glayer.filters[i].attributes += up * r.grads.d_attributes;
                if (r.grads.d_deep_weights) glayer.deep_weights[i] += up * *r.grads.d_deep_weights;
                if (need_input_grad) {
                    for (Index s = 0; s < sub.size(); ++s) {
                        d_feats[l].row(sub.node_ids[static_cast<std::size_t>(s)]) += up * r.grads.d_subgraph_attributes.row(s);
                    }
                }
            }
        }
    }

    if (params.input_map) {
        grad.input_map->weight.noalias() += d_feats[0].transpose() * g.attributes();
        grad.input_map->bias += d_feats[0].colwise().sum().transpose();
    }
}

/// Cross-entropy of one labelled graph; gradients are added into `grad`.
inline double model_loss_and_grad(const Graph& g, int label, const ModelParams& params, Mode mode,
                                  std::mt19937_64* rng, ModelParams& grad, double scale = 1.0) {
    const auto c = model_forward_cached(g, params, mode, rng);
    Vector d_logits;
    const double loss = cross_entropy(c.logits, label, &d_logits);
    model_backward(g, params, c, scale * d_logits, grad);
    return loss;
}

namespace model_detail {

inline std::string shortest(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

} // namespace model_detail

/// Writes `layer<l>_filter<i>.dot` per filter (l from 1). Edges keep
/// max(adjacency, 0) > 0 with the pruned value as `weight`; node `width`
/// is the L2 norm of the node's attribute row. Returns the written paths.
inline std::vector<std::filesystem::path> export_filters(const ModelParams& params,
                                                         const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw IoError("cannot create output directory " + out_dir.string());
    }
    using model_detail::shortest;
    std::vector<std::filesystem::path> written;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        for (std::size_t i = 0; i < layer.filters.size(); ++i) {
            const auto& f = layer.filters[i];
            const std::string id = "layer" + std::to_string(l + 1) + "_filter" + std::to_string(i);
            const auto path = out_dir / (id + ".dot");
            std::ofstream out(path);
            if (!out) throw IoError("cannot write " + path.string());
            out << "graph " << id << " {\n";
            out << "  node [shape=circle, fixedsize=true];\n";
            for (Index v = 0; v < f.n_nodes(); ++v) {
                const double size = f.attributes.row(v).norm();
                out << "  " << v << " [width=" << shortest(size) << ", height=" << shortest(size) << "];\n";
            }
            for (Index a = 0; a < f.n_nodes(); ++a) {
                for (Index b = a + 1; b < f.n_nodes(); ++b) {
                    const double w = std::max(f.adjacency(a, b), 0.0);
                    if (w > 0.0) out << "  " << a << " -- " << b << " [weight=" << shortest(w) << "];\n";
                }
            }
            out << "}\n";
            if (!out) throw IoError("error while writing " + path.string());
            written.push_back(path);
        }
    }
    return written;
}

} // namespace kergnn
