#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kergnn/error.hpp"

namespace kergnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Undirected attributed graph with dense 0/1 adjacency.
///
/// Immutable after construction. The constructor enforces symmetry, a zero
/// diagonal and one attribute row per node.
class Graph {
public:
    Graph() = default;

    Graph(Matrix adjacency, Matrix attributes, std::optional<int> graph_label = std::nullopt,
          std::optional<std::vector<int>> node_labels = std::nullopt)
        : adjacency_(std::move(adjacency)),
          attributes_(std::move(attributes)),
          graph_label_(graph_label),
          node_labels_(std::move(node_labels)) {
        const Index n = adjacency_.rows();
        detail::require(adjacency_.cols() == n, "graph adjacency must be square");
        detail::require(attributes_.rows() == n, "graph attributes must have one row per node");
        for (Index i = 0; i < n; ++i) {
            detail::require(adjacency_(i, i) == 0.0, "graph adjacency must have a zero diagonal");
            for (Index j = i + 1; j < n; ++j) {
                detail::require(adjacency_(i, j) == adjacency_(j, i), "graph adjacency must be symmetric");
                detail::require(adjacency_(i, j) == 0.0 || adjacency_(i, j) == 1.0,
                                "graph adjacency must be binary");
            }
        }
        if (node_labels_) {
            detail::require(static_cast<Index>(node_labels_->size()) == n,
                            "node_labels must have one entry per node");
        }
        neighbors_.resize(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                if (adjacency_(i, j) != 0.0) neighbors_[static_cast<std::size_t>(i)].push_back(j);
            }
        }
    }

    /// Builds a graph from an undirected edge list (0-indexed, each edge once or twice).
    static Graph from_edges(Index num_nodes, const std::vector<std::pair<Index, Index>>& edges,
                            Matrix attributes, std::optional<int> graph_label = std::nullopt,
                            std::optional<std::vector<int>> node_labels = std::nullopt) {
        Matrix adj = Matrix::Zero(num_nodes, num_nodes);
        for (auto [u, v] : edges) {
            detail::require(u >= 0 && u < num_nodes && v >= 0 && v < num_nodes, "edge endpoint out of range");
            detail::require(u != v, "self-loops are not allowed");
            adj(u, v) = 1.0;
            adj(v, u) = 1.0;
        }
        return Graph(std::move(adj), std::move(attributes), graph_label, std::move(node_labels));
    }

    Index num_nodes() const { return adjacency_.rows(); }
    Index attr_dim() const { return attributes_.cols(); }
    Index num_edges() const {
        Index m = 0;
        for (const auto& nb : neighbors_) m += static_cast<Index>(nb.size());
        return m / 2;
    }
    Index degree(Index v) const { return static_cast<Index>(neighbors_[static_cast<std::size_t>(v)].size()); }

    const Matrix& adjacency() const { return adjacency_; }
    const Matrix& attributes() const { return attributes_; }
    /// Sorted ascending.
    const std::vector<Index>& neighbors(Index v) const { return neighbors_[static_cast<std::size_t>(v)]; }
    const std::optional<int>& graph_label() const { return graph_label_; }
    const std::optional<std::vector<int>>& node_labels() const { return node_labels_; }

    /// Same structure and labels with a new attribute matrix.
    Graph with_attributes(Matrix attributes) const {
        return Graph(adjacency_, std::move(attributes), graph_label_, node_labels_);
    }

    /// Relabels nodes: node v of this graph becomes node perm[v] of the result.
    Graph permuted(const std::vector<Index>& perm) const {
        const Index n = num_nodes();
        detail::require(static_cast<Index>(perm.size()) == n, "permutation size mismatch");
        Matrix adj = Matrix::Zero(n, n);
        Matrix attrs(n, attr_dim());
        std::optional<std::vector<int>> labels;
        if (node_labels_) labels = std::vector<int>(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            const Index pi = perm[static_cast<std::size_t>(i)];
            attrs.row(pi) = attributes_.row(i);
            if (labels) (*labels)[static_cast<std::size_t>(pi)] = (*node_labels_)[static_cast<std::size_t>(i)];
            for (Index j = 0; j < n; ++j) adj(pi, perm[static_cast<std::size_t>(j)]) = adjacency_(i, j);
        }
        return Graph(std::move(adj), std::move(attrs), graph_label_, std::move(labels));
    }

private:
    Matrix adjacency_;
    Matrix attributes_;
    std::optional<int> graph_label_;
    std::optional<std::vector<int>> node_labels_;
    std::vector<std::vector<Index>> neighbors_;
};

struct Dataset {
    std::string name;
    std::vector<Graph> graphs;
    int num_classes = 0;
    Index attr_dim = 0;

    std::size_t size() const { return graphs.size(); }

    /// Checks width and label-range invariants; throws ArgumentError.
    void validate() const {
        for (const auto& g : graphs) {
            detail::require(g.attr_dim() == attr_dim, "graph attribute width differs from dataset attr_dim");
            if (g.graph_label()) {
                detail::require(*g.graph_label() >= 0 && *g.graph_label() < num_classes,
                                "graph label outside [0, num_classes)");
            }
        }
    }

    Dataset subset(const std::vector<std::size_t>& indices) const {
        Dataset out{name, {}, num_classes, attr_dim};
        out.graphs.reserve(indices.size());
        for (auto i : indices) out.graphs.push_back(graphs.at(i));
        return out;
    }
};

struct DatasetStats {
    std::size_t num_graphs = 0;
    int num_classes = 0;
    double avg_nodes = 0.0;
    double avg_edges = 0.0;
    Index attr_dim = 0;
};

inline DatasetStats dataset_stats(const Dataset& ds) {
    if (ds.graphs.empty()) throw ArgumentError("dataset_stats: dataset is empty");
    DatasetStats s;
    s.num_graphs = ds.graphs.size();
    s.num_classes = ds.num_classes;
    s.attr_dim = ds.attr_dim;
    double nodes = 0.0, edges = 0.0;
    for (const auto& g : ds.graphs) {
        nodes += static_cast<double>(g.num_nodes());
        edges += static_cast<double>(g.num_edges());
    }
    s.avg_nodes = nodes / static_cast<double>(s.num_graphs);
    s.avg_edges = edges / static_cast<double>(s.num_graphs);
    return s;
}

/// Fixed-capacity neighborhood of a node, zero-padded to k_max slots.
struct Subgraph {
    Index center = 0;
    /// Center first, then by hop distance, then by id.
    std::vector<Index> node_ids;
    Matrix adjacency;
    Matrix attributes;

    Index size() const { return static_cast<Index>(node_ids.size()); }
    Index capacity() const { return adjacency.rows(); }
};

/// BFS neighborhood of `v` up to `hops`, truncated to the nearest `k_max`
/// nodes. Attributes are taken from `features` (one row per node of `g`),
/// which lets layers pass their current feature maps.
inline Subgraph extract_subgraph(const Graph& g, const Matrix& features, Index v, int hops, Index k_max) {
    if (v < 0 || v >= g.num_nodes()) {
        throw ArgumentError("extract_subgraph: node " + std::to_string(v) + " out of range");
    }
    detail::require(hops >= 1, "extract_subgraph: hops must be >= 1");
    detail::require(k_max >= 1, "extract_subgraph: k_max must be >= 1");
    detail::require(features.rows() == g.num_nodes(), "extract_subgraph: feature rows must match node count");

    Subgraph sub;
    sub.center = v;
    sub.node_ids.push_back(v);
    std::vector<int> dist(static_cast<std::size_t>(g.num_nodes()), -1);
    dist[static_cast<std::size_t>(v)] = 0;
    std::vector<Index> frontier{v};
    for (int h = 1; h <= hops && static_cast<Index>(sub.node_ids.size()) < k_max && !frontier.empty(); ++h) {
        std::vector<Index> next;
        for (Index u : frontier) {
            for (Index w : g.neighbors(u)) {
                if (dist[static_cast<std::size_t>(w)] < 0) {
                    dist[static_cast<std::size_t>(w)] = h;
                    next.push_back(w);
                }
            }
        }
        std::sort(next.begin(), next.end());
        for (Index w : next) {
            if (static_cast<Index>(sub.node_ids.size()) == k_max) break;
            sub.node_ids.push_back(w);
        }
        frontier = std::move(next);
    }

    const Index k = sub.size();
    sub.adjacency = Matrix::Zero(k_max, k_max);
    sub.attributes = Matrix::Zero(k_max, features.cols());
    const Matrix& adj = g.adjacency();
    for (Index a = 0; a < k; ++a) {
        const Index ia = sub.node_ids[static_cast<std::size_t>(a)];
        sub.attributes.row(a) = features.row(ia);
        for (Index b = 0; b < k; ++b) {
            sub.adjacency(a, b) = adj(ia, sub.node_ids[static_cast<std::size_t>(b)]);
        }
    }
    return sub;
}

inline Subgraph extract_subgraph(const Graph& g, Index v, int hops, Index k_max) {
    return extract_subgraph(g, g.attributes(), v, hops, k_max);
}

/// The whole graph in node order as a subgraph padded to `capacity` slots
/// (default: no padding). Used to evaluate kernels between complete graphs.
inline Subgraph whole_graph(const Graph& g, Index capacity = -1) {
    const Index n = g.num_nodes();
    const Index cap = capacity < 0 ? n : capacity;
    if (cap < n) throw ArgumentError("whole_graph: capacity smaller than the node count");
    Subgraph s;
    s.node_ids.resize(static_cast<std::size_t>(n));
    std::iota(s.node_ids.begin(), s.node_ids.end(), Index{0});
    s.adjacency = Matrix::Zero(cap, cap);
    s.adjacency.topLeftCorner(n, n) = g.adjacency();
    s.attributes = Matrix::Zero(cap, g.attr_dim());
    s.attributes.topRows(n) = g.attributes();
    return s;
}

} // namespace kergnn
