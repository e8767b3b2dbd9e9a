#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kergnn/error.hpp"
#include "kergnn/graph.hpp"

namespace kergnn {

namespace tu_detail {

struct Line {
    std::size_t number;
    std::string text;
};

inline std::vector<Line> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    std::vector<Line> lines;
    std::string text;
    std::size_t number = 0;
    while (std::getline(in, text)) {
        ++number;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.find_first_not_of(" \t") == std::string::npos) continue;
        lines.push_back({number, std::move(text)});
    }
    return lines;
}

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view token, const std::filesystem::path& file, std::size_t line) {
    token = trim(token);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    T value{};
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc() || ptr != end || token.empty()) {
        throw FormatError(file.filename().string() + ":" + std::to_string(line) + ": cannot parse '" +
                          std::string(token) + "'");
    }
    return value;
}

template <typename T>
std::vector<T> split_numbers(std::string_view text, const std::filesystem::path& file, std::size_t line) {
    std::vector<T> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto token = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        out.push_back(parse_number<T>(token, file, line));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline std::filesystem::path required(const std::filesystem::path& dir, const std::string& name,
                                      const std::string& suffix) {
    auto p = dir / (name + suffix);
    if (!std::filesystem::exists(p)) throw LoadError("missing dataset file " + p.string());
    return p;
}

} // namespace tu_detail

/// Loads `<dir>/<name>_*.txt` in the TUDataset layout.
///
/// Node attributes: one-hot node labels, followed by continuous attributes
/// when both files exist; node degree when neither exists.
inline Dataset load_tudataset(const std::filesystem::path& dir, const std::string& name) {
    using namespace tu_detail;
    const auto a_path = required(dir, name, "_A.txt");
    const auto ind_path = required(dir, name, "_graph_indicator.txt");
    const auto gl_path = required(dir, name, "_graph_labels.txt");
    const auto nl_path = dir / (name + "_node_labels.txt");
    const auto na_path = dir / (name + "_node_attributes.txt");

    // graph_indicator: 1-indexed graph id per node
    std::vector<std::size_t> graph_of;
    for (const auto& l : read_lines(ind_path)) {
        const auto gid = parse_number<long long>(l.text, ind_path, l.number);
        if (gid < 1) throw FormatError(ind_path.filename().string() + ":" + std::to_string(l.number) +
                                       ": graph id must be >= 1");
        graph_of.push_back(static_cast<std::size_t>(gid - 1));
    }
    const std::size_t total_nodes = graph_of.size();

    std::vector<long long> raw_graph_labels;
    for (const auto& l : read_lines(gl_path)) raw_graph_labels.push_back(parse_number<long long>(l.text, gl_path, l.number));
    const std::size_t num_graphs = raw_graph_labels.size();

    // local index of every node within its graph
    std::vector<Index> graph_size(num_graphs, 0);
    std::vector<Index> local(total_nodes);
    for (std::size_t v = 0; v < total_nodes; ++v) {
        if (graph_of[v] >= num_graphs) {
            throw FormatError(ind_path.filename().string() + ":" + std::to_string(v + 1) +
                              ": graph id exceeds number of graph labels");
        }
        if (v > 0 && graph_of[v] < graph_of[v - 1]) {
            throw FormatError(ind_path.filename().string() + ":" + std::to_string(v + 1) +
                              ": graph ids must be non-decreasing");
        }
        local[v] = graph_size[graph_of[v]]++;
    }

    std::vector<std::set<std::pair<Index, Index>>> edges(num_graphs);
    std::set<std::pair<std::size_t, std::size_t>> directed;
    for (const auto& l : read_lines(a_path)) {
        const auto ends = split_numbers<long long>(l.text, a_path, l.number);
        if (ends.size() != 2) {
            throw FormatError(a_path.filename().string() + ":" + std::to_string(l.number) + ": expected 'i, j'");
        }
        for (auto e : ends) {
            if (e < 1 || static_cast<std::size_t>(e) > total_nodes) {
                throw FormatError(a_path.filename().string() + ":" + std::to_string(l.number) + ": node id " +
                                  std::to_string(e) + " out of range");
            }
        }
        const auto u = static_cast<std::size_t>(ends[0] - 1);
        const auto w = static_cast<std::size_t>(ends[1] - 1);
        if (graph_of[u] != graph_of[w]) {
            throw FormatError(a_path.filename().string() + ":" + std::to_string(l.number) +
                              ": edge joins nodes of different graphs");
        }
        if (u == w) continue;  // self-loops are dropped
        directed.emplace(u, w);
        edges[graph_of[u]].emplace(std::min(local[u], local[w]), std::max(local[u], local[w]));
    }
    for (const auto& [u, w] : directed) {
        if (!directed.count({w, u})) {
            throw FormatError(a_path.filename().string() + ": edge (" + std::to_string(u + 1) + ", " +
                              std::to_string(w + 1) + ") has no reverse entry");
        }
    }

    std::optional<std::vector<int>> node_labels;
    std::map<long long, int> label_index;
    if (std::filesystem::exists(nl_path)) {
        std::vector<long long> raw;
        for (const auto& l : read_lines(nl_path)) {
            // some datasets list several labels per node; the first one is used
            raw.push_back(split_numbers<long long>(l.text, nl_path, l.number).front());
        }
        if (raw.size() != total_nodes) {
            throw FormatError(nl_path.filename().string() + ": expected " + std::to_string(total_nodes) +
                              " lines, found " + std::to_string(raw.size()));
        }
        for (auto r : raw) label_index.emplace(r, 0);
        int next = 0;
        for (auto& [k, idx] : label_index) idx = next++;
        node_labels.emplace();
        node_labels->reserve(total_nodes);
        for (auto r : raw) node_labels->push_back(label_index[r]);
    }

    std::vector<std::vector<double>> cont;
    if (std::filesystem::exists(na_path)) {
        for (const auto& l : read_lines(na_path)) cont.push_back(split_numbers<double>(l.text, na_path, l.number));
        if (cont.size() != total_nodes) {
            throw FormatError(na_path.filename().string() + ": expected " + std::to_string(total_nodes) +
                              " lines, found " + std::to_string(cont.size()));
        }
        for (std::size_t v = 1; v < cont.size(); ++v) {
            if (cont[v].size() != cont[0].size()) {
                throw FormatError(na_path.filename().string() + ":" + std::to_string(v + 1) +
                                  ": attribute width differs from first line");
            }
        }
    }

    const Index onehot_dim = static_cast<Index>(label_index.size());
    const Index cont_dim = cont.empty() ? 0 : static_cast<Index>(cont[0].size());
    const bool use_degree = onehot_dim == 0 && cont_dim == 0;
    const Index attr_dim = use_degree ? 1 : onehot_dim + cont_dim;

    std::map<long long, int> class_index;
    for (auto r : raw_graph_labels) class_index.emplace(r, 0);
    int next_class = 0;
    for (auto& [k, idx] : class_index) idx = next_class++;

    Dataset ds;
    ds.name = name;
    ds.num_classes = static_cast<int>(class_index.size());
    ds.attr_dim = attr_dim;
    ds.graphs.reserve(num_graphs);

    std::size_t first = 0;
    for (std::size_t gi = 0; gi < num_graphs; ++gi) {
        const Index n = graph_size[gi];
        Matrix adj = Matrix::Zero(n, n);
        for (auto [a, b] : edges[gi]) {
            adj(a, b) = 1.0;
            adj(b, a) = 1.0;
        }
        Matrix attrs = Matrix::Zero(n, attr_dim);
        std::optional<std::vector<int>> labels;
        if (node_labels) labels = std::vector<int>(node_labels->begin() + static_cast<std::ptrdiff_t>(first),
                                                   node_labels->begin() + static_cast<std::ptrdiff_t>(first) + n);
        for (Index v = 0; v < n; ++v) {
            const std::size_t global = first + static_cast<std::size_t>(v);
            if (use_degree) {
                attrs(v, 0) = adj.row(v).sum();
                continue;
            }
            if (node_labels) attrs(v, (*node_labels)[global]) = 1.0;
            for (Index c = 0; c < cont_dim; ++c) attrs(v, onehot_dim + c) = cont[global][static_cast<std::size_t>(c)];
        }
        ds.graphs.emplace_back(std::move(adj), std::move(attrs), class_index[raw_graph_labels[gi]], std::move(labels));
        first += static_cast<std::size_t>(n);
    }
    return ds;
}

/// Writes a dataset in the TUDataset layout. The attribute matrix is written
/// verbatim as `_node_attributes.txt` so that reloading reproduces it.
inline void write_tudataset(const Dataset& ds, const std::filesystem::path& dir, const std::string& name) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    auto open = [&](const std::string& suffix) {
        std::ofstream out(dir / (name + suffix));
        if (!out) throw IoError("cannot write " + (dir / (name + suffix)).string());
        out << std::setprecision(17);
        return out;
    };
    auto a = open("_A.txt");
    auto ind = open("_graph_indicator.txt");
    auto gl = open("_graph_labels.txt");
    auto na = open("_node_attributes.txt");
    std::size_t offset = 0;
    for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
        const auto& g = ds.graphs[gi];
        gl << g.graph_label().value_or(0) << '\n';
        for (Index v = 0; v < g.num_nodes(); ++v) {
            ind << gi + 1 << '\n';
            for (Index c = 0; c < g.attr_dim(); ++c) na << (c ? ", " : "") << g.attributes()(v, c);
            na << '\n';
            for (Index w : g.neighbors(v)) {
                a << offset + static_cast<std::size_t>(v) + 1 << ", " << offset + static_cast<std::size_t>(w) + 1 << '\n';
            }
        }
        offset += static_cast<std::size_t>(g.num_nodes());
    }
    if (!a || !ind || !gl || !na) throw IoError("error while writing dataset to " + dir.string());
}

} // namespace kergnn
