#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kergnn/error.hpp"
#include "kergnn/graph.hpp"

namespace kergnn {

/// Reads the single-graph text format:
///
///     n d
///     <d attribute values>      (n lines)
///     i j                       (one line per undirected edge, 0-indexed)
///
/// Blank lines and lines starting with '#' are ignored. Nodes with identical
/// attribute rows share a node label (numbered in order of first appearance),
/// which seeds WL refinement.
inline Graph read_graph_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open graph file " + path.string());
    std::vector<std::pair<std::size_t, std::string>> lines;
    std::string text;
    for (std::size_t no = 1; std::getline(in, text); ++no) {
        const auto first = text.find_first_not_of(" \t\r");
        if (first == std::string::npos || text[first] == '#') continue;
        lines.emplace_back(no, text);
    }
    auto fail = [&](std::size_t no, const std::string& msg) {
        throw FormatError(path.filename().string() + ":" + std::to_string(no) + ": " + msg);
    };
    if (lines.empty()) throw FormatError(path.string() + ": empty graph file");

    long long n = -1, d = -1;
    {
        std::istringstream hs(lines[0].second);
        std::string extra;
        if (!(hs >> n >> d) || (hs >> extra) || n < 0 || d < 1) fail(lines[0].first, "expected header 'n d' with n >= 0, d >= 1");
    }
    if (static_cast<long long>(lines.size()) < 1 + n) fail(lines.back().first, "fewer attribute lines than nodes");

    Matrix attrs(n, d);
    std::map<std::vector<double>, int> row_label;
    std::vector<int> labels;
    for (long long v = 0; v < n; ++v) {
        const auto& [no, line] = lines[static_cast<std::size_t>(1 + v)];
        std::istringstream ls(line);
        std::vector<double> row(static_cast<std::size_t>(d));
        for (auto& x : row) {
            if (!(ls >> x)) fail(no, "expected " + std::to_string(d) + " attribute values");
        }
        std::string extra;
        if (ls >> extra) fail(no, "too many attribute values");
        for (long long c = 0; c < d; ++c) attrs(v, c) = row[static_cast<std::size_t>(c)];
        auto [it, _] = row_label.try_emplace(row, static_cast<int>(row_label.size()));
        labels.push_back(it->second);
    }

    std::vector<std::pair<Index, Index>> edges;
    for (std::size_t k = static_cast<std::size_t>(1 + n); k < lines.size(); ++k) {
        const auto& [no, line] = lines[k];
        std::istringstream ls(line);
        long long i = -1, j = -1;
        std::string extra;
        if (!(ls >> i >> j) || (ls >> extra)) fail(no, "expected edge 'i j'");
        if (i < 0 || i >= n || j < 0 || j >= n) fail(no, "edge endpoint out of range");
        if (i == j) fail(no, "self-loops are not allowed");
        edges.emplace_back(i, j);
    }
    return Graph::from_edges(n, edges, std::move(attrs), std::nullopt, std::move(labels));
}

inline void write_graph_file(const Graph& g, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write graph file " + path.string());
    out << std::setprecision(17);
    out << g.num_nodes() << ' ' << g.attr_dim() << '\n';
    for (Index v = 0; v < g.num_nodes(); ++v) {
        for (Index c = 0; c < g.attr_dim(); ++c) out << (c ? " " : "") << g.attributes()(v, c);
        out << '\n';
    }
    for (Index v = 0; v < g.num_nodes(); ++v) {
        for (Index w : g.neighbors(v)) {
            if (v < w) out << v << ' ' << w << '\n';
        }
    }
    if (!out) throw IoError("error while writing " + path.string());
}

} // namespace kergnn
