#pragma once

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

#include "kergnn/error.hpp"
#include "kergnn/graph.hpp"

namespace kergnn {

/// Sorted (color, count) pairs.
using ColorHistogram = std::vector<std::pair<int, int>>;

/// Canonical color interning. A color id is assigned on first sight of a
/// (previous color, sorted neighbor colors) signature, so ids are shared by
/// every graph refined through the same table.
class ColorTable {
public:
    int initial(int label) { return intern({-1, {label}}); }

    int refine(int own, std::vector<int> neighbor_colors) {
        std::sort(neighbor_colors.begin(), neighbor_colors.end());
        return intern({own, std::move(neighbor_colors)});
    }

    std::size_t size() const { return ids_.size(); }

private:
    using Signature = std::pair<int, std::vector<int>>;

    int intern(Signature sig) {
        auto [it, inserted] = ids_.try_emplace(std::move(sig), static_cast<int>(ids_.size()));
        return it->second;
    }

    std::map<Signature, int> ids_;
};

namespace wl_detail {

inline std::vector<int> initial_colors(const Graph& g, ColorTable& table) {
    std::vector<int> colors(static_cast<std::size_t>(g.num_nodes()));
    for (Index v = 0; v < g.num_nodes(); ++v) {
        const int label = g.node_labels() ? (*g.node_labels())[static_cast<std::size_t>(v)] : 0;
        colors[static_cast<std::size_t>(v)] = table.initial(label);
    }
    return colors;
}

inline std::vector<int> refine_once(const Graph& g, const std::vector<int>& colors, ColorTable& table) {
    std::vector<int> next(colors.size());
    std::vector<int> nb;
    for (Index v = 0; v < g.num_nodes(); ++v) {
        nb.clear();
        for (Index w : g.neighbors(v)) nb.push_back(colors[static_cast<std::size_t>(w)]);
        next[static_cast<std::size_t>(v)] = table.refine(colors[static_cast<std::size_t>(v)], nb);
    }
    return next;
}

inline ColorHistogram histogram(const std::vector<int>& colors) {
    std::map<int, int> counts;
    for (int c : colors) ++counts[c];
    return {counts.begin(), counts.end()};
}

inline std::size_t num_classes(const std::vector<int>& colors) { return histogram(colors).size(); }

} // namespace wl_detail

struct WLResult {
    /// Histogram of the initial coloring followed by one per round performed.
    std::vector<ColorHistogram> rounds;
    /// Index of the first round that did not split any color class.
    int rounds_to_stability = 0;
    bool stable = false;

    const ColorHistogram& final_histogram() const { return rounds.back(); }
};

/// 1-WL color refinement until the partition stops splitting or `max_iters` rounds.
inline WLResult wl_refine(const Graph& g, int max_iters, ColorTable& table) {
    detail::require(max_iters >= 1, "wl_refine: max_iters must be >= 1");
    WLResult res;
    auto colors = wl_detail::initial_colors(g, table);
    res.rounds.push_back(wl_detail::histogram(colors));
    for (int it = 1; it <= max_iters; ++it) {
        auto next = wl_detail::refine_once(g, colors, table);
        res.rounds.push_back(wl_detail::histogram(next));
        const bool split = wl_detail::num_classes(next) > wl_detail::num_classes(colors);
        colors = std::move(next);
        if (!split) {
            res.rounds_to_stability = it;
            res.stable = true;
            break;
        }
    }
    if (!res.stable) res.rounds_to_stability = max_iters;
    return res;
}

inline WLResult wl_refine(const Graph& g, int max_iters) {
    ColorTable table;
    return wl_refine(g, max_iters, table);
}

enum class WLVerdict { distinguishable, indistinguishable };

inline const char* to_string(WLVerdict v) {
    return v == WLVerdict::distinguishable ? "distinguishable" : "indistinguishable";
}

/// Refines both graphs in lockstep through one shared table and reports
/// whether their color histograms ever differ.
inline WLVerdict wl_test(const Graph& g1, const Graph& g2, int max_iters) {
    detail::require(max_iters >= 1, "wl_test: max_iters must be >= 1");
    if (g1.num_nodes() != g2.num_nodes()) return WLVerdict::distinguishable;
    ColorTable table;
    auto c1 = wl_detail::initial_colors(g1, table);
    auto c2 = wl_detail::initial_colors(g2, table);
    if (wl_detail::histogram(c1) != wl_detail::histogram(c2)) return WLVerdict::distinguishable;
    for (int it = 1; it <= max_iters; ++it) {
        auto n1 = wl_detail::refine_once(g1, c1, table);
        auto n2 = wl_detail::refine_once(g2, c2, table);
        if (wl_detail::histogram(n1) != wl_detail::histogram(n2)) return WLVerdict::distinguishable;
        // equal histograms imply equal class counts, so checking one graph suffices
        const bool split = wl_detail::num_classes(n1) > wl_detail::num_classes(c1);
        c1 = std::move(n1);
        c2 = std::move(n2);
        if (!split) break;
    }
    return WLVerdict::indistinguishable;
}

} // namespace kergnn
