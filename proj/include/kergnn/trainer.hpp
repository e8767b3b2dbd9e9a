#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "kergnn/config.hpp"
#include "kergnn/error.hpp"
#include "kergnn/graph.hpp"
#include "kergnn/model.hpp"
#include "kergnn/optim.hpp"
#include "kergnn/parallel.hpp"

namespace kergnn {

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    /// Mean train-mode loss and running accuracy over the epoch's batches.
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_val_accuracy = 0.0;
};

struct TrainResult {
    ModelParams params;
    TrainHistory history;
};

struct TrainOptions {
    int threads = 1;
    std::function<void(const EpochRecord&)> on_epoch;
};

/// Step schedule: lr * 0.5^floor(epoch / lr_half_every), epochs counted from 0.
inline double learning_rate_at(const TrainConfig& cfg, int epoch) {
    return cfg.lr * std::pow(0.5, static_cast<double>(epoch / cfg.lr_half_every));
}

inline void require_labels(const Dataset& ds, const char* what) {
    for (const auto& g : ds.graphs) {
        if (!g.graph_label()) throw ArgumentError(std::string(what) + ": every graph needs a class label");
    }
}

inline double accuracy(const Dataset& ds, const ModelParams& params, int threads = 1) {
    if (ds.graphs.empty()) throw ArgumentError("accuracy: empty dataset");
    std::vector<int> correct(ds.size(), 0);
    parallel_for(ds.size(), threads, [&](std::size_t i) {
        correct[i] = predict(ds.graphs[i], params) == ds.graphs[i].graph_label().value_or(-1) ? 1 : 0;
    });
    return static_cast<double>(std::accumulate(correct.begin(), correct.end(), 0)) / static_cast<double>(ds.size());
}

/// Mini-batch Adam on mean cross-entropy. Returns the parameters of the
/// epoch with the best validation accuracy (earliest on ties).
///
/// Per-graph gradients are computed independently and summed in graph order,
/// so results do not depend on the thread count.
inline TrainResult train_fold(const Dataset& train, const Dataset& val, const TrainConfig& cfg, std::mt19937_64& rng,
                              const TrainOptions& opt = {}) {
    if (train.graphs.empty()) throw ArgumentError("train_fold: training split is empty");
    if (val.graphs.empty()) throw ArgumentError("train_fold: validation split is empty");
    require_labels(train, "train_fold");
    require_labels(val, "train_fold");
    cfg.validate();

    ModelParams params = init_params(cfg.model_config(train.attr_dim, train.num_classes), rng);
    Adam adam(params, cfg.beta1, cfg.beta2, cfg.eps);

    TrainResult best{params, {}};
    best.history.best_val_accuracy = -1.0;

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = learning_rate_at(cfg, epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        const auto batch = static_cast<std::size_t>(cfg.batch_size);
        for (std::size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
            const std::size_t end = std::min(order.size(), start + batch);
            const std::size_t count = end - start;
            std::vector<std::uint64_t> seeds(count);
            for (auto& s : seeds) s = rng();
            std::vector<ModelParams> grads(count);
            std::vector<double> losses(count);
            std::vector<int> hits(count);
            parallel_for(count, opt.threads, [&](std::size_t k) {
                const Graph& g = train.graphs[order[start + k]];
                std::mt19937_64 local(seeds[k]);
                grads[k] = params.zeros_like();
                const auto c = model_forward_cached(g, params, Mode::train, &local);
                Vector d_logits;
                losses[k] = cross_entropy(c.logits, *g.graph_label(), &d_logits);
                Index pred = 0;
                c.logits.maxCoeff(&pred);
                hits[k] = pred == *g.graph_label() ? 1 : 0;
                model_backward(g, params, c, d_logits / static_cast<double>(count), grads[k]);
            });
            double batch_loss = 0.0;
            ModelParams grad = params.zeros_like();
            for (std::size_t k = 0; k < count; ++k) {
                accumulate(grad, grads[k]);
                batch_loss += losses[k];
                correct += static_cast<std::size_t>(hits[k]);
            }
            if (!std::isfinite(batch_loss)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
            }
            loss_sum += batch_loss;
            if (cfg.grad_clip > 0.0) {
                const double norm = gradient_norm(grad);
                if (norm > cfg.grad_clip) scale_gradient(grad, cfg.grad_clip / norm);
            }
            adam.step(params, grad, lr);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = loss_sum / static_cast<double>(train.size());
        rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
        rec.val_accuracy = accuracy(val, params, opt.threads);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        best.history.epochs.push_back(rec);
        if (rec.val_accuracy > best.history.best_val_accuracy) {
            best.history.best_val_accuracy = rec.val_accuracy;
            best.history.best_epoch = epoch;
            best.params = params;
        }
        if (opt.on_epoch) opt.on_epoch(rec);
    }
    return best;
}

struct GridSearchResult {
    std::size_t best_index = 0;
    TrainConfig best_config;
    TrainResult best_result;
    /// Best validation accuracy per grid point; NaN for rejected configs.
    std::vector<double> val_accuracies;
};

/// Trains every valid grid point and keeps the highest validation accuracy
/// (first in grid order on ties). Invalid configs are skipped.
inline GridSearchResult grid_search(const Dataset& train, const Dataset& val, const std::vector<TrainConfig>& grid,
                                    std::mt19937_64& rng, const TrainOptions& opt = {}) {
    if (grid.empty()) throw ArgumentError("grid_search: grid is empty");
    GridSearchResult res;
    res.val_accuracies.assign(grid.size(), std::nan(""));
    std::vector<std::uint64_t> seeds(grid.size());
    for (auto& s : seeds) s = rng();
    bool found = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        try {
            grid[i].validate();
        } catch (const ConfigError&) {
            continue;
        }
        std::mt19937_64 local(seeds[i]);
        auto r = train_fold(train, val, grid[i], local, opt);
        res.val_accuracies[i] = r.history.best_val_accuracy;
        if (!found || r.history.best_val_accuracy > res.best_result.history.best_val_accuracy) {
            found = true;
            res.best_index = i;
            res.best_config = grid[i];
            res.best_result = std::move(r);
        }
    }
    if (!found) throw ArgumentError("grid_search: no valid configuration in grid");
    return res;
}

/// Fold id per graph: each class is shuffled and dealt round-robin, the deal
/// continuing across classes so fold sizes differ by at most one.
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::mt19937_64& rng) {
    detail::require(folds >= 1, "stratified_folds: folds must be >= 1");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::vector<int> fold(labels.size(), 0);
    int next = 0;
    for (auto& [c, idx] : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (auto i : idx) {
            fold[i] = next;
            next = (next + 1) % folds;
        }
    }
    return fold;
}

/// Stratified split of `indices` into (rest, held-out) with about
/// `fraction` of every class held out, and at least one held-out item overall.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    const std::vector<std::size_t>& indices, const std::vector<int>& labels, double fraction, std::mt19937_64& rng) {
    detail::require(indices.size() >= 2, "stratified_holdout: need at least two items");
    std::map<int, std::vector<std::size_t>> by_class;
    for (auto i : indices) by_class[labels[i]].push_back(i);
    std::vector<std::size_t> rest, held;
    for (auto& [c, idx] : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(idx.size()) + 0.5));
        take = std::min(take, idx.size() - (idx.size() > 1 ? 1 : 0));
        held.insert(held.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
        rest.insert(rest.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
    }
    if (held.empty()) {
        auto largest = std::max_element(by_class.begin(), by_class.end(),
                                        [](const auto& a, const auto& b) { return a.second.size() < b.second.size(); });
        const auto moved = largest->second.front();
        held.push_back(moved);
        rest.erase(std::find(rest.begin(), rest.end(), moved));
    }
    std::sort(rest.begin(), rest.end());
    std::sort(held.begin(), held.end());
    return {rest, held};
}

/// Explicit train/test indices of one outer fold.
struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

struct FoldResult {
    int fold = 0;
    double test_accuracy = 0.0;
    TrainConfig selected_config;
    std::size_t selected_index = 0;
    std::vector<double> grid_val_accuracies;
    std::vector<std::size_t> test_indices;
    TrainHistory history;
};

struct CVResult {
    std::vector<double> fold_accuracies;
    double mean = 0.0;
    /// Population standard deviation of fold_accuracies.
    double stddev = 0.0;
    std::vector<FoldResult> folds;
    double total_seconds = 0.0;
};

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

struct CVOptions {
    int folds = 10;
    /// Share of the outer training part used for inner validation.
    double val_fraction = 0.1;
    /// Replaces the generated outer splits when non-empty.
    std::vector<FoldSplit> splits;
    TrainOptions train;
    std::function<void(const FoldResult&, const ModelParams&)> on_fold;
};

/// Generated outer splits; k = 1 gives one stratified 90/10 holdout.
inline std::vector<FoldSplit> make_outer_splits(const Dataset& ds, int folds, std::uint64_t seed) {
    std::vector<int> labels;
    for (const auto& g : ds.graphs) labels.push_back(*g.graph_label());
    std::map<int, std::size_t> counts;
    for (int l : labels) ++counts[l];
    const std::size_t need = static_cast<std::size_t>(std::max(folds, 2));
    for (auto [c, n] : counts) {
        if (n < need) {
            throw ArgumentError("stratification error: class " + std::to_string(c) + " has " + std::to_string(n) +
                                " graphs, at least " + std::to_string(need) + " required");
        }
    }
    std::mt19937_64 rng(seed);
    std::vector<FoldSplit> splits;
    if (folds == 1) {
        std::vector<std::size_t> all(ds.size());
        std::iota(all.begin(), all.end(), 0);
        auto [rest, held] = stratified_holdout(all, labels, 0.1, rng);
        splits.push_back({rest, held});
        return splits;
    }
    const auto assign = stratified_folds(labels, folds, rng);
    splits.resize(static_cast<std::size_t>(folds));
    for (std::size_t i = 0; i < assign.size(); ++i) {
        for (int k = 0; k < folds; ++k) {
            (k == assign[i] ? splits[static_cast<std::size_t>(k)].test : splits[static_cast<std::size_t>(k)].train).push_back(i);
        }
    }
    return splits;
}

/// Stratified outer k-fold (k = 1 means one stratified 90/10 holdout), inner
/// stratified holdout for grid search, test accuracy of the selected model
/// on each outer fold.
inline CVResult cross_validate(const Dataset& ds, const std::vector<TrainConfig>& grid, std::uint64_t seed,
                               const CVOptions& opt = {}) {
    if (ds.graphs.empty()) throw ArgumentError("cross_validate: dataset is empty");
    detail::require(opt.folds >= 1, "cross_validate: folds must be >= 1");
    detail::require(opt.val_fraction > 0.0 && opt.val_fraction < 1.0, "cross_validate: val_fraction must be in (0, 1)");
    require_labels(ds, "cross_validate");
    if (grid.empty()) throw ArgumentError("cross_validate: grid is empty");
    const auto t0 = std::chrono::steady_clock::now();

    const auto splits = opt.splits.empty() ? make_outer_splits(ds, opt.folds, seed) : opt.splits;
    std::vector<int> labels;
    for (const auto& g : ds.graphs) labels.push_back(*g.graph_label());

    CVResult res;
    for (std::size_t k = 0; k < splits.size(); ++k) {
        const auto& split = splits[k];
        if (split.train.empty() || split.test.empty()) throw ArgumentError("cross_validate: empty fold split");
        std::seed_seq sseq{seed, static_cast<std::uint64_t>(k) + 1};
        std::mt19937_64 rng(sseq);
        auto [inner_train, inner_val] = stratified_holdout(split.train, labels, opt.val_fraction, rng);
        auto gs = grid_search(ds.subset(inner_train), ds.subset(inner_val), grid, rng, opt.train);

        FoldResult fr;
        fr.fold = static_cast<int>(k);
        fr.test_accuracy = accuracy(ds.subset(split.test), gs.best_result.params, opt.train.threads);
        fr.selected_config = gs.best_config;
        fr.selected_index = gs.best_index;
        fr.grid_val_accuracies = gs.val_accuracies;
        fr.test_indices = split.test;
        fr.history = gs.best_result.history;
        res.fold_accuracies.push_back(fr.test_accuracy);
        if (opt.on_fold) opt.on_fold(fr, gs.best_result.params);
        res.folds.push_back(std::move(fr));
    }
    std::tie(res.mean, res.stddev) = mean_std(res.fold_accuracies);
    res.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

/// Results document. Everything except the "timing" object is a pure
/// function of (dataset, grid, seed).
inline json cv_result_to_json(const CVResult& r, const std::string& dataset, std::uint64_t seed) {
    json folds = json::array();
    json timing_folds = json::array();
    for (const auto& f : r.folds) {
        json history = json::array();
        json secs = json::array();
        for (const auto& e : f.history.epochs) {
            history.push_back({{"epoch", e.epoch},
                               {"lr", e.lr},
                               {"train_loss", e.train_loss},
                               {"train_accuracy", e.train_accuracy},
                               {"val_accuracy", e.val_accuracy}});
            secs.push_back(e.seconds);
        }
        json grid_acc = json::array();
        for (double a : f.grid_val_accuracies) grid_acc.push_back(std::isnan(a) ? json(nullptr) : json(a));
        folds.push_back({{"fold", f.fold},
                         {"test_accuracy", f.test_accuracy},
                         {"selected_index", f.selected_index},
                         {"selected_config", f.selected_config},
                         {"grid_val_accuracies", std::move(grid_acc)},
                         {"best_epoch", f.history.best_epoch},
                         {"best_val_accuracy", f.history.best_val_accuracy},
                         {"test_indices", f.test_indices},
                         {"history", std::move(history)}});
        timing_folds.push_back({{"fold", f.fold}, {"epoch_seconds", std::move(secs)}});
    }
    return json{{"dataset", dataset},
                {"seed", seed},
                {"num_folds", r.fold_accuracies.size()},
                {"fold_accuracies", r.fold_accuracies},
                {"mean", r.mean},
                {"std", r.stddev},
                {"folds", std::move(folds)},
                {"timing", {{"total_seconds", r.total_seconds}, {"folds", std::move(timing_folds)}}}};
}

/// Reads {"folds": [{"train": [...], "test": [...]}, ...]} with 0-based graph indices.
inline std::vector<FoldSplit> load_split_file(const std::filesystem::path& path, std::size_t num_graphs) {
    const json doc = read_json_file(path);
    std::vector<FoldSplit> splits;
    try {
        for (const auto& jf : doc.at("folds")) {
            FoldSplit s{jf.at("train").get<std::vector<std::size_t>>(), jf.at("test").get<std::vector<std::size_t>>()};
            for (auto i : s.train) {
                if (i >= num_graphs) throw FormatError(path.string() + ": graph index " + std::to_string(i) + " out of range");
            }
            for (auto i : s.test) {
                if (i >= num_graphs) throw FormatError(path.string() + ": graph index " + std::to_string(i) + " out of range");
            }
            splits.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": malformed split file: " + e.what());
    }
    if (splits.empty()) throw FormatError(path.string() + ": split file lists no folds");
    return splits;
}

} // namespace kergnn
