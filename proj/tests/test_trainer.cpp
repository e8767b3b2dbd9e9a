#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace kergnn;
using namespace kergnn::testing;

namespace {

Graph labelled(const Graph& g, int label) { return Graph(g.adjacency(), g.attributes(), label); }

/// Cycles (class 0) against paths (class 1) of 3 to 6 nodes.
Dataset cycles_and_paths(int copies = 1) {
    Dataset ds{"cycles_paths", {}, 2, 1};
    for (int c = 0; c < copies; ++c) {
        for (Index n = 3; n <= 6; ++n) {
            ds.graphs.push_back(labelled(cycle_graph(n), 0));
            ds.graphs.push_back(labelled(path_graph(n), 1));
        }
    }
    return ds;
}

TrainConfig micro_config() {
    TrainConfig cfg;
    cfg.epochs = 100;
    cfg.batch_size = 4;
    cfg.filters = 4;
    cfg.filter_nodes = 3;
    cfg.k_max = 6;
    cfg.walk_steps = 2;
    cfg.mlp_hidden = 8;
    cfg.dropout = 0.0;
    return cfg;
}

/// Star K1,3 (class 0) against the path on 4 nodes (class 1). With constant
/// attributes their 1-step readouts coincide while 2-step walks separate them.
Dataset star_and_path(int copies) {
    const auto star = Graph::from_edges(4, {{0, 3}, {1, 3}, {2, 3}}, ones(4));
    const auto path = Graph::from_edges(4, {{0, 1}, {0, 3}, {1, 2}}, ones(4));
    Dataset ds{"star_path", {}, 2, 1};
    for (int c = 0; c < copies; ++c) {
        ds.graphs.push_back(labelled(star, 0));
        ds.graphs.push_back(labelled(path, 1));
    }
    return ds;
}

} // namespace

TEST(Schedule, LearningRateHalvesEveryFiftyEpochs) {
    TrainConfig cfg;
    EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 0), 0.01);
    EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 49), 0.01);
    EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 50), 0.005);
    EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 100), 0.0025);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    ModelParams p;
    p.mlp.push_back({Matrix::Constant(1, 2, 1.0), Vector::Zero(1)});
    ModelParams g = p.zeros_like();
    g.mlp[0].weight << 3.0, -0.5;
    Adam adam(p);
    adam.step(p, g, 0.1);
    EXPECT_NEAR(p.mlp[0].weight(0, 0), 0.9, 1e-7);
    EXPECT_NEAR(p.mlp[0].weight(0, 1), 1.1, 1e-7);
    EXPECT_EQ(p.mlp[0].bias(0), 0.0);
}

TEST(GradientNorm, SymmetricPairCountsOnce) {
    ModelParams g;
    KerGNNLayer layer;
    Matrix a = Matrix::Zero(2, 2);
    a(0, 1) = a(1, 0) = 3.0;
    layer.filters.push_back({a, Matrix::Constant(2, 1, 0.0)});
    g.layers.push_back(layer);
    g.mlp.push_back({Matrix::Constant(1, 1, 4.0), Vector::Zero(1)});
    EXPECT_DOUBLE_EQ(gradient_norm(g), 5.0);
}

TEST(TrainFold, FitsMicroDataset) {
    const auto ds = cycles_and_paths();
    std::mt19937_64 rng(1);
    const auto r = train_fold(ds, ds, micro_config(), rng);
    ASSERT_EQ(r.history.epochs.size(), 100u);
    EXPECT_EQ(r.history.best_val_accuracy, 1.0);
    EXPECT_EQ(accuracy(ds, r.params), 1.0);
    EXPECT_LT(r.history.epochs[49].train_loss, r.history.epochs[0].train_loss);
    EXPECT_DOUBLE_EQ(r.history.epochs[49].lr, 0.01);
    EXPECT_DOUBLE_EQ(r.history.epochs[50].lr, 0.005);
}

TEST(TrainFold, BestEpochIsEarliestMaximum) {
    const auto ds = cycles_and_paths();
    std::mt19937_64 rng(2);
    auto cfg = micro_config();
    cfg.epochs = 30;
    const auto r = train_fold(ds, ds, cfg, rng);
    double best = -1.0;
    int epoch = -1;
    for (const auto& e : r.history.epochs) {
        if (e.val_accuracy > best) {
            best = e.val_accuracy;
            epoch = e.epoch;
        }
    }
    EXPECT_EQ(r.history.best_epoch, epoch);
    EXPECT_EQ(r.history.best_val_accuracy, best);
    EXPECT_EQ(accuracy(ds, r.params), best);
}

TEST(TrainFold, DeterministicAndThreadInvariant) {
    const auto ds = cycles_and_paths();
    auto cfg = micro_config();
    cfg.epochs = 8;
    cfg.dropout = 0.3;
    std::mt19937_64 r1(5), r2(5), r3(5);
    const auto a = train_fold(ds, ds, cfg, r1, {1, {}});
    const auto b = train_fold(ds, ds, cfg, r2, {1, {}});
    const auto c = train_fold(ds, ds, cfg, r3, {4, {}});
    EXPECT_EQ(model_to_json(a.params).dump(), model_to_json(b.params).dump());
    EXPECT_EQ(model_to_json(a.params).dump(), model_to_json(c.params).dump());
    for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
        EXPECT_EQ(a.history.epochs[e].train_loss, c.history.epochs[e].train_loss);
    }
}

TEST(TrainFold, ErrorCases) {
    const auto ds = cycles_and_paths();
    std::mt19937_64 rng(6);
    EXPECT_THROW(train_fold(Dataset{"e", {}, 2, 1}, ds, micro_config(), rng), ArgumentError);
    EXPECT_THROW(train_fold(ds, Dataset{"e", {}, 2, 1}, micro_config(), rng), ArgumentError);
    auto bad = micro_config();
    bad.lr = 0.0;
    EXPECT_THROW(train_fold(ds, ds, bad, rng), ConfigError);

    auto diverge = micro_config();
    diverge.lr = 1e300;
    diverge.epochs = 5;
    diverge.walk_steps = 4;
    try {
        train_fold(ds, ds, diverge, rng);
        FAIL() << "expected TrainingError";
    } catch (const TrainingError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    }
}

TEST(GridSearch, SelectsTwoStepWalks) {
    const auto train = star_and_path(6);
    const auto val = star_and_path(3);
    std::vector<TrainConfig> grid;
    for (int p : {1, 2}) {
        auto cfg = micro_config();
        cfg.walk_steps = p;
        cfg.filters = 2;
        cfg.filter_nodes = 4;
        cfg.epochs = 60;
        grid.push_back(cfg);
    }
    std::mt19937_64 rng(7);
    const auto r = grid_search(train, val, grid, rng);
    EXPECT_DOUBLE_EQ(r.val_accuracies[0], 0.5);
    EXPECT_EQ(r.best_index, 1u);
    EXPECT_EQ(r.best_config.walk_steps, 2);
    EXPECT_EQ(r.val_accuracies[1], 1.0);
}

TEST(GridSearch, SkipsInvalidAndRejectsEmpty) {
    const auto ds = cycles_and_paths();
    auto good = micro_config();
    good.epochs = 3;
    auto bad = good;
    bad.k_max = 0;
    std::mt19937_64 rng(8);
    const auto r = grid_search(ds, ds, {bad, good}, rng);
    EXPECT_EQ(r.best_index, 1u);
    EXPECT_TRUE(std::isnan(r.val_accuracies[0]));
    EXPECT_THROW(grid_search(ds, ds, {}, rng), ArgumentError);
    EXPECT_THROW(grid_search(ds, ds, {bad}, rng), ArgumentError);
}

TEST(Folds, StratifiedDisjointCover) {
    std::mt19937_64 rng(9);
    std::vector<int> labels;
    for (int i = 0; i < 125; ++i) labels.push_back(0);
    for (int i = 0; i < 63; ++i) labels.push_back(1);
    std::shuffle(labels.begin(), labels.end(), rng);
    const auto fold = stratified_folds(labels, 10, rng);
    std::vector<std::array<int, 2>> counts(10, {0, 0});
    for (std::size_t i = 0; i < labels.size(); ++i) counts[static_cast<std::size_t>(fold[i])][static_cast<std::size_t>(labels[i])]++;
    for (const auto& c : counts) {
        EXPECT_NEAR(c[0], 12.5, 1.0);
        EXPECT_NEAR(c[1], 6.3, 1.0);
    }

    Dataset ds{"x", {}, 2, 1};
    for (int l : labels) ds.graphs.push_back(Graph(Matrix::Zero(1, 1), ones(1), l));
    const auto splits = make_outer_splits(ds, 10, 3);
    ASSERT_EQ(splits.size(), 10u);
    std::vector<int> seen(ds.size(), 0);
    for (const auto& s : splits) {
        EXPECT_EQ(s.train.size() + s.test.size(), ds.size());
        std::set<std::size_t> tr(s.train.begin(), s.train.end());
        for (auto i : s.test) {
            EXPECT_FALSE(tr.count(i));
            seen[i]++;
        }
    }
    for (int s : seen) EXPECT_EQ(s, 1);
    const auto again = make_outer_splits(ds, 10, 3);
    EXPECT_EQ(again[4].test, splits[4].test);
}

TEST(Folds, HoldoutIsStratified) {
    std::vector<int> labels(100, 0);
    std::fill(labels.begin() + 70, labels.end(), 1);
    std::vector<std::size_t> idx(100);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(10);
    const auto [rest, held] = stratified_holdout(idx, labels, 0.1, rng);
    EXPECT_EQ(held.size(), 10u);
    EXPECT_EQ(rest.size(), 90u);
    EXPECT_EQ(std::count_if(held.begin(), held.end(), [&](auto i) { return labels[i] == 1; }), 3);
}

TEST(Folds, TooFewGraphsPerClass) {
    Dataset ds{"x", {}, 2, 1};
    for (int i = 0; i < 20; ++i) ds.graphs.push_back(Graph(Matrix::Zero(1, 1), ones(1), i < 18 ? 0 : 1));
    try {
        make_outer_splits(ds, 10, 0);
        FAIL() << "expected ArgumentError";
    } catch (const ArgumentError& e) {
        EXPECT_NE(std::string(e.what()).find("stratification"), std::string::npos);
    }
}

TEST(CrossValidate, ConstantLabelsGivePerfectAccuracy) {
    Dataset ds{"const", {}, 1, 1};
    std::mt19937_64 g(11);
    for (int i = 0; i < 20; ++i) {
        auto r = random_graph(g, uniform_int(g, 2, 6), 1, 0.5);
        ds.graphs.push_back(labelled(r.with_attributes(ones(r.num_nodes())), 0));
    }
    auto cfg = micro_config();
    cfg.epochs = 2;
    const auto r = cross_validate(ds, {cfg}, 1);
    ASSERT_EQ(r.fold_accuracies.size(), 10u);
    EXPECT_EQ(r.mean, 1.0);
    EXPECT_EQ(r.stddev, 0.0);
}

TEST(CrossValidate, DeterministicJsonAndSplits) {
    const auto ds = cycles_and_paths(3);
    auto cfg = micro_config();
    cfg.epochs = 3;
    CVOptions opt;
    opt.folds = 3;
    const auto a = cross_validate(ds, {cfg}, 42, opt);
    const auto b = cross_validate(ds, {cfg}, 42, opt);
    auto ja = cv_result_to_json(a, "cp", 42);
    auto jb = cv_result_to_json(b, "cp", 42);
    ja.erase("timing");
    jb.erase("timing");
    EXPECT_EQ(ja.dump(), jb.dump());
    EXPECT_EQ(ja["num_folds"], 3);
    EXPECT_TRUE(ja.contains("std"));
    const auto [m, s] = mean_std(a.fold_accuracies);
    EXPECT_DOUBLE_EQ(ja["mean"].get<double>(), m);
    EXPECT_DOUBLE_EQ(ja["std"].get<double>(), s);

    opt.splits = {{{0, 1, 2, 3, 4, 5}, {}}};
    EXPECT_THROW(cross_validate(ds, {cfg}, 42, opt), ArgumentError);
}

TEST(CrossValidate, MeanStdIsPopulation) {
    const auto [m, s] = mean_std({0.5, 1.0});
    EXPECT_DOUBLE_EQ(m, 0.75);
    EXPECT_DOUBLE_EQ(s, 0.25);
}

TEST(SplitFile, LoadAndValidate) {
    const auto dir = temp_dir("splits");
    std::ofstream(dir / "ok.json") << R"({"folds":[{"train":[0,1,2],"test":[3]}]})";
    const auto s = load_split_file(dir / "ok.json", 4);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].test, std::vector<std::size_t>{3});
    EXPECT_THROW(load_split_file(dir / "ok.json", 3), FormatError);
    std::ofstream(dir / "bad.json") << R"({"folds":[{"train":[0]}]})";
    EXPECT_THROW(load_split_file(dir / "bad.json", 4), FormatError);
    EXPECT_THROW(load_split_file(dir / "none.json", 4), LoadError);
}
