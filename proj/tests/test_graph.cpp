#include <fstream>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace kergnn;
using namespace kergnn::testing;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

/// Minimal TUDataset directory: one 2-node graph with a single edge.
std::filesystem::path single_edge_dataset(const std::string& tag) {
    auto dir = temp_dir(tag);
    write_file(dir / "TOY_A.txt", "1, 2\n2, 1\n");
    write_file(dir / "TOY_graph_indicator.txt", "1\n1\n");
    write_file(dir / "TOY_graph_labels.txt", "1\n");
    return dir;
}

} // namespace

TEST(Graph, RejectsAsymmetricAdjacencyAndSelfLoops) {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 1) = 1.0;
    EXPECT_THROW(Graph(a, ones(2)), ArgumentError);
    Matrix b = Matrix::Zero(2, 2);
    b(0, 0) = 1.0;
    EXPECT_THROW(Graph(b, ones(2)), ArgumentError);
    EXPECT_THROW(Graph(Matrix::Zero(2, 2), ones(3)), ArgumentError);
}

TEST(Subgraph, IsolatedNode) {
    Matrix x(1, 2);
    x << 0.5, -2.0;
    Graph g(Matrix::Zero(1, 1), x);
    const auto s = extract_subgraph(g, 0, 1, 5);
    EXPECT_EQ(s.size(), 1);
    EXPECT_EQ(s.capacity(), 5);
    EXPECT_TRUE(s.adjacency.isZero(0.0));
    EXPECT_EQ(s.attributes.row(0), x.row(0));
    EXPECT_TRUE(s.attributes.bottomRows(4).isZero(0.0));
}

TEST(Subgraph, HexagonNeighborhoodIsAPath) {
    const auto s = extract_subgraph(hexagon(), 0, 1, 10);
    ASSERT_EQ(s.size(), 3);
    EXPECT_EQ(s.node_ids, (std::vector<Index>{0, 1, 5}));
    Matrix expected(3, 3);
    expected << 0, 1, 1, 1, 0, 0, 1, 0, 0;
    EXPECT_EQ(Matrix(s.adjacency.topLeftCorner(3, 3)), expected);
    EXPECT_EQ(s.adjacency.sum(), 4.0);
}

TEST(Subgraph, TriangleNeighborhoodIsComplete) {
    const auto s = extract_subgraph(complete_graph(3), 1, 1, 10);
    ASSERT_EQ(s.size(), 3);
    EXPECT_EQ(s.node_ids, (std::vector<Index>{1, 0, 2}));
    Matrix expected = Matrix::Ones(3, 3) - Matrix::Identity(3, 3);
    EXPECT_EQ(Matrix(s.adjacency.topLeftCorner(3, 3)), expected);
}

TEST(Subgraph, OrderingByHopThenIdAndTruncation) {
    // 0-1-2-3 path with an extra leaf 4 on node 1
    auto g = Graph::from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {1, 4}}, ones(5));
    EXPECT_EQ(extract_subgraph(g, 2, 2, 10).node_ids, (std::vector<Index>{2, 1, 3, 0, 4}));
    // truncation keeps the nearest nodes, ties by id
    EXPECT_EQ(extract_subgraph(g, 2, 2, 4).node_ids, (std::vector<Index>{2, 1, 3, 0}));
    EXPECT_EQ(extract_subgraph(g, 1, 1, 2).node_ids, (std::vector<Index>{1, 0}));
}

TEST(Subgraph, OutOfRangeNode) {
    EXPECT_THROW(extract_subgraph(hexagon(), 6, 1, 5), ArgumentError);
    EXPECT_THROW(extract_subgraph(hexagon(), -1, 1, 5), ArgumentError);
}

TEST(Subgraph, RandomGraphProperties) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = uniform_int(rng, 1, 15);
        const auto g = random_graph(rng, n, 3, 0.3);
        const Index v = uniform_int(rng, 0, n - 1);
        const int hops = static_cast<int>(uniform_int(rng, 1, 3));
        const Index k_max = uniform_int(rng, 1, 12);
        const auto s = extract_subgraph(g, v, hops, k_max);
        const auto again = extract_subgraph(g, v, hops, k_max);
        EXPECT_EQ(s.node_ids, again.node_ids);
        ASSERT_EQ(s.node_ids.front(), v);
        ASSERT_LE(s.size(), k_max);
        for (Index a = 0; a < k_max; ++a) {
            for (Index b = 0; b < k_max; ++b) {
                if (a < s.size() && b < s.size()) {
                    EXPECT_EQ(s.adjacency(a, b), g.adjacency()(s.node_ids[a], s.node_ids[b]));
                } else {
                    EXPECT_EQ(s.adjacency(a, b), 0.0);
                }
            }
            if (a >= s.size()) {
                EXPECT_TRUE(s.attributes.row(a).isZero(0.0));
            }
        }
        if (hops == 1 && k_max >= g.degree(v) + 1) {
            EXPECT_EQ(s.size(), g.degree(v) + 1);
        }
    }
}

TEST(TUDataset, SingleEdgeGraphUsesDegrees) {
    const auto dir = single_edge_dataset("single_edge");
    const auto ds = load_tudataset(dir, "TOY");
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds.attr_dim, 1);
    EXPECT_EQ(ds.num_classes, 1);
    EXPECT_EQ(ds.graphs[0].attributes(), ones(2));
    EXPECT_EQ(ds.graphs[0].num_edges(), 1);
    EXPECT_EQ(*ds.graphs[0].graph_label(), 0);
}

TEST(TUDataset, MissingFileNamesTheFile) {
    auto dir = single_edge_dataset("missing");
    std::filesystem::remove(dir / "TOY_graph_labels.txt");
    try {
        load_tudataset(dir, "TOY");
        FAIL() << "expected LoadError";
    } catch (const LoadError& e) {
        EXPECT_NE(std::string(e.what()).find("TOY_graph_labels.txt"), std::string::npos);
    }
}

TEST(TUDataset, OutOfRangeEdgeReportsLine) {
    auto dir = single_edge_dataset("range");
    write_file(dir / "TOY_A.txt", "1, 2\n2, 1\n2, 3\n");
    try {
        load_tudataset(dir, "TOY");
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("TOY_A.txt:3"), std::string::npos) << e.what();
    }
}

TEST(TUDataset, AsymmetricEdgeList) {
    auto dir = single_edge_dataset("asym");
    write_file(dir / "TOY_A.txt", "1, 2\n");
    EXPECT_THROW(load_tudataset(dir, "TOY"), FormatError);
}

TEST(TUDataset, LabelsAndAttributesAreConcatenated) {
    auto dir = temp_dir("concat");
    write_file(dir / "T_A.txt", "1, 2\n2, 1\n3, 4\n4, 3\n");
    write_file(dir / "T_graph_indicator.txt", "1\n1\n2\n2\n");
    write_file(dir / "T_graph_labels.txt", "-1\n1\n");
    write_file(dir / "T_node_labels.txt", "3\n5\n5\n3\n");
    write_file(dir / "T_node_attributes.txt", "0.5, 1.5\n2, 3\n-1, 0\n4, 4\n");
    const auto ds = load_tudataset(dir, "T");
    EXPECT_EQ(ds.num_classes, 2);
    EXPECT_EQ(ds.attr_dim, 4);
    EXPECT_EQ(*ds.graphs[0].graph_label(), 0);
    EXPECT_EQ(*ds.graphs[1].graph_label(), 1);
    Matrix g0(2, 4);
    g0 << 1, 0, 0.5, 1.5, 0, 1, 2, 3;
    EXPECT_EQ(ds.graphs[0].attributes(), g0);
    EXPECT_EQ(*ds.graphs[1].node_labels(), (std::vector<int>{1, 0}));
}

TEST(TUDataset, RoundTrip) {
    std::mt19937_64 rng(11);
    Dataset ds{"RT", {}, 3, 2};
    for (int i = 0; i < 12; ++i) {
        auto g = random_graph(rng, uniform_int(rng, 1, 9), 2, 0.35);
        ds.graphs.push_back(Graph(g.adjacency(), g.attributes(), i % 3));
    }
    const auto dir = temp_dir("roundtrip");
    write_tudataset(ds, dir, "RT");
    const auto back = load_tudataset(dir, "RT");
    ASSERT_EQ(back.size(), ds.size());
    EXPECT_EQ(back.attr_dim, ds.attr_dim);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(back.graphs[i].adjacency(), ds.graphs[i].adjacency());
        EXPECT_EQ(back.graphs[i].attributes(), ds.graphs[i].attributes());
        EXPECT_EQ(back.graphs[i].graph_label(), ds.graphs[i].graph_label());
    }
}

TEST(TUDataset, Mutag) {
    const auto ds = load_tudataset(mutag_dir(), "MUTAG");
    EXPECT_EQ(ds.size(), 188u);
    EXPECT_EQ(ds.num_classes, 2);
    EXPECT_EQ(ds.attr_dim, 7);  // one-hot over 7 atom types
    const auto st = dataset_stats(ds);
    EXPECT_NEAR(st.avg_nodes, 3371.0 / 188.0, 1e-12);
    EXPECT_NEAR(st.avg_edges, 7442.0 / 2.0 / 188.0, 1e-12);
    for (const auto& g : ds.graphs) {
        EXPECT_EQ(g.attributes().rowwise().sum(), Vector::Ones(g.num_nodes()));
    }
}

TEST(DatasetStats, EmptyAndTrivial) {
    EXPECT_THROW(dataset_stats(Dataset{}), ArgumentError);
    Dataset ds{"one", {Graph(Matrix::Zero(3, 3), ones(3), 0)}, 1, 1};
    const auto st = dataset_stats(ds);
    EXPECT_EQ(st.num_graphs, 1u);
    EXPECT_DOUBLE_EQ(st.avg_nodes, 3.0);
}

TEST(GraphFile, ReadWriteAndLabelsFromAttributes) {
    const auto dir = temp_dir("graphfile");
    Matrix x(3, 1);
    x << 1, 2, 1;
    const auto g = Graph::from_edges(3, {{0, 1}, {1, 2}}, x);
    write_graph_file(g, dir / "g.txt");
    const auto back = read_graph_file(dir / "g.txt");
    EXPECT_EQ(back.adjacency(), g.adjacency());
    EXPECT_EQ(back.attributes(), g.attributes());
    EXPECT_EQ(*back.node_labels(), (std::vector<int>{0, 1, 0}));

    write_file(dir / "bad.txt", "2 1\n1\n1\n0 2\n");
    EXPECT_THROW(read_graph_file(dir / "bad.txt"), FormatError);
    EXPECT_THROW(read_graph_file(dir / "missing.txt"), LoadError);
}

TEST(Subgraph, WholeGraphKeepsEveryComponent) {
    const auto s = whole_graph(two_triangles(), 8);
    EXPECT_EQ(s.size(), 6);
    EXPECT_EQ(s.capacity(), 8);
    EXPECT_EQ(Matrix(s.adjacency.topLeftCorner(6, 6)), two_triangles().adjacency());
    EXPECT_TRUE(s.adjacency.rightCols(2).isZero(0.0));
    EXPECT_THROW(whole_graph(two_triangles(), 5), ArgumentError);
}
