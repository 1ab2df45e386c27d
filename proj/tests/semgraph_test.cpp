#include <gtest/gtest.h>

#include <set>

#include "groce/semgraph.hpp"
#include "groce/synthlab.hpp"
#include "test_support.hpp"

namespace groce {
namespace {

using testing::brute_force_edges;
using testing::edges_of;
using testing::table_of;

void expect_structural_invariants(const SemanticGraph& g) {
    const auto& p = g.params();
    for (NodeId i = 0; i < g.node_count(); ++i) {
        const auto nb = g.neighbors(i);
        ASSERT_TRUE(std::is_sorted(nb.begin(), nb.end()));
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const NodeId j = nb[k];
            ASSERT_NE(j, i) << "self loop at " << i;
            ASSERT_EQ(g.weight(j, i), g.weights(i)[k]) << "asymmetric edge " << i << "-" << j;
            const float w = g.weights(i)[k];
            const double expected = std::exp((double(g.similarities(i)[k]) - p.tau0) / p.sigma);
            ASSERT_GT(w, 1.0f);
            ASSERT_LE(std::abs(w - expected) / expected, 1e-6);
        }
    }
}

TEST(SemGraphTest, SingleEdgeWeightFollowsExponentialRule) {
    const auto g = build_graph(table_of(testing::pair_with_similarity(0.5)), GraphParams{0.3, 0.1, 0.0});
    ASSERT_EQ(g.edge_count(), 1u);
    EXPECT_NEAR(g.weight(0, 1), std::exp(2.0), 7.389 * 1e-5);  // exp((0.5 - 0.3) / 0.1)
    EXPECT_NEAR(g.weight(0, 1), 7.389056, 1e-4);
}

TEST(SemGraphTest, SimilarityAtThresholdDoesNotLink) {
    EXPECT_FALSE(exceeds_base_threshold(0.3f, 0.3));
    EXPECT_TRUE(exceeds_base_threshold(std::nextafter(0.3f, 1.0f), 0.3));
    const auto g = build_graph(table_of(testing::pair_with_similarity(0.3)), GraphParams{0.3, 0.1, 0.0});
    EXPECT_EQ(g.edge_count(), 0u);
}

TEST(SemGraphTest, OrthogonalVectorsStayIsolated) {
    const auto g = build_graph(table_of({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}), GraphParams{});
    EXPECT_EQ(g.edge_count(), 0u);
    EXPECT_EQ(degree_stats(g).isolated_count, 3u);
}

TEST(SemGraphTest, SingleNodeTable) {
    const auto g = build_graph(table_of({{0.2f, 0.9f}}), GraphParams{});
    EXPECT_EQ(g.node_count(), 1u);
    EXPECT_EQ(g.edge_count(), 0u);
}

TEST(SemGraphTest, IdenticalEmbeddingsGiveCompleteGraph) {
    const auto g = build_graph(table_of({{1, 1, 0}, {1, 1, 0}, {1, 1, 0}, {1, 1, 0}}), GraphParams{});
    EXPECT_EQ(g.edge_count(), 6u);
    const auto s = degree_stats(g);
    EXPECT_DOUBLE_EQ(s.mean_degree, 3.0);
    EXPECT_EQ(s.max_degree, 3u);
    EXPECT_EQ(s.isolated_count, 0u);
    expect_structural_invariants(g);
}

TEST(SemGraphTest, RejectsInvalidParams) {
    auto t = table_of({{1, 0}, {0, 1}});
    EXPECT_THROW(build_graph(t, GraphParams{1.5, 0.1, 0.5}), ValidationError);
    EXPECT_THROW(build_graph(t, GraphParams{0.0, 0.1, 0.5}), ValidationError);
    EXPECT_THROW(build_graph(t, GraphParams{0.3, 0.0, 0.5}), ValidationError);
    EXPECT_THROW(build_graph(t, GraphParams{0.3, 0.1, -1.0}), ValidationError);
}

TEST(SemGraphTest, BlockedBuildMatchesBruteForce) {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        // 700 rows spans several similarity tiles, including a ragged last one.
        const std::size_t rows = seed < 3 ? 700 : 150 + 20 * seed;
        const auto table = testing::random_table(rows, 16, seed);
        for (double lambda : {0.0, 0.5, 2.0}) {
            const GraphParams p{0.3 + 0.02 * double(seed % 5), 0.1, lambda};
            const auto g = build_graph(table, p);
            const auto want = brute_force_edges(table, p);
            const auto got = edges_of(g);
            ASSERT_EQ(got.size(), want.size()) << "seed " << seed << " lambda " << lambda;
            for (std::size_t k = 0; k < got.size(); ++k) {
                ASSERT_EQ(got[k].i, want[k].i);
                ASSERT_EQ(got[k].j, want[k].j);
                ASSERT_NEAR(got[k].sim, want[k].sim, 1e-6);
                ASSERT_NEAR(got[k].weight / want[k].weight, 1.0, 1e-6);
            }
            expect_structural_invariants(g);
        }
    }
}

TEST(SemGraphTest, WeightsMonotoneInSimilarity) {
    const auto g = build_graph(testing::random_table(300, 12, 4), GraphParams{});
    auto edges = edges_of(g);
    ASSERT_GT(edges.size(), 50u);
    std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) { return a.sim < b.sim; });
    for (std::size_t k = 1; k < edges.size(); ++k) {
        if (edges[k].sim > edges[k - 1].sim) {
            const auto& p = g.params();
            ASSERT_GT(std::exp((double(edges[k].sim) - p.tau0) / p.sigma),
                      std::exp((double(edges[k - 1].sim) - p.tau0) / p.sigma));
            ASSERT_GE(edges[k].weight, edges[k - 1].weight);
        }
    }
}

TEST(SemGraphTest, RaisingThresholdOnlyRemovesEdgesWithoutAdaptiveGain) {
    const auto table = testing::random_table(400, 16, 8);
    std::set<std::pair<NodeId, NodeId>> previous;
    bool first = true;
    for (double tau0 : {0.2, 0.3, 0.4, 0.5, 0.6}) {
        std::set<std::pair<NodeId, NodeId>> current;
        for (const auto& e : edges_of(build_graph(table, GraphParams{tau0, 0.1, 0.0}))) current.emplace(e.i, e.j);
        if (!first) {
            for (const auto& e : current) ASSERT_TRUE(previous.count(e)) << "edge appeared at tau0=" << tau0;
        }
        previous = std::move(current);
        first = false;
    }
}

TEST(SemGraphTest, MeanDegreeNonIncreasingInThreshold) {
    const auto table = testing::random_table(600, 24, 21);
    double last = std::numeric_limits<double>::infinity();
    for (double tau0 : {0.2, 0.3, 0.4, 0.5}) {
        const double mean = degree_stats(build_graph(table, GraphParams{tau0, 0.1, 0.5})).mean_degree;
        EXPECT_LE(mean, last) << "tau0=" << tau0;
        last = mean;
    }
}

TEST(SemGraphTest, DegreeStatsOfEmptyGraph) {
    const auto g = build_graph(table_of({{1, 0, 0, 0, 0}, {0, 1, 0, 0, 0}, {0, 0, 1, 0, 0}, {0, 0, 0, 1, 0}, {0, 0, 0, 0, 1}}),
                               GraphParams{});
    const auto s = degree_stats(g);
    EXPECT_EQ(s.mean_degree, 0.0);
    EXPECT_EQ(s.isolated_count, 5u);
    EXPECT_EQ(s.edge_count, 0u);
}

TEST(SemGraphTest, AdaptiveThresholdHigherInDenseRegions) {
    // Loose clusters (wide similarity spread) next to sparse background rows.
    const auto spec = make_planted_spec(3, 12, 0.6, 300, 64, 17, true);
    const auto planted = generate_table(spec);
    const auto g = build_graph(planted.table, GraphParams{});
    double intra = 0;
    std::size_t intra_n = 0;
    for (const auto& ids : planted.members) {
        for (NodeId id : ids) {
            intra += g.node_threshold(id);
            ++intra_n;
        }
    }
    double isolated = 0;
    std::size_t isolated_n = 0;
    for (NodeId id = static_cast<NodeId>(intra_n); id < g.node_count(); ++id) {
        if (g.degree(id) == 0) {
            isolated += g.node_threshold(id);
            ++isolated_n;
        }
    }
    ASSERT_GT(isolated_n, 0u);
    EXPECT_GE(intra / double(intra_n), isolated / double(isolated_n));
    EXPECT_GT(intra / double(intra_n), g.params().tau0);
}

TEST(SemGraphInsertTest, DuplicateDirectionGetsMaximalWeight) {
    auto g = build_graph(testing::random_table(60, 8, 2), GraphParams{});
    const auto row = g.table().row(17);
    const std::vector<float> copy(row.begin(), row.end());
    const NodeId id = insert_node(g, "copy17", copy);
    EXPECT_EQ(id, 60u);
    const double max_weight = std::exp((1.0 - g.params().tau0) / g.params().sigma);
    EXPECT_NEAR(g.weight(id, 17) / max_weight, 1.0, 1e-6);
    EXPECT_EQ(g.weight(17, id), g.weight(id, 17));
    expect_structural_invariants(g);
}

TEST(SemGraphInsertTest, OrthogonalVectorInsertedIsolated) {
    auto g = build_graph(table_of({{1, 0, 0, 0}, {0.9f, 0.1f, 0, 0}, {0, 1, 0, 0}}), GraphParams{});
    const NodeId id = insert_node(g, "far", std::vector<float>{0, 0, 0, 2});
    EXPECT_EQ(g.degree(id), 0u);
    EXPECT_EQ(g.node_count(), 4u);
    EXPECT_NEAR(norm(g.table().row(id)), 1.0, 1e-7);
}

TEST(SemGraphInsertTest, RejectsDuplicateLabelAndWrongDimension) {
    auto g = build_graph(table_of({{1, 0, 0}, {0, 1, 0}}), GraphParams{});
    EXPECT_THROW(insert_node(g, "n0", std::vector<float>{0, 0, 1}), ValidationError);
    EXPECT_THROW(insert_node(g, "new", std::vector<float>{0, 1}), ValidationError);
    EXPECT_EQ(g.node_count(), 2u);
}

TEST(SemGraphInsertTest, UpdatesSourceHash) {
    auto g = build_graph(testing::random_table(20, 6, 1), GraphParams{});
    const auto before = g.source_hash();
    insert_node(g, "extra", testing::random_vector(6, 3));
    EXPECT_NE(g.source_hash(), before);
    EXPECT_EQ(g.source_hash(), g.table().content_hash());
}

TEST(SemGraphIoTest, RoundTripIsBitExact) {
    testing::TempDir dir;
    const auto table = std::make_shared<EmbeddingTable>(testing::random_table(1000, 16, 5));
    const auto g = build_graph(table, GraphParams{0.35, 0.1, 0.5});
    ASSERT_GT(g.edge_count(), 100u);
    save_graph(g, dir.file("g.bin"));
    const auto back = load_graph(dir.file("g.bin"), table);
    EXPECT_EQ(back.params(), g.params());
    EXPECT_EQ(back.offsets(), g.offsets());
    EXPECT_EQ(back.columns(), g.columns());
    EXPECT_EQ(back.weight_array(), g.weight_array());
    EXPECT_EQ(back.similarity_array(), g.similarity_array());
    for (NodeId i = 0; i < g.node_count(); ++i) {
        EXPECT_EQ(back.neighborhood_mean(i), g.neighborhood_mean(i));
        EXPECT_EQ(back.neighborhood_stddev(i), g.neighborhood_stddev(i));
    }
}

TEST(SemGraphIoTest, EmptyEdgeGraphRoundTrip) {
    testing::TempDir dir;
    const auto table = std::make_shared<EmbeddingTable>(table_of({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
    const auto g = build_graph(table, GraphParams{});
    save_graph(g, dir.file("g.bin"));
    const auto back = load_graph(dir.file("g.bin"), table);
    EXPECT_EQ(back.node_count(), 3u);
    EXPECT_EQ(back.edge_count(), 0u);
}

TEST(SemGraphIoTest, WrongMagicAndVersionRejected) {
    testing::TempDir dir;
    const auto table = std::make_shared<EmbeddingTable>(table_of({{1, 0}, {1, 0.1f}}));
    save_graph(build_graph(table, GraphParams{}), dir.file("g.bin"));
    {
        std::fstream f(dir.file("g.bin"), std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXXXXXX", 8);
    }
    EXPECT_THROW(load_graph(dir.file("g.bin"), table), FormatError);
    save_graph(build_graph(table, GraphParams{}), dir.file("g.bin"));
    {
        std::fstream f(dir.file("g.bin"), std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8);
        const char v2[4] = {2, 0, 0, 0};
        f.write(v2, 4);
    }
    EXPECT_THROW(load_graph(dir.file("g.bin"), table), FormatError);
}

TEST(SemGraphIoTest, MismatchedTableIsIntegrityError) {
    testing::TempDir dir;
    const auto table = std::make_shared<EmbeddingTable>(testing::random_table(30, 8, 1));
    save_graph(build_graph(table, GraphParams{}), dir.file("g.bin"));
    const auto other = std::make_shared<EmbeddingTable>(testing::random_table(30, 8, 2));
    EXPECT_THROW(load_graph(dir.file("g.bin"), other), IntegrityError);
    EXPECT_EQ(read_graph_source_hash(dir.file("g.bin")), table->content_hash());
}

TEST(SemGraphInsertTest, IncrementalEdgesAgreeWithRebuild) {
    std::size_t nonempty = 0;
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const auto r = testing::incremental_insert_case(seed);
        EXPECT_TRUE(r.subset) << "seed " << seed;
        EXPECT_LE(r.max_weight_rel_error, 1e-6) << "seed " << seed;
        if (r.incremental_edges > 0) ++nonempty;
    }
    EXPECT_GT(nonempty, 20u);
}

// Neighbors of the inserted node see their statistics shift, which can move edges far
// from the new node; the whole graph must still match a rebuild.
TEST(SemGraphInsertTest, RepeatedInsertsMatchFullRebuild) {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        auto g = build_graph(testing::random_table(120, 12, seed + 500), GraphParams{0.35, 0.1, 0.5});
        for (int k = 0; k < 5; ++k) {
            auto v = testing::random_vector(12, seed * 10 + static_cast<std::uint64_t>(k));
            const auto base = g.table().row(static_cast<std::size_t>(k * 17));
            for (std::size_t d = 0; d < v.size(); ++d) v[d] = base[d] + 0.15f * v[d];
            insert_node(g, "x" + std::to_string(k), v);
        }
        const auto rebuilt = build_graph(g.table(), g.params());
        const auto a = testing::edges_of(g);
        const auto b = testing::edges_of(rebuilt);
        ASSERT_EQ(a.size(), b.size()) << "seed " << seed;
        for (std::size_t e = 0; e < a.size(); ++e) {
            ASSERT_EQ(std::tie(a[e].i, a[e].j), std::tie(b[e].i, b[e].j)) << "seed " << seed;
            EXPECT_NEAR(a[e].weight / b[e].weight, 1.0f, 1e-6);
        }
        for (NodeId i = 0; i < g.node_count(); ++i) {
            EXPECT_NEAR(g.neighborhood_stddev(i), rebuilt.neighborhood_stddev(i), 1e-9);
        }
    }
}

}  // namespace
}  // namespace groce
