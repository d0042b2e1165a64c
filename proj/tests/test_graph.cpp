#include <doctest.h>

#include "gnnflow/common.hpp"
#include "gnnflow/graph.hpp"
#include "test_support.hpp"

using namespace gnnflow;

TEST_CASE("graph normalization symmetrizes and deduplicates") {
    bool irregular = false;
    const Graph g = Graph::from_edges(3, {{1, 0}, {0, 1}, {2, 2}, {1, 2}}, &irregular);
    CHECK(irregular);
    CHECK(g.edges == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});
    CHECK_THROWS_AS(Graph::from_edges(2, {{0, 5}}), DimensionError);
}

TEST_CASE("train index validation") {
    CHECK_THROWS_AS(TrainIndex::from_ids({}, 3), ConfigError);
    CHECK_THROWS_AS(TrainIndex::from_ids({0, 7}, 3), DimensionError);
    const TrainIndex idx = TrainIndex::from_ids({2, 0, 2}, 3);
    CHECK(idx.indices == std::vector<int>{0, 2});
}

TEST_CASE("aggregation matrices: pinned cases") {
    SUBCASE("single node, no edges, gin") {
        const Graph g = Graph::from_edges(1, {});
        CHECK(aggregation_matrix(g, AggregationKind::Gin) == DenseMatrix{{1}});
    }
    SUBCASE("two-node path, gcn") {
        const Graph g = Graph::from_edges(2, {{0, 1}});
        const DenseMatrix s = aggregation_matrix(g, AggregationKind::Gcn);
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < 2; ++j) {
                CHECK(s(i, j) == doctest::Approx(0.5));
            }
        }
    }
    SUBCASE("triangle, gin, is all ones") {
        const Graph g = Graph::from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
        const DenseMatrix s = aggregation_matrix(g, AggregationKind::Gin);
        for (double v : s.entries()) CHECK(v == 1.0);
    }
}

TEST_CASE("aggregation matrices are exactly symmetric") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const Graph g = testing::random_er_graph(rng, 6, 0.5);
        for (const auto kind : {AggregationKind::Gin, AggregationKind::Gcn}) {
            const DenseMatrix s = aggregation_matrix(g, kind);
            DenseMatrix diff = s;
            diff -= s.transposed();
            CHECK(diff.frobenius_norm() == 0.0);
        }
    }
}

TEST_CASE("gcn on a regular graph scales A+I uniformly") {
    // Cycle of degree 2: every entry of A+I is divided by 3.
    std::vector<std::pair<int, int>> edges;
    const int n = 5;
    for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
    const Graph g = Graph::from_edges(n, edges);
    const DenseMatrix gin = aggregation_matrix(g, AggregationKind::Gin);
    const DenseMatrix gcn = aggregation_matrix(g, AggregationKind::Gcn);
    for (std::size_t k = 0; k < gin.entries().size(); ++k) {
        CHECK(gcn.entries()[k] == doctest::Approx(gin.entries()[k] / 3.0));
    }
}

TEST_CASE("isolated nodes keep the gcn normalization finite") {
    const Graph g = Graph::from_edges(3, {{0, 1}});
    const DenseMatrix s = aggregation_matrix(g, AggregationKind::Gcn);
    CHECK(s.all_finite());
    CHECK(s(2, 2) == doctest::Approx(1.0));
}

TEST_CASE("propagated features: pinned cases") {
    SUBCASE("zero power means plain column restriction") {
        Rng rng(9);
        const DenseMatrix x = testing::random_matrix(rng, 2, 3);
        const DenseMatrix s = testing::random_matrix(rng, 3, 3);
        const DenseMatrix p = propagated_features(x, s, 0, TrainIndex::all(3));
        CHECK(p.entries() == x.entries());
    }
    SUBCASE("permutation aggregation swaps columns") {
        const DenseMatrix x = DenseMatrix::identity(2);
        const DenseMatrix swap{{0, 1}, {1, 0}};
        const DenseMatrix p = propagated_features(x, swap, 1, TrainIndex::all(2));
        CHECK(p == swap);
    }
    SUBCASE("identity powers with a column pick") {
        const DenseMatrix x{{1, 2}};
        const DenseMatrix p =
            propagated_features(x, DenseMatrix::identity(2), 3, TrainIndex::from_ids({1}, 2));
        CHECK(p == DenseMatrix{{2}});
    }
}

TEST_CASE("propagated features reject mismatched shapes") {
    const DenseMatrix x(2, 3);
    CHECK_THROWS_AS(propagated_features(x, DenseMatrix(4, 4), 1, TrainIndex::all(4)),
                    DimensionError);
    CHECK_THROWS_AS(propagated_features(x, DenseMatrix(3, 2), 1, TrainIndex::all(3)),
                    DimensionError);
}

TEST_CASE("stacked features: pinned cases") {
    SUBCASE("depth zero is a single block") {
        Rng rng(10);
        const DenseMatrix x = testing::random_matrix(rng, 2, 4);
        const DenseMatrix s = testing::random_matrix(rng, 4, 4);
        const TrainIndex idx = TrainIndex::from_ids({0, 2}, 4);
        CHECK(stacked_features(x, s, 0, idx).entries() == x.columns(idx.indices).entries());
    }
    SUBCASE("scalar geometric powers") {
        const DenseMatrix g = stacked_features(DenseMatrix{{1}}, DenseMatrix{{2}}, 2,
                                               TrainIndex::all(1));
        CHECK(g == DenseMatrix{{1}, {2}, {4}});
    }
}

TEST_CASE("stacked blocks equal independently propagated features bit-exactly") {
    Rng rng(77);
    const int n = 6;
    const Graph g = testing::random_er_graph(rng, n, 0.6);
    const DenseMatrix s = aggregation_matrix(g, AggregationKind::Gcn);
    const DenseMatrix x = testing::random_matrix(rng, 3, static_cast<std::size_t>(n));
    const TrainIndex idx = TrainIndex::from_ids({0, 3, 4}, n);
    const int depth = 4;
    const DenseMatrix stacked = stacked_features(x, s, depth, idx);
    CHECK(stacked.rows() == static_cast<std::size_t>(depth + 1) * x.rows());
    for (int l = 0; l <= depth; ++l) {
        const DenseMatrix block = propagated_features(x, s, l, idx);
        for (std::size_t i = 0; i < block.rows(); ++i) {
            for (std::size_t j = 0; j < block.cols(); ++j) {
                CHECK(stacked(static_cast<std::size_t>(l) * x.rows() + i, j) == block(i, j));
            }
        }
    }
}
