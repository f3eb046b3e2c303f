#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "pick/graphs.hpp"
#include "support.hpp"

using namespace pick;
using pick::testing::all_dags;
using pick::testing::dag_from;

TEST(Dag, RejectsCyclesAndSelfLoops) {
    BinaryMatrix cyc = BinaryMatrix::Zero(3, 3);
    cyc(0, 1) = cyc(1, 2) = cyc(2, 0) = 1;
    EXPECT_THROW(Dag{cyc}, ArgumentError);
    BinaryMatrix self = BinaryMatrix::Zero(2, 2);
    self(1, 1) = 1;
    EXPECT_THROW(Dag{self}, ArgumentError);
    BinaryMatrix two = BinaryMatrix::Zero(2, 2);
    two(0, 1) = 2;
    EXPECT_THROW(Dag{two}, ArgumentError);
    EXPECT_THROW(Dag{BinaryMatrix::Zero(2, 3)}, ArgumentError);
}

TEST(Dag, ParentsChildrenOrder) {
    const Dag g = dag_from(4, {{2, 0}, {0, 1}, {2, 3}});
    EXPECT_EQ(g.parents(0), std::vector<Index>{2});
    EXPECT_EQ(g.children(2), (std::vector<Index>{0, 3}));
    TopoOrder order{g.topological_order()};
    EXPECT_TRUE(order.consistent_with(g));
    EXPECT_FALSE((TopoOrder{{0, 1, 2, 3}}.consistent_with(g)));
    EXPECT_FALSE((TopoOrder{{2, 2, 0, 1}}.is_permutation()));
}

TEST(Dag, EnumerationCountsMatchKnownSequence) {
    // Labelled DAG counts 1, 3, 25, 543.
    EXPECT_EQ(all_dags(1).size(), 1u);
    EXPECT_EQ(all_dags(2).size(), 3u);
    EXPECT_EQ(all_dags(3).size(), 25u);
    EXPECT_EQ(all_dags(4).size(), 543u);
}

TEST(GenerateErDag, ZeroExpectedEdgesGivesEmpty) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng rng(s);
        EXPECT_EQ(generate_er_dag(3, 0, rng).edge_count(), 0);
    }
}

TEST(GenerateErDag, ClampedProbabilityGivesFullOrder) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng rng(s);
        const Dag g = generate_er_dag(3, 3, rng);
        EXPECT_EQ(g.edge_count(), 3);
        // full triangular under its own order: order is unique
        const auto order = g.topological_order();
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = a + 1; b < 3; ++b) EXPECT_TRUE(g.has_edge(order[a], order[b]));
    }
}

TEST(GenerateErDag, MeanEdgeCountMatchesTarget) {
    double total = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        Rng rng = derive_rng(s, 1);
        total += static_cast<double>(generate_er_dag(10, 10, rng).edge_count());
    }
    EXPECT_NEAR(total / 1000.0, 10.0, 1.0);
}

TEST(GenerateErDag, AlwaysAcyclicProperty) {
    Rng meta(12345);
    std::uniform_int_distribution<int> dsize(1, 15);
    std::uniform_real_distribution<double> frac(0.0, 1.2);
    for (int trial = 0; trial < 1500; ++trial) {
        const Index d = dsize(meta);
        const double expected = frac(meta) * static_cast<double>(d * (d - 1) / 2);
        Rng rng(static_cast<std::uint64_t>(trial));
        const Dag g = generate_er_dag(d, expected, rng);  // constructor validates
        EXPECT_TRUE(Dag::is_acyclic(g.adjacency()));
        EXPECT_TRUE(g.adjacency().diagonal().isZero());
    }
}

TEST(GenerateErDag, Deterministic) {
    Rng a = derive_rng(7, 1), b = derive_rng(7, 1), c = derive_rng(7, 2);
    const Dag ga = generate_er_dag(12, 12, a);
    EXPECT_EQ(ga, generate_er_dag(12, 12, b));
    EXPECT_FALSE(ga == generate_er_dag(12, 12, c));
}

TEST(GenerateErLagged, ZeroAndFull) {
    Rng rng(1);
    const auto zero = generate_er_lagged(4, 1, 0, rng);
    EXPECT_EQ(zero.lags(), 1);
    EXPECT_EQ(zero.edge_count(), 0);
    const auto full = generate_er_lagged(4, 2, 16, rng);
    EXPECT_EQ(full.lags(), 2);
    EXPECT_TRUE((full.matrix(1).array() == 1).all());
    EXPECT_TRUE((full.matrix(2).array() == 1).all());
}

TEST(GenerateErLagged, MeanDensity) {
    double total = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        Rng rng(s);
        total += static_cast<double>(generate_er_lagged(10, 1, 10, rng).edge_count()) / 100.0;
    }
    EXPECT_NEAR(total / 1000.0, 0.10, 0.01);
}

TEST(GenerateNetwork, EmptyAndComplete) {
    Rng rng(3);
    EXPECT_EQ(generate_network(5, 0.0, rng).edge_count(), 0);
    const Network full = generate_network(5, 1.0, rng);
    EXPECT_EQ(full.edge_count(), 10);
    const BinaryMatrix m = full.dense();
    EXPECT_EQ(m, m.transpose());
    EXPECT_TRUE(m.diagonal().isZero());
}

TEST(GenerateNetwork, MeanEdgeCount) {
    double total = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng rng(s);
        total += static_cast<double>(generate_network(1000, 0.01, rng).edge_count());
    }
    EXPECT_NEAR(total / 20.0, 4995.0, 150.0);
}

TEST(Network, SymmetricSortedNeighbors) {
    Network net = Network::from_edges(5, {{3, 1}, {0, 4}, {1, 0}, {1, 3}});
    EXPECT_EQ(net.edge_count(), 3);
    EXPECT_EQ(net.neighbors(1), (std::vector<Index>{0, 3}));
    EXPECT_TRUE(net.has_edge(4, 0));
    EXPECT_THROW(net.add_edge(2, 2), ArgumentError);
    EXPECT_THROW(net.add_edge(0, 5), ArgumentError);
}

// ---------------------------------------------------------------------------
// Metrics

TEST(Metrics, IdenticalGraphs) {
    const Dag g = dag_from(3, {{0, 1}, {1, 2}});
    EXPECT_EQ(shd(g, g), 0);
    EXPECT_DOUBLE_EQ(fdr(g, g), 0.0);
    EXPECT_DOUBLE_EQ(tpr(g, g), 1.0);
}

TEST(Metrics, ReversalPlusExtra) {
    const Dag truth = dag_from(3, {{0, 1}, {1, 2}});
    const Dag pred = dag_from(3, {{0, 1}, {2, 1}, {0, 2}});
    EXPECT_EQ(shd(pred, truth), 2);
}

TEST(Metrics, MissingEdge) {
    EXPECT_EQ(shd(Dag(3), dag_from(3, {{0, 1}})), 1);
}

TEST(Metrics, FdrTprHandCase) {
    const Dag truth = dag_from(3, {{0, 1}, {1, 2}, {0, 2}});
    const Dag pred = dag_from(3, {{0, 1}, {2, 1}});
    EXPECT_DOUBLE_EQ(fdr(pred, truth), 0.5);
    EXPECT_DOUBLE_EQ(tpr(pred, truth), 1.0 / 3.0);
}

TEST(Metrics, EmptyPrediction) {
    const Dag truth = dag_from(3, {{0, 1}});
    EXPECT_DOUBLE_EQ(fdr(Dag(3), truth), 0.0);
    EXPECT_DOUBLE_EQ(tpr(Dag(3), truth), 0.0);
    EXPECT_DOUBLE_EQ(tpr(Dag(3), Dag(3)), 1.0);
}

TEST(Metrics, ShapeMismatchThrows) {
    EXPECT_THROW(shd(Dag(3), Dag(4)), ArgumentError);
    EXPECT_THROW(metrics_lagged(LaggedGraphs(3, 1), LaggedGraphs(3, 2)), ArgumentError);
}

TEST(MetricsLagged, Cases) {
    const LaggedGraphs a(3, 1);
    EXPECT_EQ(metrics_lagged(a, a).shd, 0);

    LaggedGraphs t(2, 1), p(2, 1);
    t.matrix(1)(0, 1) = 1;
    p.matrix(1)(1, 0) = 1;
    EXPECT_EQ(metrics_lagged(p, t).shd, 2);

    LaggedGraphs t3(3, 1);
    t3.matrix(1)(0, 1) = t3.matrix(1)(1, 2) = t3.matrix(1)(2, 2) = 1;
    LaggedGraphs p3 = t3;
    p3.matrix(1)(0, 0) = 1;
    const auto m = metrics_lagged(p3, t3);
    EXPECT_EQ(m.shd, 1);
    EXPECT_DOUBLE_EQ(m.fdr, 0.25);
    EXPECT_DOUBLE_EQ(m.tpr, 1.0);
}

namespace {

// Independent pair classifier: state of {i, j} is 0 none, 1 i->j, 2 j->i.
int pair_state(const BinaryMatrix& m, Index i, Index j) { return m(i, j) ? 1 : (m(j, i) ? 2 : 0); }

struct Counts {
    Index shd = 0, correct = 0, wrong = 0, n_pred = 0, n_true = 0;
};

Counts brute_counts(const BinaryMatrix& pred, const BinaryMatrix& truth) {
    Counts c;
    for (Index i = 0; i < pred.rows(); ++i)
        for (Index j = i + 1; j < pred.rows(); ++j) {
            const int p = pair_state(pred, i, j), t = pair_state(truth, i, j);
            c.shd += p != t;
            c.n_pred += p != 0;
            c.n_true += t != 0;
            if (p != 0 && p == t) ++c.correct;
            if (p != 0 && p != t) ++c.wrong;
        }
    return c;
}

void check_against_brute(const BinaryMatrix& pm, const BinaryMatrix& tm) {
    const Dag pred(pm), truth(tm);
    const auto c = brute_counts(pm, tm);
    const auto r = evaluate(pred, truth);
    ASSERT_EQ(r.shd, c.shd);
    ASSERT_EQ(r.n_pred, c.n_pred);
    ASSERT_EQ(r.n_true, c.n_true);
    const double wrong = r.fdr * static_cast<double>(r.n_pred);
    const double right = r.tpr * static_cast<double>(r.n_true);
    ASSERT_NEAR(wrong, static_cast<double>(c.wrong), 1e-9);
    if (c.n_true > 0) ASSERT_NEAR(right, static_cast<double>(c.correct), 1e-9);
    ASSERT_NEAR(wrong, std::round(wrong), 1e-9);
}

}  // namespace

TEST(Metrics, MatchesBruteForceExhaustiveUpToFour) {
    for (Index d = 2; d <= 4; ++d) {
        const auto dags = all_dags(d);
        for (const auto& p : dags)
            for (const auto& t : dags) check_against_brute(p, t);
    }
}

TEST(Metrics, MatchesBruteForceSampledFive) {
    Rng rng(99);
    for (int trial = 0; trial < 20000; ++trial) {
        std::uniform_real_distribution<double> e(0.0, 10.0);
        const Dag p = generate_er_dag(5, e(rng), rng);
        const Dag t = generate_er_dag(5, e(rng), rng);
        check_against_brute(p.adjacency(), t.adjacency());
    }
}

TEST(Metrics, ShdIsAMetricOnFourNodes) {
    const auto dags = all_dags(4);
    const auto m = static_cast<Index>(dags.size());
    Eigen::MatrixXi dist(m, m);
    for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b) dist(a, b) = static_cast<int>(shd(Dag(dags[a]), Dag(dags[b])));
    EXPECT_EQ(dist, dist.transpose());
    EXPECT_TRUE(dist.diagonal().isZero());
    for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b)
            if (a != b) ASSERT_GT(dist(a, b), 0);
    Index violations = 0;
    for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b)
            for (Index c = 0; c < m; ++c) violations += dist(a, c) > dist(a, b) + dist(b, c);
    EXPECT_EQ(violations, 0);
}
