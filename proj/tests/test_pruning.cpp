#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "pick/pruning.hpp"
#include "pick/synth.hpp"
#include "support.hpp"

using namespace pick;
using namespace pick::testing;

TEST(SplineBasis, SingleFunctionIsCenteredLinear) {
    const Eigen::VectorXd x = standard_normal(200, 1, 3).col(0);
    const Eigen::MatrixXd b = spline_basis(x, 1);
    ASSERT_EQ(b.cols(), 1);
    EXPECT_NEAR(b.col(0).mean(), 0.0, 1e-12);
    EXPECT_NEAR(correlation(b.col(0), x), 1.0, 1e-12);
}

TEST(SplineBasis, PartitionOfUnity) {
    const Eigen::VectorXd x = standard_normal(300, 1, 4).col(0);
    for (Index nb : {1, 2, 3, 6, 9}) {
        const Eigen::MatrixXd raw = bspline_raw_basis(x, nb);
        EXPECT_EQ(raw.cols(), nb + 1);
        EXPECT_LE((raw.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
        EXPECT_GE(raw.minCoeff(), -1e-15);
        const Eigen::MatrixXd centered = spline_basis(x, nb);
        EXPECT_EQ(centered.cols(), nb);
        EXPECT_LE(centered.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(SplineBasis, FitsSineOnGrid) {
    const Index n = 601;
    Eigen::VectorXd x(n);
    for (Index i = 0; i < n; ++i) x(i) = -3.0 + 6.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    const Eigen::VectorXd y = x.array().sin();
    const Eigen::MatrixXd b = spline_basis(x, 6);
    const AdditiveFit fit = fit_additive(y, x, {6, 0.001, SelectionRule::FTest});
    const Eigen::VectorXd fitted = (b * fit.coefs[0]).array() + fit.intercept;
    EXPECT_LE((fitted - y).cwiseAbs().maxCoeff(), 0.05);
}

TEST(SplineBasis, Errors) {
    EXPECT_THROW(spline_basis(Eigen::VectorXd::Zero(20), 3), DegenerateDataError);
    EXPECT_THROW(spline_basis(Eigen::VectorXd::LinSpaced(4, 0, 1), 3), ArgumentError);
    EXPECT_THROW(spline_basis(Eigen::VectorXd::LinSpaced(10, 0, 1), 0), ArgumentError);
}

TEST(SplineBasis, HeavyTiesStillPartitionUnity) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(100);
    x.tail(5).setLinSpaced(5, 1.0, 2.0);
    const Eigen::MatrixXd raw = bspline_raw_basis(x, 6);
    EXPECT_LE((raw.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(FitAdditive, ExactLinearResponse) {
    const Eigen::MatrixXd x = standard_normal(200, 2, 5);
    const Eigen::VectorXd y = (1.0 + 2.0 * x.col(0).array()).matrix();
    const AdditiveFit fit = fit_additive(y, x);
    EXPECT_LE(fit.resid_var, 1e-10 * sample_variance(y));
    EXPECT_EQ(fit.dof, 200 - 1 - 12);
}

TEST(FitAdditive, InterceptOnly) {
    const Eigen::VectorXd y = standard_normal(50, 1, 6).col(0);
    const AdditiveFit fit = fit_additive(y, Eigen::MatrixXd(50, 0));
    EXPECT_NEAR(fit.intercept, y.mean(), 1e-10);
    const double unbiased = (y.array() - y.mean()).square().sum() / 49.0;
    EXPECT_NEAR(fit.resid_var, unbiased, 1e-9);
    EXPECT_TRUE(fit.coefs.empty());
}

TEST(FitAdditive, CovarianceBlocksSymmetricPsd) {
    Eigen::MatrixXd x = standard_normal(400, 3, 7);
    Eigen::VectorXd y = x.col(0).array().sin() + 0.5 * standard_normal(400, 1, 8).col(0).array();
    const AdditiveFit fit = fit_additive(y, x);
    for (const auto& c : fit.cov) {
        EXPECT_EQ(c, c.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
    }
}

TEST(FitAdditive, SignalStatisticDominatesNoise) {
    int hits = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const Eigen::MatrixXd x = standard_normal(1000, 2, 500 + s);
        const Eigen::VectorXd y = x.col(0).array().sin() + 0.1 * standard_normal(1000, 1, 900 + s).col(0).array();
        const AdditiveFit fit = fit_additive(y, x);
        hits += fit.statistic(0) >= 10 * fit.statistic(1);
    }
    EXPECT_GE(hits, 95);
}

TEST(FitAdditive, StatisticScaleInvariant) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        Eigen::MatrixXd x = standard_normal(300, 3, 40 + s);
        const Eigen::VectorXd y = x.col(0).array().sin() + x.col(1).array().cos() +
                                  0.5 * standard_normal(300, 1, 70 + s).col(0).array();
        const AdditiveFit a = fit_additive(y, x);
        for (double c : {0.01, 3.0, 250.0}) {
            Eigen::MatrixXd xs = x;
            xs.col(1) *= c;
            const AdditiveFit b = fit_additive(y, xs);
            for (Index i = 0; i < 3; ++i) EXPECT_NEAR(b.statistic(i) / a.statistic(i), 1.0, 1e-6);
        }
    }
}

TEST(FitAdditive, TooFewSamples) {
    EXPECT_THROW(fit_additive(Eigen::VectorXd::Zero(13), standard_normal(13, 2, 1)), ArgumentError);
}

TEST(PruneParents, Boundaries) {
    const Eigen::VectorXd y = standard_normal(100, 1, 1).col(0);
    EXPECT_TRUE(prune_parents(y, Eigen::MatrixXd(100, 0)).empty());
    Eigen::MatrixXd x = standard_normal(100, 2, 2);
    const Eigen::VectorXd strong = 5.0 * x.col(0).array().sin() + 0.01 * y.array();
    EXPECT_TRUE(prune_parents(strong, x, {6, 1e-300, SelectionRule::InverseAlpha}).empty());
    EXPECT_EQ(prune_parents(strong, x), std::vector<Index>{0});
}

TEST(PruneParents, NullSelectionRates) {
    for (double alpha : {0.01, 0.05}) {
        const int trials = 1000;
        std::vector<int> per(5, 0);
        int any = 0;
        for (int t = 0; t < trials; ++t) {
            const auto s = static_cast<std::uint64_t>(t);
            const Eigen::MatrixXd x = standard_normal(200, 5, 10000 + s);
            const Eigen::VectorXd y = standard_normal(200, 1, 20000 + s).col(0);
            const auto keep = prune_parents(y, x, {6, alpha, SelectionRule::InverseAlpha});
            for (Index i : keep) ++per[static_cast<std::size_t>(i)];
            any += !keep.empty();
        }
        for (int c : per)
            EXPECT_LE(static_cast<double>(c) / trials, alpha + 3 * std::sqrt(alpha / trials)) << "alpha " << alpha;
        EXPECT_LE(static_cast<double>(any) / trials, alpha * 5 + 0.02);
    }
}

TEST(PruneParents, FTestNullRateNearAlpha) {
    const int trials = 1000;
    int selected = 0;
    for (int t = 0; t < trials; ++t) {
        const auto s = static_cast<std::uint64_t>(t);
        const Eigen::MatrixXd x = standard_normal(200, 1, 30000 + s);
        const Eigen::VectorXd y = standard_normal(200, 1, 40000 + s).col(0);
        selected += !prune_parents(y, x, {6, 0.05, SelectionRule::FTest}).empty();
    }
    EXPECT_NEAR(static_cast<double>(selected) / trials, 0.05, 3 * std::sqrt(0.05 * 0.95 / trials));
}

TEST(SelectionThreshold, Rules) {
    EXPECT_DOUBLE_EQ(selection_threshold({6, 0.05, SelectionRule::InverseAlpha}, 100), 20.0);
    EXPECT_DOUBLE_EQ(selection_threshold({6, 0.05, SelectionRule::PaperAlpha}, 100), 0.05);
    // F(1, 1e6) upper 5% point approaches chi2_1 = 3.8415
    EXPECT_NEAR(selection_threshold({1, 0.05, SelectionRule::FTest}, 1000000), 3.8415, 1e-3);
    EXPECT_THROW(PruneConfig({0, 0.05, SelectionRule::FTest}).validate(), ArgumentError);
    EXPECT_THROW(PruneConfig({6, 1.0, SelectionRule::FTest}).validate(), ArgumentError);
}

namespace {

// 0 -> 1 -> 2 (sin), plus independent noise nodes 3, 4, 5.
struct SpuriousSetup {
    Eigen::MatrixXd x;
    Dag truth;
    DenseResult dense;
};

SpuriousSetup spurious_setup(std::uint64_t seed) {
    SpuriousSetup s;
    s.truth = dag_from(6, {{0, 1}, {1, 2}});
    s.x = simulate_static(sin_sem(s.truth, 1.0, seed), 1000);
    s.dense.dense_w = s.truth.adjacency();
    s.dense.dense_w(3, 0) = s.dense.dense_w(4, 1) = s.dense.dense_w(5, 2) = 1;
    s.dense.order.order = {3, 4, 5, 0, 1, 2};
    return s;
}

}  // namespace

TEST(PruneDag, EmptyDenseUnchanged) {
    DenseResult dense;
    dense.dense_w = BinaryMatrix::Zero(3, 3);
    const auto out = prune_dag(dense, standard_normal(50, 3, 1));
    EXPECT_EQ(out.w.edge_count(), 0);
    EXPECT_FALSE(out.p.has_value());
}

TEST(PruneDag, RemovesSpuriousKeepsTrue) {
    int good = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = spurious_setup(seed);
        good += prune_dag(s.dense, s.x, {6, 0.001, SelectionRule::FTest}).w == s.truth;
    }
    EXPECT_GE(good, 9);
}

TEST(PruneDag, MissingEdgeStaysMissing) {
    auto s = spurious_setup(3);
    s.dense.dense_w(0, 1) = 0;
    const auto out = prune_dag(s.dense, s.x);
    EXPECT_FALSE(out.w.has_edge(0, 1));
}

TEST(PruneDag, ContractiveOnRandomInstances) {
    for (std::uint64_t t = 0; t < 300; ++t) {
        Rng rng(t);
        std::uniform_int_distribution<int> dd(2, 6);
        const Index d = dd(rng);
        const Dag g = generate_er_dag(d, static_cast<double>(d), rng);
        DenseResult dense;
        dense.dense_w = g.adjacency();
        std::optional<LaggedGraphs> lag;
        const bool temporal = t % 2 == 1;
        if (temporal) dense.dense_p = generate_er_lagged(d, 1, static_cast<double>(d), rng);
        const Index n = 10 + static_cast<Index>(t % 5) * 20;
        const Eigen::MatrixXd x = standard_normal(n, d * (temporal ? 2 : 1), 5000 + t);
        const auto out = prune_dag(dense, x, {3, 0.05, SelectionRule::FTest});
        EXPECT_TRUE(((out.w.adjacency().array() - dense.dense_w.array()) <= 0).all());
        if (temporal)
            EXPECT_TRUE(((out.p->matrix(1).array() - dense.dense_p->matrix(1).array()) <= 0).all());
    }
}

TEST(PruneDag, LaggedCandidates) {
    SemSpec sem = sin_sem(Dag(2), 0.5, 4);
    sem.lagged = LaggedGraphs(2, 1);
    sem.lagged->matrix(1)(1, 0) = 1;  // node 0 at t-1 drives node 1
    const auto data = simulate_temporal(sem, {Network(800)}, 800, 3, 2);
    const Eigen::MatrixXd st = stacked_input(data, 2, 1);
    DenseResult dense;
    dense.dense_w = BinaryMatrix::Zero(2, 2);
    dense.dense_p = LaggedGraphs(2, 1);
    dense.dense_p->matrix(1).setOnes();
    const auto out = prune_dag(dense, st);
    EXPECT_EQ(out.p->matrix(1), sem.lagged->matrix(1));
    EXPECT_THROW(prune_dag(dense, st.leftCols(3)), ArgumentError);
}
