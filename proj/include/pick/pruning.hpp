#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include "pick/dense_result.hpp"
#include "pick/errors.hpp"
#include "pick/graphs.hpp"

namespace pick {

/// How the group statistic T_i is turned into a keep/drop decision.
enum class SelectionRule {
    PaperAlpha,    // keep iff T_i > alpha
    InverseAlpha,  // keep iff T_i > 1 / alpha (Markov bound on the Wald statistic)
    FTest,         // keep iff P(F(n_basis, n - params) > T_i) < alpha
};

struct PruneConfig {
    Index n_basis = 6;
    double alpha = 0.001;
    SelectionRule rule = SelectionRule::FTest;

    void validate() const {
        detail::require(n_basis >= 1, "PruneConfig: n_basis must be >= 1");
        detail::require(alpha > 0.0 && alpha < 1.0, "PruneConfig: alpha must lie in (0, 1)");
    }
};

struct AdditiveFit {
    double intercept = 0.0;
    std::vector<Eigen::VectorXd> coefs;  // one block of n_basis per predictor
    std::vector<Eigen::MatrixXd> cov;    // matching covariance blocks
    double resid_var = 0.0;
    Index dof = 0;                       // n - #params

    /// beta_i' Cov_i^-1 beta_i / n_basis; with one basis function this is
    /// beta_i^2 / Var(beta_i).
    [[nodiscard]] double statistic(Index i) const {
        const auto& b = coefs.at(static_cast<std::size_t>(i));
        const auto& c = cov.at(static_cast<std::size_t>(i));
        if (resid_var <= 0.0) return std::numeric_limits<double>::infinity();
        Eigen::LDLT<Eigen::MatrixXd> ldlt(c);
        return b.dot(ldlt.solve(b)) / static_cast<double>(b.size());
    }
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

// Clamped knot vector for n_basis + 1 functions of degree min(3, n_basis),
// interior knots at equally spaced quantiles of x.
inline std::pair<std::vector<double>, int> spline_knots(const Eigen::VectorXd& x, Index n_basis) {
    const int degree = static_cast<int>(std::min<Index>(3, n_basis));
    const Index n_interior = n_basis - degree;
    std::vector<double> sorted(x.data(), x.data() + x.size());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();

    std::vector<double> interior;
    for (Index k = 1; k <= n_interior; ++k)
        interior.push_back(quantile_sorted(sorted, static_cast<double>(k) / static_cast<double>(n_interior + 1)));
    bool ok = true;
    double prev = lo;
    for (double t : interior) {
        if (!(t > prev) || !(t < hi)) ok = false;
        prev = t;
    }
    if (!ok) {  // heavy ties: fall back to equal spacing
        for (Index k = 1; k <= n_interior; ++k)
            interior[static_cast<std::size_t>(k - 1)] =
                lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n_interior + 1);
    }

    std::vector<double> knots(static_cast<std::size_t>(degree + 1), lo);
    knots.insert(knots.end(), interior.begin(), interior.end());
    knots.insert(knots.end(), static_cast<std::size_t>(degree + 1), hi);
    return {std::move(knots), degree};
}

// Cox-de Boor evaluation of all basis functions at one point.
inline void bspline_row(double x, const std::vector<double>& knots, int degree, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
    const auto n_fun = static_cast<Index>(knots.size()) - degree - 1;
    const auto last = static_cast<std::size_t>(n_fun);  // knots[last] == hi
    std::size_t span = static_cast<std::size_t>(degree);
    if (x >= knots[last]) {
        span = last - 1;
    } else {
        while (span + 1 < last && x >= knots[span + 1]) ++span;
    }
    std::vector<double> left(static_cast<std::size_t>(degree + 1)), right(static_cast<std::size_t>(degree + 1));
    std::vector<double> n(static_cast<std::size_t>(degree + 1), 0.0);
    n[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
        left[static_cast<std::size_t>(j)] = x - knots[span + 1 - static_cast<std::size_t>(j)];
        right[static_cast<std::size_t>(j)] = knots[span + static_cast<std::size_t>(j)] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
            const double tmp = denom != 0.0 ? n[static_cast<std::size_t>(r)] / denom : 0.0;
            n[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * tmp;
            saved = left[static_cast<std::size_t>(j - r)] * tmp;
        }
        n[static_cast<std::size_t>(j)] = saved;
    }
    out.setZero();
    for (int r = 0; r <= degree; ++r) out(static_cast<Index>(span) - degree + r) = n[static_cast<std::size_t>(r)];
}

}  // namespace detail

/// Uncentered B-spline basis with n_basis + 1 functions; rows sum to one.
inline Eigen::MatrixXd bspline_raw_basis(const Eigen::VectorXd& x, Index n_basis) {
    detail::require(n_basis >= 1, "spline_basis: n_basis must be >= 1");
    detail::require(x.size() >= n_basis + 2, "spline_basis: need at least n_basis + 2 samples");
    if (x.maxCoeff() == x.minCoeff()) throw DegenerateDataError("spline_basis: constant predictor");
    const auto [knots, degree] = detail::spline_knots(x, n_basis);
    Eigen::MatrixXd out(x.size(), n_basis + 1);
    for (Index r = 0; r < x.size(); ++r) detail::bspline_row(x(r), knots, degree, out.row(r));
    return out;
}

/// Cubic (degree min(3, n_basis)) B-spline features with quantile knots. The
/// first function is dropped, since the full set sums to the intercept, and
/// the remaining n_basis columns are centered.
inline Eigen::MatrixXd spline_basis(const Eigen::VectorXd& x, Index n_basis) {
    Eigen::MatrixXd raw = bspline_raw_basis(x, n_basis);
    Eigen::MatrixXd out = raw.rightCols(n_basis);
    out.rowwise() -= out.colwise().mean();
    return out;
}

/// Least squares additive fit y ~ 1 + sum_i spline(x_i), with ridge jitter
/// 1e-8 on the normal equations.
inline AdditiveFit fit_additive(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const PruneConfig& cfg = {}) {
    cfg.validate();
    detail::require(y.size() == x.rows(), "fit_additive: y and X row counts differ");
    const Index n = x.rows();
    const Index k = x.cols();
    const Index params = 1 + k * cfg.n_basis;
    detail::require(n > params, "fit_additive: need more samples than parameters");

    Eigen::MatrixXd design(n, params);
    design.col(0).setOnes();
    for (Index i = 0; i < k; ++i)
        design.middleCols(1 + i * cfg.n_basis, cfg.n_basis) = spline_basis(x.col(i), cfg.n_basis);

    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += 1e-8;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success) throw NumericalError("fit_additive: normal equations are singular");
    const Eigen::VectorXd beta = ldlt.solve(design.transpose() * y);
    const Eigen::MatrixXd gram_inv = ldlt.solve(Eigen::MatrixXd::Identity(params, params));

    AdditiveFit fit;
    fit.dof = n - params;
    fit.resid_var = (y - design * beta).squaredNorm() / static_cast<double>(fit.dof);
    fit.intercept = beta(0);
    for (Index i = 0; i < k; ++i) {
        const Index off = 1 + i * cfg.n_basis;
        fit.coefs.emplace_back(beta.segment(off, cfg.n_basis));
        Eigen::MatrixXd block = fit.resid_var * gram_inv.block(off, off, cfg.n_basis, cfg.n_basis);
        fit.cov.emplace_back(0.5 * (block + block.transpose()));
    }
    return fit;
}

/// Decision threshold on T_i implied by the rule (the F rule compares p-values
/// instead and reports the matching critical value).
inline double selection_threshold(const PruneConfig& cfg, Index dof) {
    switch (cfg.rule) {
        case SelectionRule::PaperAlpha:
            return cfg.alpha;
        case SelectionRule::InverseAlpha:
            return 1.0 / cfg.alpha;
        case SelectionRule::FTest: {
            boost::math::fisher_f dist(static_cast<double>(cfg.n_basis), static_cast<double>(dof));
            return boost::math::quantile(boost::math::complement(dist, cfg.alpha));
        }
    }
    return 1.0 / cfg.alpha;
}

/// Positions (columns of `candidates`) whose group statistic passes the rule.
inline std::vector<Index> prune_parents(const Eigen::VectorXd& y, const Eigen::MatrixXd& candidates,
                                        const PruneConfig& cfg = {}) {
    if (candidates.cols() == 0) return {};
    const AdditiveFit fit = fit_additive(y, candidates, cfg);
    const double threshold = selection_threshold(cfg, fit.dof);
    std::vector<Index> keep;
    for (Index i = 0; i < candidates.cols(); ++i)
        if (fit.statistic(i) > threshold) keep.push_back(i);
    return keep;
}

struct PrunedGraphs {
    Dag w;
    std::optional<LaggedGraphs> p;
};

/// Regress every node with candidate parents on them (stacked columns:
/// current block first, then lag blocks) and keep only selected edges.
inline PrunedGraphs prune_dag(const DenseResult& dense, const Eigen::MatrixXd& stacked, const PruneConfig& cfg = {}) {
    const Index d = dense.dense_w.rows();
    const Index p = dense.dense_p ? dense.dense_p->lags() : 0;
    detail::require(stacked.cols() == d * (p + 1), "prune_dag: stacked data width does not match candidates");

    BinaryMatrix w = BinaryMatrix::Zero(d, d);
    std::optional<LaggedGraphs> lagged;
    if (dense.dense_p) lagged = LaggedGraphs(d, p);

    for (Index node = 0; node < d; ++node) {
        std::vector<Index> cols;
        for (Index src = 0; src < d; ++src)
            if (dense.dense_w(src, node) != 0) cols.push_back(src);
        for (Index k = 1; k <= p; ++k)
            for (Index src = 0; src < d; ++src)
                if (dense.dense_p->matrix(k)(node, src) != 0) cols.push_back(k * d + src);
        if (cols.empty()) continue;

        // Too few samples for an additive fit: leave the candidates unpruned.
        const auto params = 1 + static_cast<Index>(cols.size()) * cfg.n_basis;
        if (stacked.rows() <= params || stacked.rows() < cfg.n_basis + 2) {
            for (Index col : cols) {
                if (col < d) w(col, node) = 1;
                else lagged->matrix(col / d)(node, col % d) = 1;
            }
            continue;
        }

        Eigen::MatrixXd cand(stacked.rows(), static_cast<Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) cand.col(static_cast<Index>(c)) = stacked.col(cols[c]);
        for (Index pos : prune_parents(stacked.col(node), cand, cfg)) {
            const Index col = cols[static_cast<std::size_t>(pos)];
            if (col < d) w(col, node) = 1;
            else lagged->matrix(col / d)(node, col % d) = 1;
        }
    }
    return {Dag(std::move(w)), std::move(lagged)};
}

}  // namespace pick
