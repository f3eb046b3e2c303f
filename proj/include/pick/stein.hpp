#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pick/errors.hpp"

namespace pick {

using Index = Eigen::Index;

/// RBF kernel settings shared by the score and Jacobian estimators.
struct KernelConfig {
    std::optional<double> fixed_bandwidth;  // empty: median heuristic
    double eta = 0.01;

    static KernelConfig median_heuristic(double eta = 0.01) { return {std::nullopt, eta}; }
    static KernelConfig fixed(double bandwidth, double eta = 0.01) { return {bandwidth, eta}; }

    void validate() const {
        detail::require(eta > 0.0 && std::isfinite(eta), "KernelConfig: eta must be > 0");
        if (fixed_bandwidth)
            detail::require(*fixed_bandwidth > 0.0 && std::isfinite(*fixed_bandwidth),
                            "KernelConfig: fixed bandwidth must be > 0");
    }
};

/// Column a holds the estimated d/dx_a log p at every sample.
struct ScoreMatrix {
    Eigen::MatrixXd values;
};

/// Column a holds the estimated d^2/dx_a^2 log p at every sample.
struct JacDiagMatrix {
    Eigen::MatrixXd values;
};

/// Population (divide-by-n) variance of each column.
inline Eigen::VectorXd column_variances(const Eigen::MatrixXd& m) {
    Eigen::VectorXd out(m.cols());
    const double n = static_cast<double>(m.rows());
    for (Index c = 0; c < m.cols(); ++c) {
        const double mean = m.col(c).sum() / n;
        out(c) = (m.col(c).array() - mean).square().sum() / n;
    }
    return out;
}

/// Indices of columns whose entries are all equal.
inline std::vector<Index> constant_columns(const Eigen::MatrixXd& x) {
    std::vector<Index> out;
    for (Index c = 0; c < x.cols(); ++c)
        if (x.rows() > 0 && x.col(c).maxCoeff() == x.col(c).minCoeff()) out.push_back(c);
    return out;
}

inline void check_no_constant_columns(const Eigen::MatrixXd& x, const std::string& who) {
    const auto bad = constant_columns(x);
    if (bad.empty()) return;
    std::string msg = who + ": constant column(s)";
    for (Index c : bad) msg += " " + std::to_string(c);
    throw DegenerateDataError(msg);
}

/// Median of the strictly positive pairwise Euclidean distances between rows.
inline double median_bandwidth(const Eigen::MatrixXd& x) {
    detail::require(x.rows() >= 2, "median_bandwidth: need at least two samples");
    const Index n = x.rows();
    const Eigen::MatrixXd xt = x.transpose();
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            const double dist = (xt.col(i) - xt.col(j)).norm();
            if (dist > 0.0) dists.push_back(dist);
        }
    }
    if (dists.empty()) throw DegenerateDataError("median_bandwidth: all samples are identical");
    const std::size_t mid = dists.size() / 2;
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
    const double upper = dists[mid];
    if (dists.size() % 2 == 1) return upper;
    const double lower = *std::max_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

/// Kernel ridge Stein estimator. Builds the RBF Gram matrix once and reuses its
/// Cholesky factor for both the score and the Jacobian diagonal.
///
/// With K_ij = exp(-|x_i - x_j|^2 / (2 s^2)) and the first-argument kernel
/// derivatives
///   B_ia = sum_j K_ij (x_ja - x_ia) / s^2
///   C_ia = sum_j K_ij ((x_ja - x_ia)^2 / s^4 - 1 / s^2)
/// the estimates are
///   score    G = (K + eta I)^-1 B
///   jacobian J = -(G o G) + (K + eta I)^-1 C.
/// Sums over j run serially in ascending j, so results do not depend on threading.
class SteinEstimator {
public:
    SteinEstimator(const Eigen::MatrixXd& x, const KernelConfig& cfg) {
        cfg.validate();
        detail::require(x.rows() >= 2, "SteinEstimator: need at least two samples");
        detail::require(x.cols() >= 1, "SteinEstimator: need at least one column");
        detail::require(x.allFinite(), "SteinEstimator: non-finite input");
        check_no_constant_columns(x, "SteinEstimator");

        const Index n = x.rows();
        const Index dim = x.cols();
        bandwidth_ = cfg.fixed_bandwidth ? *cfg.fixed_bandwidth : median_bandwidth(x);
        const double inv_s2 = 1.0 / (bandwidth_ * bandwidth_);
        const double inv_s4 = inv_s2 * inv_s2;

        const Eigen::MatrixXd xt = x.transpose();  // samples contiguous
        Eigen::MatrixXd gram(n, n);
        for (Index j = 0; j < n; ++j) {
            gram(j, j) = 1.0;
            for (Index i = j + 1; i < n; ++i) {
                const double sq = (xt.col(i) - xt.col(j)).squaredNorm();
                const double k = std::exp(-0.5 * sq * inv_s2);
                gram(i, j) = k;
                gram(j, i) = k;
            }
        }

        // rhs = [B | C]
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2 * dim);
        Eigen::VectorXd acc_b(dim), acc_c(dim);
        for (Index i = 0; i < n; ++i) {
            acc_b.setZero();
            acc_c.setZero();
            for (Index j = 0; j < n; ++j) {
                const double k = gram(j, i);
                for (Index a = 0; a < dim; ++a) {
                    const double diff = xt(a, j) - xt(a, i);
                    acc_b(a) += k * diff * inv_s2;
                    acc_c(a) += k * (diff * diff * inv_s4 - inv_s2);
                }
            }
            rhs.row(i).head(dim) = acc_b.transpose();
            rhs.row(i).tail(dim) = acc_c.transpose();
        }

        gram.diagonal().array() += cfg.eta;
        Eigen::LLT<Eigen::MatrixXd> llt(gram);
        if (llt.info() != Eigen::Success) throw NumericalError("SteinEstimator: Cholesky factorization failed");
        Eigen::MatrixXd sol = llt.solve(rhs);
        if (!sol.allFinite()) throw NumericalError("SteinEstimator: non-finite solve result");

        score_ = sol.leftCols(dim);
        second_ = sol.rightCols(dim);
    }

    [[nodiscard]] double bandwidth() const { return bandwidth_; }
    [[nodiscard]] ScoreMatrix score() const { return {score_}; }

    /// (K + eta I)^-1 C, the second-order Stein term.
    [[nodiscard]] const Eigen::MatrixXd& second_order() const { return second_; }

    [[nodiscard]] JacDiagMatrix jacobian_diag() const {
        return {(-score_.array().square() + second_.array()).matrix()};
    }

private:
    double bandwidth_ = 0.0;
    Eigen::MatrixXd score_;
    Eigen::MatrixXd second_;
};

inline ScoreMatrix estimate_score(const Eigen::MatrixXd& x, const KernelConfig& cfg = {}) {
    return SteinEstimator(x, cfg).score();
}

/// Recomputes the kernel solve; prefer SteinEstimator when both outputs are needed.
inline JacDiagMatrix estimate_jacobian_diag(const Eigen::MatrixXd& x, const ScoreMatrix& score,
                                            const KernelConfig& cfg = {}) {
    detail::require(score.values.rows() == x.rows() && score.values.cols() == x.cols(),
                    "estimate_jacobian_diag: score shape does not match data");
    SteinEstimator est(x, cfg);
    return {(-score.values.array().square() + est.second_order().array()).matrix()};
}

}  // namespace pick
