#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pick/sem.hpp"
#include "pick/stein.hpp"

namespace pick {

namespace detail {

struct OracleTerms {
    Eigen::MatrixXd score;
    Eigen::MatrixXd jac;
};

inline void require_closed_form(const SemSpec& sem) {
    if (sem.link.kind != LinkKind::SinSum)
        throw UnsupportedLinkError("oracle score: link '" + sem.link.name() + "' has no closed form");
}

// Exact conditional score and Jacobian diagonal of the SEM restricted to the
// active current nodes. Output columns: active nodes (given order) then every
// lag column. The marginal density of the lag block is not modelled.
inline OracleTerms oracle_terms(const Eigen::MatrixXd& xbar, const SemSpec& sem, std::span<const Index> active) {
    require_closed_form(sem);
    sem.validate();
    const Index d = sem.nodes();
    const Index total = sem.stacked_columns();
    require(xbar.cols() == total, "oracle score: expected " + std::to_string(total) + " stacked columns");
    for (Index a : active) require(a >= 0 && a < d, "oracle score: active node out of range");

    const Index n = xbar.rows();
    std::vector<bool> is_active(static_cast<std::size_t>(d), false);
    for (Index a : active) is_active[static_cast<std::size_t>(a)] = true;

    // Residuals r_j / sigma_j^2 for active nodes.
    Eigen::MatrixXd scaled_resid = Eigen::MatrixXd::Zero(n, d);
    for (Index j = 0; j < d; ++j) {
        if (!is_active[static_cast<std::size_t>(j)]) continue;
        Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
        for (Index c : sem.parent_columns(j)) f.array() += xbar.col(c).array().sin();
        const double s = sem.noise_sd[static_cast<std::size_t>(j)];
        scaled_resid.col(j) = (xbar.col(j) - f) / (s * s);
    }

    auto child_terms = [&](Index c, Eigen::Ref<Eigen::VectorXd> score, Eigen::Ref<Eigen::VectorXd> jac) {
        const Eigen::ArrayXd cos_c = xbar.col(c).array().cos();
        const Eigen::ArrayXd sin_c = xbar.col(c).array().sin();
        for (Index j : sem.consumers(c)) {
            if (!is_active[static_cast<std::size_t>(j)]) continue;
            const double s = sem.noise_sd[static_cast<std::size_t>(j)];
            score.array() += scaled_resid.col(j).array() * cos_c;
            jac.array() += -cos_c.square() / (s * s) - scaled_resid.col(j).array() * sin_c;
        }
    };

    const auto width = static_cast<Index>(active.size()) + (total - d);
    OracleTerms out{Eigen::MatrixXd::Zero(n, width), Eigen::MatrixXd::Zero(n, width)};
    Index col = 0;
    for (Index i : active) {
        const double s = sem.noise_sd[static_cast<std::size_t>(i)];
        out.score.col(col) = -scaled_resid.col(i);
        out.jac.col(col).setConstant(-1.0 / (s * s));
        child_terms(i, out.score.col(col), out.jac.col(col));
        ++col;
    }
    for (Index c = d; c < total; ++c, ++col) child_terms(c, out.score.col(col), out.jac.col(col));
    return out;
}

inline std::vector<Index> all_nodes(Index d) {
    std::vector<Index> v(static_cast<std::size_t>(d));
    std::iota(v.begin(), v.end(), Index{0});
    return v;
}

}  // namespace detail

/// Exact score of a sin-link SEM at each sample.
///
/// For current node i:   -(x_i - f_i)/s_i^2 + sum_{j in ch(i)} (x_j - f_j)/s_j^2 * df_j/dx_i
/// For lag column c:      sum_{j fed by c} (x_j - f_j)/s_j^2 * df_j/dx_c
/// The lag block's own marginal score is omitted; it does not change when a
/// current leaf is removed. Only nodes in `active` contribute factors, which
/// is the marginal SEM after the other current nodes (removed leaves) are
/// integrated out.
inline ScoreMatrix oracle_score(const Eigen::MatrixXd& xbar, const SemSpec& sem, std::span<const Index> active) {
    return {detail::oracle_terms(xbar, sem, active).score};
}

inline ScoreMatrix oracle_score(const Eigen::MatrixXd& xbar, const SemSpec& sem) {
    const auto active = detail::all_nodes(sem.nodes());
    return oracle_score(xbar, sem, active);
}

/// Analytic derivative of oracle_score along each column's own coordinate.
inline JacDiagMatrix oracle_jacobian_diag(const Eigen::MatrixXd& xbar, const SemSpec& sem,
                                          std::span<const Index> active) {
    return {detail::oracle_terms(xbar, sem, active).jac};
}

inline JacDiagMatrix oracle_jacobian_diag(const Eigen::MatrixXd& xbar, const SemSpec& sem) {
    const auto active = detail::all_nodes(sem.nodes());
    return oracle_jacobian_diag(xbar, sem, active);
}

}  // namespace pick
