#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pick/graphs.hpp"
#include "pick/sem.hpp"

namespace pick::testing {

// Dag from (from, to) pairs, 0-indexed.
inline Dag dag_from(Index d, const std::vector<std::pair<Index, Index>>& edges) {
    BinaryMatrix m = BinaryMatrix::Zero(d, d);
    for (auto [i, j] : edges) m(i, j) = 1;
    return Dag(m);
}

// Sin-link SEM on `dag` with a common noise scale.
inline SemSpec sin_sem(const Dag& dag, double sigma, std::uint64_t seed = 0) {
    SemSpec sem;
    sem.dag = dag;
    sem.link = LinkSpec::parse("sin");
    sem.noise_sd.assign(static_cast<std::size_t>(dag.size()), sigma);
    sem.seed = seed;
    return sem;
}

// 0 -> 1 -> ... -> d-1
inline Dag chain(Index d) {
    std::vector<std::pair<Index, Index>> e;
    for (Index i = 0; i + 1 < d; ++i) e.emplace_back(i, i + 1);
    return dag_from(d, e);
}

// Every acyclic adjacency on d nodes (d <= 4 keeps this cheap).
inline std::vector<BinaryMatrix> all_dags(Index d) {
    std::vector<std::pair<Index, Index>> slots;
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
            if (i != j) slots.emplace_back(i, j);
    std::vector<BinaryMatrix> out;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << slots.size()); ++mask) {
        BinaryMatrix m = BinaryMatrix::Zero(d, d);
        for (std::size_t s = 0; s < slots.size(); ++s)
            if (mask >> s & 1) m(slots[s].first, slots[s].second) = 1;
        if (Dag::is_acyclic(m)) out.push_back(m);
    }
    return out;
}

inline Eigen::MatrixXd standard_normal(Index n, Index d, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd x(n, d);
    for (Index c = 0; c < d; ++c)
        for (Index r = 0; r < n; ++r) x(r, c) = z(rng);
    return x;
}

inline double sample_variance(const Eigen::VectorXd& v) {
    const double m = v.mean();
    return (v.array() - m).square().sum() / static_cast<double>(v.size());
}

inline double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd x = a.array() - a.mean();
    const Eigen::ArrayXd y = b.array() - b.mean();
    return (x * y).sum() / std::sqrt(x.square().sum() * y.square().sum());
}

}  // namespace pick::testing
