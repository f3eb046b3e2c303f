#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pick/errors.hpp"

namespace pick {

using Index = Eigen::Index;
using BinaryMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
using Rng = std::mt19937_64;

/// Deterministic child generator for one pipeline stage, so that stages
/// (graph, links, noise, ...) never share a random stream.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stage) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stage), static_cast<std::uint32_t>(stage >> 32)};
    return Rng(seq);
}

namespace detail {

inline bool is_binary(const BinaryMatrix& m) {
    return (m.array() == 0 || m.array() == 1).all();
}

// Kahn's algorithm, smallest ready index first. Empty result means a cycle.
inline std::vector<Index> kahn_order(const BinaryMatrix& adj) {
    const Index d = adj.rows();
    std::vector<Index> indeg(static_cast<std::size_t>(d), 0);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
            if (adj(i, j) != 0) ++indeg[static_cast<std::size_t>(j)];
    std::vector<Index> ready;
    for (Index j = 0; j < d; ++j)
        if (indeg[static_cast<std::size_t>(j)] == 0) ready.push_back(j);
    std::vector<Index> order;
    order.reserve(static_cast<std::size_t>(d));
    while (!ready.empty()) {
        auto it = std::min_element(ready.begin(), ready.end());
        const Index u = *it;
        ready.erase(it);
        order.push_back(u);
        for (Index v = 0; v < d; ++v) {
            if (adj(u, v) != 0 && --indeg[static_cast<std::size_t>(v)] == 0) ready.push_back(v);
        }
    }
    if (static_cast<Index>(order.size()) != d) return {};
    return order;
}

}  // namespace detail

/// Intra-snapshot causal graph. adj(i, j) == 1 means i -> j.
class Dag {
public:
    Dag() = default;

    explicit Dag(Index d) : adj_(BinaryMatrix::Zero(d, d)) {
        detail::require(d >= 0, "Dag: negative node count");
    }

    explicit Dag(BinaryMatrix adj) : adj_(std::move(adj)) {
        detail::require(adj_.rows() == adj_.cols(), "Dag: adjacency must be square");
        detail::require(detail::is_binary(adj_), "Dag: adjacency entries must be 0/1");
        detail::require(adj_.diagonal().isZero(), "Dag: self loops are not allowed");
        detail::require(is_acyclic(adj_), "Dag: adjacency contains a directed cycle");
    }

    static bool is_acyclic(const BinaryMatrix& adj) {
        return adj.rows() == 0 || !detail::kahn_order(adj).empty();
    }

    [[nodiscard]] Index size() const { return adj_.rows(); }
    [[nodiscard]] const BinaryMatrix& adjacency() const { return adj_; }
    [[nodiscard]] bool has_edge(Index from, Index to) const { return adj_(from, to) != 0; }
    [[nodiscard]] Index edge_count() const { return adj_.sum(); }

    [[nodiscard]] std::vector<Index> parents(Index node) const {
        std::vector<Index> out;
        for (Index i = 0; i < size(); ++i)
            if (adj_(i, node) != 0) out.push_back(i);
        return out;
    }

    [[nodiscard]] std::vector<Index> children(Index node) const {
        std::vector<Index> out;
        for (Index j = 0; j < size(); ++j)
            if (adj_(node, j) != 0) out.push_back(j);
        return out;
    }

    /// Sources first; ties broken by smallest index.
    [[nodiscard]] std::vector<Index> topological_order() const { return detail::kahn_order(adj_); }

    friend bool operator==(const Dag& a, const Dag& b) { return a.adj_ == b.adj_; }

private:
    BinaryMatrix adj_;
};

/// Lag-k adjacencies. matrix(k)(i, j) == 1 means node j at t-k drives node i at t.
class LaggedGraphs {
public:
    LaggedGraphs() = default;

    LaggedGraphs(Index d, Index p) {
        detail::require(d >= 0 && p >= 1, "LaggedGraphs: need d >= 0 and p >= 1");
        mats_.assign(static_cast<std::size_t>(p), BinaryMatrix::Zero(d, d));
    }

    explicit LaggedGraphs(std::vector<BinaryMatrix> mats) : mats_(std::move(mats)) {
        detail::require(!mats_.empty(), "LaggedGraphs: need at least one lag");
        const Index d = mats_.front().rows();
        for (const auto& m : mats_) {
            detail::require(m.rows() == d && m.cols() == d, "LaggedGraphs: all lags must be d x d");
            detail::require(detail::is_binary(m), "LaggedGraphs: entries must be 0/1");
        }
    }

    [[nodiscard]] Index lags() const { return static_cast<Index>(mats_.size()); }
    [[nodiscard]] Index nodes() const { return mats_.empty() ? 0 : mats_.front().rows(); }

    /// Lag k is 1-based.
    [[nodiscard]] const BinaryMatrix& matrix(Index k) const { return mats_.at(static_cast<std::size_t>(k - 1)); }
    BinaryMatrix& matrix(Index k) { return mats_.at(static_cast<std::size_t>(k - 1)); }
    [[nodiscard]] const std::vector<BinaryMatrix>& matrices() const { return mats_; }

    [[nodiscard]] Index edge_count() const {
        Index total = 0;
        for (const auto& m : mats_) total += m.sum();
        return total;
    }

    friend bool operator==(const LaggedGraphs& a, const LaggedGraphs& b) { return a.mats_ == b.mats_; }

private:
    std::vector<BinaryMatrix> mats_;
};

/// Undirected unit-level interference network with sorted neighbor lists.
class Network {
public:
    Network() = default;
    explicit Network(Index n) : nbrs_(static_cast<std::size_t>(n)) {
        detail::require(n >= 0, "Network: negative unit count");
    }

    static Network from_edges(Index n, const std::vector<std::pair<Index, Index>>& edges) {
        Network net(n);
        for (auto [i, j] : edges) net.add_edge(i, j);
        return net;
    }

    void add_edge(Index i, Index j) {
        detail::require(i >= 0 && j >= 0 && i < size() && j < size(), "Network: edge endpoint out of range");
        detail::require(i != j, "Network: self loops are not allowed");
        auto insert = [](std::vector<Index>& v, Index x) {
            auto it = std::lower_bound(v.begin(), v.end(), x);
            if (it == v.end() || *it != x) v.insert(it, x);
        };
        insert(nbrs_[static_cast<std::size_t>(i)], j);
        insert(nbrs_[static_cast<std::size_t>(j)], i);
    }

    [[nodiscard]] Index size() const { return static_cast<Index>(nbrs_.size()); }
    [[nodiscard]] const std::vector<Index>& neighbors(Index i) const { return nbrs_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] Index degree(Index i) const { return static_cast<Index>(neighbors(i).size()); }

    [[nodiscard]] bool has_edge(Index i, Index j) const {
        const auto& v = neighbors(i);
        return std::binary_search(v.begin(), v.end(), j);
    }

    [[nodiscard]] Index edge_count() const {
        Index total = 0;
        for (const auto& v : nbrs_) total += static_cast<Index>(v.size());
        return total / 2;
    }

    /// Pairs (i, j) with i < j, lexicographic.
    [[nodiscard]] std::vector<std::pair<Index, Index>> edges() const {
        std::vector<std::pair<Index, Index>> out;
        for (Index i = 0; i < size(); ++i)
            for (Index j : neighbors(i))
                if (i < j) out.emplace_back(i, j);
        return out;
    }

    [[nodiscard]] BinaryMatrix dense() const {
        BinaryMatrix m = BinaryMatrix::Zero(size(), size());
        for (Index i = 0; i < size(); ++i)
            for (Index j : neighbors(i)) m(i, j) = 1;
        return m;
    }

    friend bool operator==(const Network& a, const Network& b) { return a.nbrs_ == b.nbrs_; }

private:
    std::vector<std::vector<Index>> nbrs_;
};

/// Node order with causes before effects: the leaf removed first sits last.
struct TopoOrder {
    std::vector<Index> order;

    [[nodiscard]] bool is_permutation() const {
        std::vector<Index> sorted = order;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i)
            if (sorted[i] != static_cast<Index>(i)) return false;
        return true;
    }

    [[nodiscard]] bool consistent_with(const BinaryMatrix& adj) const {
        if (!is_permutation() || static_cast<Index>(order.size()) != adj.rows()) return false;
        std::vector<Index> pos(order.size());
        for (std::size_t k = 0; k < order.size(); ++k) pos[static_cast<std::size_t>(order[k])] = static_cast<Index>(k);
        for (Index i = 0; i < adj.rows(); ++i)
            for (Index j = 0; j < adj.cols(); ++j)
                if (adj(i, j) != 0 && pos[static_cast<std::size_t>(i)] >= pos[static_cast<std::size_t>(j)]) return false;
        return true;
    }

    [[nodiscard]] bool consistent_with(const Dag& dag) const { return consistent_with(dag.adjacency()); }
};

struct MetricsReport {
    Index shd = 0;
    double fdr = 0.0;
    double tpr = 1.0;
    Index n_pred = 0;
    Index n_true = 0;
};

// ---------------------------------------------------------------------------
// Random generators

/// Erdos-Renyi DAG: uniform latent order, each order-respecting pair kept with
/// probability min(1, expected_edges / (d(d-1)/2)).
inline Dag generate_er_dag(Index d, double expected_edges, Rng& rng) {
    detail::require(d >= 1, "generate_er_dag: d must be >= 1");
    detail::require(expected_edges >= 0.0, "generate_er_dag: expected_edges must be >= 0");
    const double pairs = static_cast<double>(d) * static_cast<double>(d - 1) / 2.0;
    const double prob = pairs > 0 ? std::min(1.0, expected_edges / pairs) : 0.0;

    std::vector<Index> perm(static_cast<std::size_t>(d));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    BinaryMatrix adj = BinaryMatrix::Zero(d, d);
    for (Index a = 0; a < d; ++a)
        for (Index b = a + 1; b < d; ++b)
            if (unif(rng) < prob) adj(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]) = 1;
    return Dag(std::move(adj));
}

/// Each entry of each lag matrix is 1 with probability min(1, expected_edges / d^2).
inline LaggedGraphs generate_er_lagged(Index d, Index p, double expected_edges, Rng& rng) {
    detail::require(d >= 1 && p >= 1, "generate_er_lagged: need d >= 1 and p >= 1");
    detail::require(expected_edges >= 0.0, "generate_er_lagged: expected_edges must be >= 0");
    const double prob = std::min(1.0, expected_edges / static_cast<double>(d * d));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    LaggedGraphs out(d, p);
    for (Index k = 1; k <= p; ++k) {
        auto& m = out.matrix(k);
        for (Index i = 0; i < d; ++i)
            for (Index j = 0; j < d; ++j) m(i, j) = unif(rng) < prob ? 1 : 0;
    }
    return out;
}

inline Network generate_network(Index n, double p_edge, Rng& rng) {
    detail::require(n >= 1, "generate_network: n must be >= 1");
    detail::require(p_edge >= 0.0 && p_edge <= 1.0, "generate_network: p_edge must lie in [0, 1]");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Network net(n);
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            if (unif(rng) < p_edge) net.add_edge(i, j);
    return net;
}

// ---------------------------------------------------------------------------
// Metrics

namespace detail {

struct Confusion {
    Index correct = 0;
    Index reversed = 0;
    Index extra = 0;
    Index missing = 0;
    Index n_pred = 0;
    Index n_true = 0;
};

// Directed-edge confusion; a predicted edge whose reverse is true counts as reversed.
inline Confusion directed_confusion(const BinaryMatrix& pred, const BinaryMatrix& truth) {
    Confusion c;
    const Index d = pred.rows();
    for (Index i = 0; i < d; ++i) {
        for (Index j = 0; j < d; ++j) {
            if (i == j) continue;
            const bool p = pred(i, j) != 0;
            const bool t = truth(i, j) != 0;
            if (p) ++c.n_pred;
            if (t) ++c.n_true;
            if (p && t) ++c.correct;
            else if (p && truth(j, i) != 0) ++c.reversed;
            else if (p) ++c.extra;
        }
    }
    return c;
}

inline void check_same_shape(const BinaryMatrix& a, const BinaryMatrix& b, const char* who) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), std::string(who) + ": dimension mismatch");
}

}  // namespace detail

/// Structural Hamming distance: number of unordered node pairs whose edge state
/// differs (a reversal counts once).
inline Index shd(const Dag& pred, const Dag& truth) {
    detail::check_same_shape(pred.adjacency(), truth.adjacency(), "shd");
    const auto& p = pred.adjacency();
    const auto& t = truth.adjacency();
    Index count = 0;
    for (Index i = 0; i < p.rows(); ++i)
        for (Index j = i + 1; j < p.rows(); ++j)
            if (p(i, j) != t(i, j) || p(j, i) != t(j, i)) ++count;
    return count;
}

inline double fdr(const Dag& pred, const Dag& truth) {
    detail::check_same_shape(pred.adjacency(), truth.adjacency(), "fdr");
    const auto c = detail::directed_confusion(pred.adjacency(), truth.adjacency());
    if (c.n_pred == 0) return 0.0;
    return static_cast<double>(c.extra + c.reversed) / static_cast<double>(c.n_pred);
}

inline double tpr(const Dag& pred, const Dag& truth) {
    detail::check_same_shape(pred.adjacency(), truth.adjacency(), "tpr");
    const auto c = detail::directed_confusion(pred.adjacency(), truth.adjacency());
    if (c.n_true == 0) return 1.0;
    return static_cast<double>(c.correct) / static_cast<double>(c.n_true);
}

inline MetricsReport evaluate(const Dag& pred, const Dag& truth) {
    const auto c = detail::directed_confusion(pred.adjacency(), truth.adjacency());
    return {shd(pred, truth), fdr(pred, truth), tpr(pred, truth), c.n_pred, c.n_true};
}

/// Entrywise comparison of lag matrices; lag edges have a fixed direction, so
/// there is no reversal category.
inline MetricsReport metrics_lagged(const LaggedGraphs& pred, const LaggedGraphs& truth) {
    detail::require(pred.lags() == truth.lags() && pred.nodes() == truth.nodes(),
                    "metrics_lagged: shape mismatch");
    MetricsReport r;
    Index tp = 0;
    for (Index k = 1; k <= pred.lags(); ++k) {
        const auto& p = pred.matrix(k);
        const auto& t = truth.matrix(k);
        r.shd += (p.array() != t.array()).count();
        tp += (p.array() * t.array()).count();
        r.n_pred += p.sum();
        r.n_true += t.sum();
    }
    r.fdr = r.n_pred == 0 ? 0.0 : static_cast<double>(r.n_pred - tp) / static_cast<double>(r.n_pred);
    r.tpr = r.n_true == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(r.n_true);
    return r;
}

}  // namespace pick
