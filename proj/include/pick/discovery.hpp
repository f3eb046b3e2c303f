#pragma once

#include <algorithm>
#include <chrono>
#include <concepts>
#include <functional>
#include <future>
#include <optional>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pick/dense_result.hpp"
#include "pick/graphs.hpp"
#include "pick/oracle.hpp"
#include "pick/pruning.hpp"
#include "pick/sem.hpp"
#include "pick/stein.hpp"
#include "pick/synth.hpp"

namespace pick {

struct DiscoveryConfig {
    KernelConfig kernel;
    double parent_margin = 0.0;
    double tau_w = 0.4;
    double tau_p = 0.4;
    PruneConfig prune;
    int threads = 1;  // concurrent pick_t calls in dynamical_dag

    void validate() const {
        kernel.validate();
        prune.validate();
        detail::require(parent_margin >= 0.0, "DiscoveryConfig: parent_margin must be >= 0");
        detail::require(tau_w >= 0.0 && tau_w <= 1.0, "DiscoveryConfig: tau_w must lie in [0, 1]");
        detail::require(tau_p >= 0.0 && tau_p <= 1.0, "DiscoveryConfig: tau_p must lie in [0, 1]");
        detail::require(threads >= 1, "DiscoveryConfig: threads must be >= 1");
    }
};

/// Wall-clock seconds per pipeline stage.
struct StageTimings {
    double estimation = 0.0;
    double ordering = 0.0;
    double pruning = 0.0;

    [[nodiscard]] double total() const { return estimation + ordering + pruning; }

    StageTimings& operator+=(const StageTimings& o) {
        estimation += o.estimation;
        ordering += o.ordering;
        pruning += o.pruning;
        return *this;
    }
};

/// Scores and Jacobian diagonals over the columns (active current nodes, lag columns).
struct ScoreEstimate {
    Eigen::MatrixXd score;
    Eigen::MatrixXd jac;
};

template <class P>
concept ScoreProvider = requires(P& provider, std::span<const Index> active) {
    { provider(active) } -> std::convertible_to<ScoreEstimate>;
};

/// Kernel Stein estimates on the stacked data restricted to the active
/// current columns plus every lag column.
class SteinProvider {
public:
    SteinProvider(const Eigen::MatrixXd& stacked, Index d, KernelConfig cfg)
        : stacked_(stacked), d_(d), cfg_(std::move(cfg)) {}

    ScoreEstimate operator()(std::span<const Index> active) const {
        const Index lag_cols = stacked_.cols() - d_;
        Eigen::MatrixXd sub(stacked_.rows(), static_cast<Index>(active.size()) + lag_cols);
        Index c = 0;
        for (Index a : active) sub.col(c++) = stacked_.col(a);
        if (lag_cols > 0) sub.rightCols(lag_cols) = stacked_.rightCols(lag_cols);
        SteinEstimator est(sub, cfg_);
        return {est.score().values, est.jacobian_diag().values};
    }

private:
    const Eigen::MatrixXd& stacked_;
    Index d_;
    KernelConfig cfg_;
};

/// Exact conditional scores from the generating SEM (test harness mode).
class OracleProvider {
public:
    OracleProvider(const Eigen::MatrixXd& stacked, const SemSpec& sem) : stacked_(stacked), sem_(sem) {}

    ScoreEstimate operator()(std::span<const Index> active) const {
        auto terms = detail::oracle_terms(stacked_, sem_, active);
        return {std::move(terms.score), std::move(terms.jac)};
    }

private:
    const Eigen::MatrixXd& stacked_;
    const SemSpec& sem_;
};

/// Active current node whose Jacobian-diagonal column has the smallest sample
/// variance. Column c < |active| belongs to active[c]; later (lag) columns
/// never qualify. Exact ties go to the smallest column.
inline Index find_leaf(const JacDiagMatrix& jac, std::span<const Index> active) {
    detail::require(!active.empty(), "find_leaf: empty active set");
    detail::require(jac.values.cols() >= static_cast<Index>(active.size()),
                    "find_leaf: fewer Jacobian columns than active nodes");
    const Eigen::VectorXd vars = column_variances(jac.values.leftCols(static_cast<Index>(active.size())));
    Index best = 0;
    for (Index c = 1; c < vars.size(); ++c)
        if (vars(c) < vars(best)) best = c;
    return active[static_cast<std::size_t>(best)];
}

/// Columns whose score variance dropped after a leaf was removed:
/// {i : new_vars[i] < old_vars[i] * (1 - margin)}.
/// When removed_position is set, old_vars still contains the removed leaf's
/// column at that position and it is skipped; otherwise both vectors must
/// already be aligned.
inline std::vector<Index> identify_parents(const Eigen::VectorXd& old_vars, const Eigen::VectorXd& new_vars,
                                           std::optional<Index> removed_position, double margin = 0.0) {
    detail::require(margin >= 0.0, "identify_parents: margin must be >= 0");
    Eigen::VectorXd aligned = old_vars;
    if (removed_position) {
        const Index pos = *removed_position;
        detail::require(pos >= 0 && pos < old_vars.size(), "identify_parents: removed position out of range");
        aligned.resize(old_vars.size() - 1);
        aligned << old_vars.head(pos), old_vars.tail(old_vars.size() - pos - 1);
    }
    detail::require(aligned.size() == new_vars.size(), "identify_parents: variance vectors are misaligned");
    std::vector<Index> out;
    for (Index i = 0; i < new_vars.size(); ++i)
        if (new_vars(i) < aligned(i) * (1.0 - margin)) out.push_back(i);
    return out;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Iterative leaf removal with parent attribution. Parents are attributed to
// the previously removed leaf, comparing this iteration's score variances with
// the previous iteration's (leaf column dropped). With lags, a final pass on
// the lag block alone attributes lag parents to the last leaf.
template <ScoreProvider P>
DenseResult leaf_parent_loop(P& provider, Index d, Index p, double margin, StageTimings& timings) {
    std::vector<Index> active(static_cast<std::size_t>(d));
    for (Index i = 0; i < d; ++i) active[static_cast<std::size_t>(i)] = i;

    DenseResult out;
    out.dense_w = BinaryMatrix::Zero(d, d);
    if (p > 0) out.dense_p = LaggedGraphs(d, p);

    std::vector<Index> removal;
    std::optional<Index> prev_leaf;
    std::vector<Index> prev_active;
    Eigen::VectorXd old_vars;

    auto attribute = [&](Index leaf, const std::vector<Index>& cols_active, const std::vector<Index>& parents) {
        const auto n_active = static_cast<Index>(cols_active.size());
        for (Index pos : parents) {
            if (pos < n_active) {
                out.dense_w(cols_active[static_cast<std::size_t>(pos)], leaf) = 1;
            } else {
                const Index lag_col = pos - n_active;  // 0-based within the lag block
                out.dense_p->matrix(lag_col / d + 1)(leaf, lag_col % d) = 1;
            }
        }
    };

    for (Index iter = 0; iter < d; ++iter) {
        if (active.size() == 1 && p == 0 && !prev_leaf) {
            removal.push_back(active.front());
            break;
        }
        auto start = Clock::now();
        const ScoreEstimate est = provider(std::span<const Index>(active));
        timings.estimation += seconds_since(start);

        start = Clock::now();
        const Eigen::VectorXd new_vars = column_variances(est.score);
        if (prev_leaf) attribute(*prev_leaf, active, identify_parents(old_vars, new_vars, std::nullopt, margin));

        const Index leaf = find_leaf(JacDiagMatrix{est.jac}, active);
        const auto leaf_pos = static_cast<Index>(std::find(active.begin(), active.end(), leaf) - active.begin());
        old_vars.resize(new_vars.size() - 1);
        old_vars << new_vars.head(leaf_pos), new_vars.tail(new_vars.size() - leaf_pos - 1);

        prev_leaf = leaf;
        active.erase(active.begin() + leaf_pos);
        removal.push_back(leaf);
        timings.ordering += seconds_since(start);
    }

    if (p > 0 && prev_leaf) {
        auto start = Clock::now();
        const ScoreEstimate est = provider(std::span<const Index>(active));
        timings.estimation += seconds_since(start);
        start = Clock::now();
        attribute(*prev_leaf, active,
                  identify_parents(old_vars, column_variances(est.score), std::nullopt, margin));
        timings.ordering += seconds_since(start);
    }

    out.order.order.assign(removal.rbegin(), removal.rend());
    return out;
}

}  // namespace detail

struct StaticResult {
    TopoOrder order;
    Dag dag;
    DenseResult dense;
    StageTimings timings;
};

/// Static leaf/parent loop followed by additive-model pruning, with a caller
/// supplied score provider.
template <ScoreProvider P>
StaticResult pick_s_with(P& provider, const Eigen::MatrixXd& x, const DiscoveryConfig& cfg) {
    cfg.validate();
    detail::require(x.cols() >= 1, "pick_s: need at least one column");
    detail::require(x.rows() >= 2, "pick_s: need at least two samples");
    StaticResult res;
    res.dense = detail::leaf_parent_loop(provider, x.cols(), 0, cfg.parent_margin, res.timings);
    res.order = res.dense.order;
    const auto start = detail::Clock::now();
    res.dag = prune_dag(res.dense, x, cfg.prune).w;
    res.timings.pruning += detail::seconds_since(start);
    return res;
}

/// Static pipeline on i.i.d. data with kernel Stein scores.
inline StaticResult pick_s(const Eigen::MatrixXd& x, const DiscoveryConfig& cfg = {}) {
    detail::require(x.rows() >= 2, "pick_s: need at least two samples");
    check_no_constant_columns(x, "pick_s");
    SteinProvider provider(x, x.cols(), cfg.kernel);
    return pick_s_with(provider, x, cfg);
}

struct TemporalStepResult {
    Dag w;
    LaggedGraphs p;
    DenseResult dense;
    StageTimings timings;
};

template <ScoreProvider P>
TemporalStepResult pick_t_with(P& provider, const Eigen::MatrixXd& stacked, Index p, const DiscoveryConfig& cfg) {
    cfg.validate();
    detail::require(p >= 1, "pick_t: lag order must be >= 1");
    detail::require(stacked.rows() >= 2, "pick_t: need at least two samples");
    detail::require(stacked.cols() % (p + 1) == 0 && stacked.cols() > 0,
                    "pick_t: stacked width must be a positive multiple of p + 1");
    const Index d = stacked.cols() / (p + 1);
    TemporalStepResult res;
    res.dense = detail::leaf_parent_loop(provider, d, p, cfg.parent_margin, res.timings);
    const auto start = detail::Clock::now();
    auto pruned = prune_dag(res.dense, stacked, cfg.prune);
    res.timings.pruning += detail::seconds_since(start);
    res.w = std::move(pruned.w);
    res.p = std::move(*pruned.p);
    return res;
}

/// One temporal step. Columns of `stacked` are (current d, lag-1 d, ..., lag-p d)
/// with the lag blocks already neighbor-aggregated.
inline TemporalStepResult pick_t(const Eigen::MatrixXd& stacked, Index p, const DiscoveryConfig& cfg = {}) {
    detail::require(p >= 1, "pick_t: lag order must be >= 1");
    detail::require(stacked.rows() >= 2, "pick_t: need at least two samples");
    detail::require(stacked.cols() % (p + 1) == 0, "pick_t: stacked width must be a multiple of p + 1");
    check_no_constant_columns(stacked, "pick_t");
    SteinProvider provider(stacked, stacked.cols() / (p + 1), cfg.kernel);
    return pick_t_with(provider, stacked, p, cfg);
}

/// Entry 1 iff freq >= tau (inclusive).
inline BinaryMatrix threshold_frequency(const Eigen::MatrixXd& freq, double tau) {
    return (freq.array() >= tau).cast<int>().matrix();
}

namespace detail {

// One directed cycle as a list of edges, or empty if the graph is acyclic.
inline std::vector<std::pair<Index, Index>> find_cycle(const BinaryMatrix& adj) {
    const Index d = adj.rows();
    std::vector<int> state(static_cast<std::size_t>(d), 0);  // 0 new, 1 on stack, 2 done
    std::vector<Index> parent(static_cast<std::size_t>(d), -1);
    std::vector<std::pair<Index, Index>> cycle;

    std::function<bool(Index)> dfs = [&](Index u) {
        state[static_cast<std::size_t>(u)] = 1;
        for (Index v = 0; v < d; ++v) {
            if (adj(u, v) == 0) continue;
            if (state[static_cast<std::size_t>(v)] == 1) {
                cycle.emplace_back(u, v);
                for (Index w = u; w != v; w = parent[static_cast<std::size_t>(w)])
                    cycle.emplace_back(parent[static_cast<std::size_t>(w)], w);
                return true;
            }
            if (state[static_cast<std::size_t>(v)] == 0) {
                parent[static_cast<std::size_t>(v)] = u;
                if (dfs(v)) return true;
            }
        }
        state[static_cast<std::size_t>(u)] = 2;
        return false;
    };
    for (Index s = 0; s < d; ++s)
        if (state[static_cast<std::size_t>(s)] == 0 && dfs(s)) break;
    return cycle;
}

}  // namespace detail

/// Removes, cycle by cycle, the edge with the lowest frequency (ties: the
/// lexicographically smallest edge) until the graph is acyclic.
inline BinaryMatrix break_cycles(BinaryMatrix adj, const Eigen::MatrixXd& freq) {
    for (auto cycle = detail::find_cycle(adj); !cycle.empty(); cycle = detail::find_cycle(adj)) {
        auto weakest = *std::min_element(cycle.begin(), cycle.end(), [&](const auto& a, const auto& b) {
            return std::make_tuple(freq(a.first, a.second), a.first, a.second) <
                   std::make_tuple(freq(b.first, b.second), b.first, b.second);
        });
        adj(weakest.first, weakest.second) = 0;
    }
    return adj;
}

struct DynamicalResult {
    Dag w;
    LaggedGraphs p;
    Eigen::MatrixXd freq_w;
    std::vector<Eigen::MatrixXd> freq_p;
    Index steps = 0;
    StageTimings timings;
};

/// Runs pick_t on every valid snapshot t in {p, ..., T-1} (0-based), averages
/// the binary outputs in t order and thresholds them. `make_provider(stacked, t)`
/// supplies the score provider for each step.
template <class MakeProvider>
DynamicalResult dynamical_dag_with(const TemporalDataset& data, Index p, const DiscoveryConfig& cfg,
                                   MakeProvider&& make_provider) {
    cfg.validate();
    data.validate();
    detail::require(p >= 1, "dynamical_dag: lag order must be >= 1");
    detail::require(data.length() > p, "dynamical_dag: need more snapshots than the lag order");
    const Index d = data.features();
    const Index first = p;
    const Index steps = data.length() - p;

    std::vector<std::optional<TemporalStepResult>> results(static_cast<std::size_t>(steps));
    auto run_step = [&](Index t) {
        const Eigen::MatrixXd stacked = stacked_input(data, t, p);
        auto provider = make_provider(stacked, t);
        results[static_cast<std::size_t>(t - first)] = pick_t_with(provider, stacked, p, cfg);
    };

    if (cfg.threads <= 1) {
        for (Index t = first; t < data.length(); ++t) run_step(t);
    } else {
        for (Index base = first; base < data.length(); base += cfg.threads) {
            std::vector<std::future<void>> batch;
            for (Index t = base; t < std::min<Index>(base + cfg.threads, data.length()); ++t)
                batch.push_back(std::async(std::launch::async, run_step, t));
            for (auto& f : batch) f.get();
        }
    }

    DynamicalResult out;
    out.steps = steps;
    out.freq_w = Eigen::MatrixXd::Zero(d, d);
    out.freq_p.assign(static_cast<std::size_t>(p), Eigen::MatrixXd::Zero(d, d));
    for (const auto& r : results) {
        out.freq_w += r->w.adjacency().cast<double>();
        for (Index k = 1; k <= p; ++k) out.freq_p[static_cast<std::size_t>(k - 1)] += r->p.matrix(k).cast<double>();
        out.timings += r->timings;
    }
    out.freq_w /= static_cast<double>(steps);
    for (auto& f : out.freq_p) f /= static_cast<double>(steps);

    out.w = Dag(break_cycles(threshold_frequency(out.freq_w, cfg.tau_w), out.freq_w));
    std::vector<BinaryMatrix> lag_mats;
    for (const auto& f : out.freq_p) lag_mats.push_back(threshold_frequency(f, cfg.tau_p));
    out.p = LaggedGraphs(std::move(lag_mats));
    return out;
}

inline DynamicalResult dynamical_dag(const TemporalDataset& data, Index p, const DiscoveryConfig& cfg = {}) {
    const Index d = data.features();
    return dynamical_dag_with(data, p, cfg, [&](const Eigen::MatrixXd& stacked, Index) {
        check_no_constant_columns(stacked, "dynamical_dag");
        return SteinProvider(stacked, d, cfg.kernel);
    });
}

}  // namespace pick
