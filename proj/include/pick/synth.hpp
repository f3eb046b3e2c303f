#pragma once

#include <cmath>
#include <deque>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pick/graphs.hpp"
#include "pick/sem.hpp"

namespace pick {

/// One observed snapshot: unit-by-feature data plus the unit network.
struct Snapshot {
    Eigen::MatrixXd x;
    Network network;
};

struct TemporalDataset {
    std::vector<Snapshot> snapshots;

    [[nodiscard]] Index length() const { return static_cast<Index>(snapshots.size()); }
    [[nodiscard]] Index units() const { return snapshots.empty() ? 0 : snapshots.front().x.rows(); }
    [[nodiscard]] Index features() const { return snapshots.empty() ? 0 : snapshots.front().x.cols(); }

    void validate() const {
        for (const auto& s : snapshots) {
            detail::require(s.x.rows() == units() && s.x.cols() == features(),
                            "TemporalDataset: snapshots must share n and d");
            detail::require(s.network.size() == units(), "TemporalDataset: network size must equal n");
        }
    }
};

// RNG stage ids derived from SemSpec::seed.
inline constexpr std::uint64_t kNoiseStage = 2;
inline constexpr std::uint64_t kLinkStageBase = 1000;

/// D^-1/2 (A + I) D^-1/2 X with D_ii = deg(i) + 1.
inline Eigen::MatrixXd aggregate_neighbors(const Network& a, const Eigen::MatrixXd& x) {
    detail::require(a.size() == x.rows(), "aggregate_neighbors: network size does not match rows of X");
    const Index n = x.rows();
    auto deg = [&](Index i) { return static_cast<double>(a.degree(i) + 1); };

    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, x.cols());
    for (Index i = 0; i < n; ++i) {
        // Closed neighborhood in ascending order, self included at its sorted position.
        // 1 / sqrt(D_ii D_jj) in one rounding step keeps regular graphs exact.
        bool self_done = false;
        auto add = [&](Index j) { out.row(i) += (1.0 / std::sqrt(deg(i) * deg(j))) * x.row(j); };
        for (Index j : a.neighbors(i)) {
            if (!self_done && i < j) {
                add(i);
                self_done = true;
            }
            add(j);
        }
        if (!self_done) add(i);
    }
    return out;
}

namespace detail {

inline double rbf(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b,
                  double bandwidth) {
    return std::exp(-0.5 * (a - b).squaredNorm() / (bandwidth * bandwidth));
}

// Lower Cholesky factor of cov + jitter I, raising the jitter tenfold on failure.
inline Eigen::MatrixXd jittered_cholesky(Eigen::MatrixXd cov, double jitter = 1e-10) {
    for (; jitter <= 1e-4; jitter *= 10.0) {
        Eigen::MatrixXd trial = cov;
        trial.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(trial);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    throw NumericalError("GP draw: covariance is not positive definite even with jitter 1e-4");
}

}  // namespace detail

/// A single GP sample path, realized lazily at the points where it is queried.
/// New points are drawn from the conditional Gaussian given every value
/// realized so far, so repeated queries stay mutually consistent.
class GpFunction {
public:
    GpFunction(Index input_dim, double bandwidth, Rng rng)
        : dim_(input_dim), bandwidth_(bandwidth), rng_(std::move(rng)) {}

    Eigen::VectorXd evaluate(const Eigen::MatrixXd& inputs) {
        detail::require(inputs.cols() == dim_, "GpFunction: input dimension mismatch");
        std::vector<Index> fresh;
        std::map<std::vector<double>, Index> batch_seen;
        for (Index r = 0; r < inputs.rows(); ++r) {
            auto key = row_key(inputs, r);
            if (index_.count(key) || batch_seen.count(key)) continue;
            batch_seen.emplace(std::move(key), r);
            fresh.push_back(r);
        }
        if (!fresh.empty()) extend(inputs, fresh);

        Eigen::VectorXd out(inputs.rows());
        for (Index r = 0; r < inputs.rows(); ++r) out(r) = values_(index_.at(row_key(inputs, r)));
        return out;
    }

    [[nodiscard]] Index realized_points() const { return values_.size(); }

private:
    static std::vector<double> row_key(const Eigen::MatrixXd& m, Index r) {
        std::vector<double> key(static_cast<std::size_t>(m.cols()));
        for (Index c = 0; c < m.cols(); ++c) key[static_cast<std::size_t>(c)] = m(r, c);
        return key;
    }

    void extend(const Eigen::MatrixXd& inputs, const std::vector<Index>& fresh) {
        const Index old_m = points_.rows();
        const Index q = static_cast<Index>(fresh.size());
        Eigen::MatrixXd new_pts(q, dim_);
        for (Index a = 0; a < q; ++a) new_pts.row(a) = inputs.row(fresh[static_cast<std::size_t>(a)]);

        Eigen::MatrixXd k22(q, q);
        for (Index a = 0; a < q; ++a)
            for (Index b = 0; b <= a; ++b) k22(a, b) = k22(b, a) = detail::rbf(new_pts.row(a), new_pts.row(b), bandwidth_);

        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::VectorXd z(q);
        for (Index a = 0; a < q; ++a) z(a) = normal(rng_);

        Eigen::VectorXd f_new;
        Eigen::MatrixXd cross_t;  // L^-1 K12, old_m x q
        Eigen::MatrixXd l22;
        if (old_m == 0) {
            l22 = detail::jittered_cholesky(k22);
            f_new = l22 * z;
        } else {
            Eigen::MatrixXd k12(old_m, q);
            for (Index a = 0; a < old_m; ++a)
                for (Index b = 0; b < q; ++b) k12(a, b) = detail::rbf(points_.row(a), new_pts.row(b), bandwidth_);
            const auto lower = chol_.triangularView<Eigen::Lower>();
            cross_t = lower.solve(k12);
            const Eigen::VectorXd white = lower.solve(values_);
            const Eigen::MatrixXd cond_cov = k22 - cross_t.transpose() * cross_t;
            l22 = detail::jittered_cholesky(0.5 * (cond_cov + cond_cov.transpose()));
            f_new = cross_t.transpose() * white + l22 * z;
        }

        Eigen::MatrixXd chol(old_m + q, old_m + q);
        chol.setZero();
        if (old_m > 0) {
            chol.topLeftCorner(old_m, old_m) = chol_;
            chol.bottomLeftCorner(q, old_m) = cross_t.transpose();
        }
        chol.bottomRightCorner(q, q) = l22;
        chol_ = std::move(chol);

        Eigen::MatrixXd pts(old_m + q, dim_);
        if (old_m > 0) pts.topRows(old_m) = points_;
        pts.bottomRows(q) = new_pts;
        points_ = std::move(pts);

        Eigen::VectorXd vals(old_m + q);
        if (old_m > 0) vals.head(old_m) = values_;
        vals.tail(q) = f_new;
        values_ = std::move(vals);

        for (Index a = 0; a < q; ++a) index_.emplace(row_key(new_pts, a), old_m + a);
    }

    Index dim_;
    double bandwidth_;
    Rng rng_;
    Eigen::MatrixXd points_;
    Eigen::VectorXd values_;
    Eigen::MatrixXd chol_;
    std::map<std::vector<double>, Index> index_;
};

/// Per-node GP sample paths for one simulation. Node j draws from its own
/// stream derive_rng(seed, kLinkStageBase + j), so the evaluation order of
/// nodes does not change the realized functions.
class GpCache {
public:
    explicit GpCache(std::uint64_t seed = 0) : seed_(seed) {}

    GpFunction& function(Index node, Index input_dim, double bandwidth) {
        auto it = fns_.find(node);
        if (it == fns_.end())
            it = fns_.emplace(node, GpFunction(input_dim, bandwidth,
                                               derive_rng(seed_, kLinkStageBase + static_cast<std::uint64_t>(node))))
                     .first;
        return it->second;
    }

private:
    std::uint64_t seed_;
    std::map<Index, GpFunction> fns_;
};

/// f_node evaluated at each input row; inputs are the node's parent columns
/// in SemSpec::parent_columns order.
inline Eigen::VectorXd link_eval(const SemSpec& sem, Index node, const Eigen::MatrixXd& inputs, GpCache& cache) {
    const auto expected = static_cast<Index>(sem.parent_columns(node).size());
    detail::require(inputs.cols() == expected, "link_eval: input columns must match the node's parent count");
    if (inputs.cols() == 0) return Eigen::VectorXd::Zero(inputs.rows());
    switch (sem.link.kind) {
        case LinkKind::SinSum:
            return inputs.array().sin().rowwise().sum().matrix();
        case LinkKind::GpRbf:
            return cache.function(node, inputs.cols(), sem.link.bandwidth).evaluate(inputs);
    }
    throw ArgumentError("link_eval: unknown link kind");
}

namespace detail {

inline Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& x, const std::vector<Index>& cols) {
    Eigen::MatrixXd out(x.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = x.col(cols[c]);
    return out;
}

// Fills the current block (first d columns) of a stacked matrix whose lag
// blocks are already set, in topological order of the DAG.
inline void generate_current(const SemSpec& sem, Eigen::MatrixXd& stacked, GpCache& cache, Rng& noise) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index n = stacked.rows();
    for (Index j : sem.dag.topological_order()) {
        Eigen::VectorXd col = link_eval(sem, j, gather_columns(stacked, sem.parent_columns(j)), cache);
        const double sd = sem.noise_sd[static_cast<std::size_t>(j)];
        for (Index r = 0; r < n; ++r) col(r) += sd * normal(noise);
        stacked.col(j) = col;
    }
}

inline void validate_for_simulation(const SemSpec& sem) {
    require(static_cast<Index>(sem.noise_sd.size()) == sem.nodes(), "SemSpec: one noise scale per node required");
    for (double s : sem.noise_sd) require(s >= 0.0 && std::isfinite(s), "SemSpec: noise scales must be >= 0");
}

}  // namespace detail

/// Static additive-noise data: X_j = f_j(X_pa(j)) + sigma_j z in topological order.
/// Noise is drawn node by node (topological order), n draws each.
inline Eigen::MatrixXd simulate_static(const SemSpec& sem, Index n) {
    detail::require(!sem.lagged, "simulate_static: SemSpec must not carry lagged graphs");
    detail::require(n >= 1, "simulate_static: n must be >= 1");
    detail::validate_for_simulation(sem);
    GpCache cache(sem.seed);
    Rng noise = derive_rng(sem.seed, kNoiseStage);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, sem.nodes());
    detail::generate_current(sem, x, cache, noise);
    return x;
}

/// Stacked input (X^t, A^{t-1} X^{t-1}, ..., A^{t-p} X^{t-p}) for 0-based snapshot t >= p.
inline Eigen::MatrixXd stacked_input(const TemporalDataset& data, Index t, Index p) {
    detail::require(p >= 1, "stacked_input: p must be >= 1");
    detail::require(t >= p && t < data.length(), "stacked_input: snapshot index out of range");
    const Index d = data.features();
    Eigen::MatrixXd out(data.units(), d * (p + 1));
    out.leftCols(d) = data.snapshots[static_cast<std::size_t>(t)].x;
    for (Index k = 1; k <= p; ++k) {
        const auto& s = data.snapshots[static_cast<std::size_t>(t - k)];
        out.middleCols(k * d, d) = aggregate_neighbors(s.network, s.x);
    }
    return out;
}

/// Temporal SVAR with network interference. The p lag slots start as pure
/// noise; burn_in leading snapshots are generated and discarded. networks is
/// either a single network reused for every step or one per generated step
/// (length >= T + burn_in).
inline TemporalDataset simulate_temporal(const SemSpec& sem, const std::vector<Network>& networks, Index n, Index T,
                                         Index burn_in = 5) {
    detail::require(sem.lagged.has_value(), "simulate_temporal: SemSpec needs lagged graphs");
    detail::require(n >= 1 && T >= 1 && burn_in >= 0, "simulate_temporal: need n >= 1, T >= 1, burn_in >= 0");
    detail::require(networks.size() == 1 || static_cast<Index>(networks.size()) >= T + burn_in,
                    "simulate_temporal: need one network or at least T + burn_in networks");
    for (const auto& net : networks)
        detail::require(net.size() == n, "simulate_temporal: network size must equal n");
    detail::validate_for_simulation(sem);

    const Index d = sem.nodes();
    const Index p = sem.lags();
    auto network_at = [&](Index step) -> const Network& {
        if (networks.size() == 1 || step < 0) return networks.front();
        return networks[static_cast<std::size_t>(step)];
    };

    GpCache cache(sem.seed);
    Rng noise = derive_rng(sem.seed, kNoiseStage);
    std::normal_distribution<double> normal(0.0, 1.0);

    // history.front() is the most recent snapshot.
    std::deque<Eigen::MatrixXd> history;
    for (Index k = 0; k < p; ++k) {
        Eigen::MatrixXd init(n, d);
        for (Index j = 0; j < d; ++j)
            for (Index r = 0; r < n; ++r) init(r, j) = sem.noise_sd[static_cast<std::size_t>(j)] * normal(noise);
        history.push_front(std::move(init));
    }

    TemporalDataset out;
    for (Index step = 0; step < T + burn_in; ++step) {
        Eigen::MatrixXd stacked = Eigen::MatrixXd::Zero(n, d * (p + 1));
        for (Index k = 1; k <= p; ++k)
            stacked.middleCols(k * d, d) =
                aggregate_neighbors(network_at(step - k), history[static_cast<std::size_t>(k - 1)]);
        detail::generate_current(sem, stacked, cache, noise);

        Eigen::MatrixXd current = stacked.leftCols(d);
        history.push_front(current);
        history.pop_back();
        if (step >= burn_in) out.snapshots.push_back({std::move(current), network_at(step)});
    }
    return out;
}

}  // namespace pick
