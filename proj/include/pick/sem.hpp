#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pick/graphs.hpp"

namespace pick {

enum class LinkKind { SinSum, GpRbf };

struct LinkSpec {
    LinkKind kind = LinkKind::SinSum;
    double bandwidth = 1.0;  // gp-rbf only

    [[nodiscard]] std::string name() const { return kind == LinkKind::SinSum ? "sin" : "gp"; }

    static LinkSpec parse(const std::string& s) {
        if (s == "sin" || s == "sin-sum") return {LinkKind::SinSum, 1.0};
        if (s == "gp" || s == "gp-rbf") return {LinkKind::GpRbf, 1.0};
        throw ArgumentError("unknown link kind '" + s + "' (expected sin or gp)");
    }
};

/// Full generative description of an additive-noise SEM, optionally with lags.
///
/// Data layout used everywhere downstream ("stacked" columns): columns 0..d-1
/// hold the current snapshot, column k*d + m holds the aggregated lag-k value
/// of node m.
struct SemSpec {
    Dag dag;
    std::optional<LaggedGraphs> lagged;
    LinkSpec link;
    std::vector<double> noise_sd;
    std::uint64_t seed = 0;

    [[nodiscard]] Index nodes() const { return dag.size(); }
    [[nodiscard]] Index lags() const { return lagged ? lagged->lags() : 0; }
    [[nodiscard]] Index stacked_columns() const { return nodes() * (lags() + 1); }

    void validate() const {
        detail::require(static_cast<Index>(noise_sd.size()) == nodes(), "SemSpec: one noise scale per node required");
        for (double s : noise_sd)
            detail::require(s > 0.0 && std::isfinite(s), "SemSpec: noise scales must be > 0");
        if (lagged) detail::require(lagged->nodes() == nodes(), "SemSpec: lagged graphs must be d x d");
        if (link.kind == LinkKind::GpRbf) detail::require(link.bandwidth > 0.0, "SemSpec: GP bandwidth must be > 0");
    }

    /// Stacked-layout columns feeding node j: current parents first, then
    /// lag 1..p parents, each block ascending.
    [[nodiscard]] std::vector<Index> parent_columns(Index j) const {
        std::vector<Index> cols = dag.parents(j);
        for (Index k = 1; k <= lags(); ++k) {
            const auto& m = lagged->matrix(k);
            for (Index src = 0; src < nodes(); ++src)
                if (m(j, src) != 0) cols.push_back(k * nodes() + src);
        }
        return cols;
    }

    /// Nodes whose link takes stacked column c as an input.
    [[nodiscard]] std::vector<Index> consumers(Index c) const {
        const Index d = nodes();
        if (c < d) return dag.children(c);
        std::vector<Index> out;
        const Index k = c / d;
        const Index src = c % d;
        const auto& m = lagged->matrix(k);
        for (Index j = 0; j < d; ++j)
            if (m(j, src) != 0) out.push_back(j);
        return out;
    }
};

}  // namespace pick
