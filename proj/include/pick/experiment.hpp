#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pick/discovery.hpp"
#include "pick/graphs.hpp"
#include "pick/io.hpp"
#include "pick/sem.hpp"
#include "pick/synth.hpp"

namespace pick::experiment {

namespace fs = std::filesystem;
using io::KeyValues;

enum class Mode { Static, Temporal };

inline constexpr std::uint64_t kGraphStage = 1;
inline constexpr std::uint64_t kNetworkStage = 3;

/// Density label "erK" -> expected edges K * d.
inline double parse_density(const std::string& label) {
    if (label.size() < 3 || (label.rfind("er", 0) != 0 && label.rfind("ER", 0) != 0))
        throw ArgumentError("graph density must look like er1, er2, er4 (got '" + label + "')");
    try {
        std::size_t used = 0;
        const double k = std::stod(label.substr(2), &used);
        if (used != label.size() - 2 || k < 0) throw std::invalid_argument(label);
        return k;
    } catch (const std::exception&) {
        throw ArgumentError("bad graph density '" + label + "'");
    }
}

inline SelectionRule parse_rule(const std::string& s) {
    if (s == "f-test") return SelectionRule::FTest;
    if (s == "inverse-alpha") return SelectionRule::InverseAlpha;
    if (s == "paper-alpha") return SelectionRule::PaperAlpha;
    throw ArgumentError("unknown prune_rule '" + s + "' (expected f-test, inverse-alpha or paper-alpha)");
}

inline std::string rule_name(SelectionRule r) {
    switch (r) {
        case SelectionRule::FTest: return "f-test";
        case SelectionRule::InverseAlpha: return "inverse-alpha";
        case SelectionRule::PaperAlpha: return "paper-alpha";
    }
    return "f-test";
}

struct ExperimentConfig {
    Mode mode = Mode::Static;
    std::vector<Index> d{10};
    Index n = 1000;
    Index T = 10;
    Index p = 1;
    std::vector<std::string> graph{"er1"};
    std::string lag_graph = "er1";
    std::vector<std::string> link{"sin"};
    std::vector<std::uint64_t> seeds{0};
    std::optional<double> noise_sd;
    double p_edge = 0.01;
    Index burn_in = 5;
    DiscoveryConfig discovery;
    fs::path output_dir = "pick_out";
    std::vector<Index> n_sweep;
    std::vector<Index> d_sweep;
    Index sweep_reps = 3;
    bool oracle_calibration = false;

    [[nodiscard]] double noise() const { return noise_sd.value_or(mode == Mode::Static ? 1.0 : 0.5); }
    [[nodiscard]] bool temporal() const { return mode == Mode::Temporal; }

    static ExperimentConfig from(const KeyValues& kv) {
        static const std::vector<std::string> known{
            "mode", "d", "n", "T", "p", "graph", "lag_graph", "link", "seeds", "noise_sd", "p_edge", "burn_in",
            "tau", "tau_w", "tau_p", "alpha", "eta", "bandwidth", "margin", "prune_rule", "n_basis", "threads",
            "output_dir", "n_sweep", "d_sweep", "sweep_reps", "oracle_calibration"};
        for (const auto& key : kv.keys())
            if (std::find(known.begin(), known.end(), key) == known.end())
                throw ArgumentError(kv.error_at(key, "unknown key"));

        ExperimentConfig c;
        const auto mode = kv.get("mode", "static");
        if (mode == "static") c.mode = Mode::Static;
        else if (mode == "temporal") c.mode = Mode::Temporal;
        else throw ArgumentError(kv.error_at("mode", "expected static or temporal"));

        c.d = kv.numbers<Index>("d", "10");
        c.n = kv.number<Index>("n", c.n);
        c.T = kv.number<Index>("T", c.T);
        c.p = kv.number<Index>("p", c.p);
        c.graph = kv.list("graph", "er1");
        c.lag_graph = kv.get("lag_graph", c.lag_graph);
        c.link = kv.list("link", "sin");
        c.seeds.clear();
        for (auto s : kv.numbers<long long>("seeds", "0")) {
            if (s < 0) throw ArgumentError(kv.error_at("seeds", "seeds must be non-negative"));
            c.seeds.push_back(static_cast<std::uint64_t>(s));
        }
        if (kv.has("noise_sd")) c.noise_sd = kv.number<double>("noise_sd", 1.0);
        c.p_edge = kv.number<double>("p_edge", c.p_edge);
        c.burn_in = kv.number<Index>("burn_in", c.burn_in);

        auto& dc = c.discovery;
        const double tau = kv.number<double>("tau", 0.4);
        dc.tau_w = kv.number<double>("tau_w", tau);
        dc.tau_p = kv.number<double>("tau_p", tau);
        dc.prune.alpha = kv.number<double>("alpha", dc.prune.alpha);
        dc.kernel.eta = kv.number<double>("eta", dc.kernel.eta);
        if (kv.has("bandwidth")) dc.kernel.fixed_bandwidth = kv.number<double>("bandwidth", 1.0);
        dc.parent_margin = kv.number<double>("margin", dc.parent_margin);
        if (kv.has("prune_rule")) {
            try {
                dc.prune.rule = parse_rule(kv.get("prune_rule", ""));
            } catch (const ArgumentError& e) {
                throw ArgumentError(kv.error_at("prune_rule", e.what()));
            }
        }
        dc.prune.n_basis = kv.number<Index>("n_basis", dc.prune.n_basis);
        dc.threads = static_cast<int>(kv.number<Index>("threads", 1));

        c.output_dir = kv.get("output_dir", c.output_dir.string());
        if (kv.has("n_sweep")) c.n_sweep = kv.numbers<Index>("n_sweep", "");
        if (kv.has("d_sweep")) c.d_sweep = kv.numbers<Index>("d_sweep", "");
        c.sweep_reps = kv.number<Index>("sweep_reps", c.sweep_reps);
        c.oracle_calibration = kv.number<Index>("oracle_calibration", 0) != 0;

        auto check = [&](bool ok, const std::string& key, const std::string& msg) {
            if (!ok) throw ArgumentError(kv.error_at(key, msg));
        };
        for (Index v : c.d) check(v >= 1, "d", "must be >= 1");
        check(c.n >= 2, "n", "must be >= 2");
        check(c.T >= 1, "T", "must be >= 1");
        check(!c.temporal() || (c.p >= 1 && c.T > c.p), "p", "temporal mode needs p >= 1 and T > p");
        check(!c.seeds.empty(), "seeds", "need at least one seed");
        check(c.noise() >= 0.0, "noise_sd", "must be >= 0");
        check(c.p_edge >= 0.0 && c.p_edge <= 1.0, "p_edge", "must lie in [0, 1]");
        check(c.burn_in >= 0, "burn_in", "must be >= 0");
        check(c.sweep_reps >= 1, "sweep_reps", "must be >= 1");
        for (Index v : c.n_sweep) check(v >= 2, "n_sweep", "entries must be >= 2");
        for (Index v : c.d_sweep) check(v >= 1, "d_sweep", "entries must be >= 1");
        for (const auto& g : c.graph) {
            try {
                parse_density(g);
            } catch (const ArgumentError& e) {
                throw ArgumentError(kv.error_at("graph", e.what()));
            }
        }
        for (const auto& l : c.link) {
            try {
                LinkSpec::parse(l);
            } catch (const ArgumentError& e) {
                throw ArgumentError(kv.error_at("link", e.what()));
            }
        }
        try {
            parse_density(c.lag_graph);
            dc.validate();
        } catch (const ArgumentError& e) {
            throw ArgumentError(kv.source() + ": " + e.what());
        }
        return c;
    }

    static ExperimentConfig load(const fs::path& path) { return from(KeyValues::load(path)); }
};

// ---------------------------------------------------------------------------
// Simulation

/// One generated dataset with its ground truth.
struct SimulatedDataset {
    SemSpec sem;
    Eigen::MatrixXd x;          // static mode
    TemporalDataset temporal;   // temporal mode
    std::string graph_label;
    std::string lag_label;
    Mode mode = Mode::Static;
};

/// Graph from stage kGraphStage, network from kNetworkStage, link functions
/// and noise from the SemSpec seed; all derived from `seed`.
inline SimulatedDataset simulate(const ExperimentConfig& cfg, Index d, const std::string& graph,
                                 const std::string& link, std::uint64_t seed, std::optional<Index> n_override = {}) {
    const Index n = n_override.value_or(cfg.n);
    SimulatedDataset out;
    out.mode = cfg.mode;
    out.graph_label = graph;
    out.lag_label = cfg.lag_graph;

    Rng graph_rng = derive_rng(seed, kGraphStage);
    out.sem.dag = generate_er_dag(d, parse_density(graph) * static_cast<double>(d), graph_rng);
    if (cfg.temporal())
        out.sem.lagged = generate_er_lagged(d, cfg.p, parse_density(cfg.lag_graph) * static_cast<double>(d), graph_rng);
    out.sem.link = LinkSpec::parse(link);
    out.sem.noise_sd.assign(static_cast<std::size_t>(d), cfg.noise());
    out.sem.seed = seed;

    if (cfg.temporal()) {
        Rng net_rng = derive_rng(seed, kNetworkStage);
        const Network net = generate_network(n, cfg.p_edge, net_rng);
        out.temporal = simulate_temporal(out.sem, {net}, n, cfg.T, cfg.burn_in);
    } else {
        out.x = simulate_static(out.sem, n);
    }
    return out;
}

inline void write_dataset(const fs::path& dir, const SimulatedDataset& sim, const ExperimentConfig& cfg) {
    fs::create_directories(dir);
    KeyValues manifest;
    const bool temporal = sim.mode == Mode::Temporal;
    const Index d = sim.sem.nodes();
    manifest.set("mode", temporal ? "temporal" : "static");
    manifest.set("d", std::to_string(d));
    manifest.set("n", std::to_string(temporal ? sim.temporal.units() : sim.x.rows()));
    manifest.set("T", std::to_string(temporal ? sim.temporal.length() : 1));
    manifest.set("p", std::to_string(sim.sem.lags()));
    manifest.set("link", sim.sem.link.name());
    manifest.set("seed", std::to_string(sim.sem.seed));
    manifest.set("graph", sim.graph_label);
    if (temporal) manifest.set("lag_graph", sim.lag_label);
    manifest.set("noise_sd", io::format_real(sim.sem.noise_sd.empty() ? 0.0 : sim.sem.noise_sd.front()));
    if (temporal) {
        manifest.set("p_edge", io::format_real(cfg.p_edge));
        manifest.set("burn_in", std::to_string(cfg.burn_in));
        std::string counts;
        for (const auto& s : sim.temporal.snapshots) {
            if (!counts.empty()) counts += ',';
            counts += std::to_string(s.network.edge_count());
        }
        manifest.set("network_edges", counts);
    }
    manifest.set("true_edges_w", std::to_string(sim.sem.dag.edge_count()));
    if (temporal) manifest.set("true_edges_p", std::to_string(sim.sem.lagged->edge_count()));

    io::write_dag(dir / "W.csv", sim.sem.dag);
    if (temporal) {
        for (Index k = 1; k <= sim.sem.lags(); ++k)
            io::write_lag(dir / ("P_" + std::to_string(k) + ".csv"), sim.sem.lagged->matrix(k));
        for (Index t = 0; t < sim.temporal.length(); ++t) {
            const auto& s = sim.temporal.snapshots[static_cast<std::size_t>(t)];
            io::write_matrix(dir / ("X_" + std::to_string(t + 1) + ".csv"), s.x);
            io::write_text(dir / ("A_" + std::to_string(t + 1) + ".txt"), io::to_edge_list(s.network));
        }
    } else {
        io::write_matrix(dir / "X.csv", sim.x);
    }
    io::write_text(dir / "manifest.txt", manifest.to_string());
}

/// A dataset directory read back from disk.
struct LoadedDataset {
    KeyValues manifest;
    Mode mode = Mode::Static;
    Index d = 0;
    Index p = 0;
    Eigen::MatrixXd x;
    TemporalDataset temporal;
    std::optional<Dag> truth_w;
    std::optional<LaggedGraphs> truth_p;

    /// Generating SEM rebuilt from ground-truth files and manifest.
    [[nodiscard]] SemSpec sem() const {
        if (!truth_w) throw ArgumentError("dataset has no ground-truth W.csv");
        SemSpec sem;
        sem.dag = *truth_w;
        if (mode == Mode::Temporal) {
            if (!truth_p) throw ArgumentError("dataset has no ground-truth P_k.csv");
            sem.lagged = truth_p;
        }
        sem.link = LinkSpec::parse(manifest.require("link"));
        sem.noise_sd.assign(static_cast<std::size_t>(d), manifest.number<double>("noise_sd", 1.0));
        sem.seed = static_cast<std::uint64_t>(manifest.number<long long>("seed", 0));
        return sem;
    }
};

inline LoadedDataset read_dataset(const fs::path& dir) {
    LoadedDataset out;
    if (!fs::exists(dir / "manifest.txt")) throw io::IoError("no manifest.txt in " + dir.string());
    out.manifest = KeyValues::load(dir / "manifest.txt");
    const auto mode = out.manifest.require("mode");
    out.mode = mode == "temporal" ? Mode::Temporal : Mode::Static;
    out.d = out.manifest.number<Index>("d", 0);
    out.p = out.manifest.number<Index>("p", 0);
    const Index n = out.manifest.number<Index>("n", 0);

    if (out.mode == Mode::Static) {
        out.x = io::read_matrix(dir / "X.csv");
        if (out.x.cols() != out.d || out.x.rows() != n) throw ArgumentError("X.csv shape does not match manifest");
    } else {
        const Index T = out.manifest.number<Index>("T", 0);
        for (Index t = 1; t <= T; ++t) {
            Snapshot s;
            s.x = io::read_matrix(dir / ("X_" + std::to_string(t) + ".csv"));
            if (s.x.cols() != out.d || s.x.rows() != n)
                throw ArgumentError("X_" + std::to_string(t) + ".csv shape does not match manifest");
            s.network = io::read_edge_list(dir / ("A_" + std::to_string(t) + ".txt"), n);
            out.temporal.snapshots.push_back(std::move(s));
        }
    }
    if (fs::exists(dir / "W.csv")) out.truth_w = io::read_dag(dir / "W.csv");
    if (out.mode == Mode::Temporal && out.p >= 1 && fs::exists(dir / "P_1.csv")) {
        std::vector<BinaryMatrix> mats;
        for (Index k = 1; k <= out.p; ++k) mats.push_back(io::read_lag(dir / ("P_" + std::to_string(k) + ".csv")));
        out.truth_p = LaggedGraphs(std::move(mats));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commands

inline fs::path cmd_simulate(const ExperimentConfig& cfg, std::optional<std::uint64_t> seed = {},
                             std::optional<fs::path> out = {}) {
    const auto s = seed.value_or(cfg.seeds.front());
    const fs::path dir = out.value_or(cfg.output_dir);
    const auto sim = simulate(cfg, cfg.d.front(), cfg.graph.front(), cfg.link.front(), s);
    write_dataset(dir, sim, cfg);
    return dir / "manifest.txt";
}

struct DiscoverOptions {
    std::optional<fs::path> out;
    std::optional<double> tau;
    std::optional<double> alpha;
    std::optional<double> eta;
    std::optional<double> margin;
    std::optional<SelectionRule> rule;
    bool oracle_scores = false;
    std::optional<int> threads;

    void apply(DiscoveryConfig& dc) const {
        if (tau) dc.tau_w = dc.tau_p = *tau;
        if (alpha) dc.prune.alpha = *alpha;
        if (eta) dc.kernel.eta = *eta;
        if (margin) dc.parent_margin = *margin;
        if (rule) dc.prune.rule = *rule;
        if (threads) dc.threads = *threads;
        dc.validate();
    }
};

struct DiscoveryOutput {
    Dag w;
    std::optional<LaggedGraphs> p;
    StageTimings timings;
};

inline void check_columns(const Eigen::MatrixXd& x, const std::string& where) {
    const auto bad = constant_columns(x);
    if (bad.empty()) return;
    std::string msg = where + ": constant feature column(s)";
    for (Index c : bad) msg += " " + std::to_string(c);
    throw DegenerateDataError(msg);
}

/// Runs the static or temporal pipeline on a loaded dataset.
inline DiscoveryOutput run_discovery(const LoadedDataset& data, const DiscoveryConfig& dc, bool oracle) {
    DiscoveryOutput out;
    std::optional<SemSpec> sem;
    if (oracle) sem = data.sem();
    if (data.mode == Mode::Static) {
        check_columns(data.x, "X.csv");
        StaticResult r;
        if (oracle) {
            OracleProvider provider(data.x, *sem);
            r = pick_s_with(provider, data.x, dc);
        } else {
            r = pick_s(data.x, dc);
        }
        out.w = r.dag;
        out.timings = r.timings;
    } else {
        for (Index t = 0; t < data.temporal.length(); ++t)
            check_columns(data.temporal.snapshots[static_cast<std::size_t>(t)].x, "X_" + std::to_string(t + 1) + ".csv");
        DynamicalResult r;
        if (oracle) {
            r = dynamical_dag_with(data.temporal, data.p, dc,
                                   [&](const Eigen::MatrixXd& s, Index) { return OracleProvider(s, *sem); });
        } else {
            r = dynamical_dag(data.temporal, data.p, dc);
        }
        out.w = r.w;
        out.p = r.p;
        out.timings = r.timings;
    }
    return out;
}

inline nlohmann::json metrics_json(const MetricsReport& m) {
    return {{"shd", m.shd}, {"fdr", m.fdr}, {"tpr", m.tpr}, {"n_pred", m.n_pred}, {"n_true", m.n_true}};
}

inline nlohmann::json timings_json(const StageTimings& t) {
    return {{"estimation", t.estimation}, {"ordering", t.ordering}, {"pruning", t.pruning}, {"total", t.total()}};
}

inline nlohmann::json discovery_json(const DiscoveryConfig& dc) {
    nlohmann::json j;
    j["tau_w"] = dc.tau_w;
    j["tau_p"] = dc.tau_p;
    j["alpha"] = dc.prune.alpha;
    j["n_basis"] = dc.prune.n_basis;
    j["prune_rule"] = rule_name(dc.prune.rule);
    j["eta"] = dc.kernel.eta;
    j["bandwidth"] = dc.kernel.fixed_bandwidth ? nlohmann::json(*dc.kernel.fixed_bandwidth) : nlohmann::json("median");
    j["margin"] = dc.parent_margin;
    return j;
}

struct DiscoverOutcome {
    fs::path out_dir;
    DiscoveryOutput result;
    std::optional<MetricsReport> metrics_w;
    std::optional<MetricsReport> metrics_p;
};

/// Writes W_hat.csv (+ P_hat_k.csv), run_record.json (deterministic) and
/// timings.json (wall clock, the only non-reproducible output).
inline DiscoverOutcome cmd_discover(const fs::path& dataset_dir, const DiscoverOptions& opts) {
    const LoadedDataset data = read_dataset(dataset_dir);
    DiscoveryConfig dc;
    opts.apply(dc);

    DiscoverOutcome outcome;
    outcome.out_dir = opts.out.value_or(dataset_dir / "discovery");
    outcome.result = run_discovery(data, dc, opts.oracle_scores);
    const auto& res = outcome.result;

    io::write_dag(outcome.out_dir / "W_hat.csv", res.w);
    if (res.p)
        for (Index k = 1; k <= res.p->lags(); ++k)
            io::write_lag(outcome.out_dir / ("P_hat_" + std::to_string(k) + ".csv"), res.p->matrix(k));

    nlohmann::json record;
    record["dataset"] = nlohmann::json::object();
    for (const auto& key : data.manifest.keys()) record["dataset"][key] = data.manifest.get(key, "");
    record["discovery"] = discovery_json(dc);
    record["oracle_scores"] = opts.oracle_scores;
    record["edges_w"] = res.w.edge_count();
    if (res.p) record["edges_p"] = res.p->edge_count();
    if (data.truth_w) {
        outcome.metrics_w = evaluate(res.w, *data.truth_w);
        record["metrics"]["W"] = metrics_json(*outcome.metrics_w);
    }
    if (res.p && data.truth_p) {
        outcome.metrics_p = metrics_lagged(*res.p, *data.truth_p);
        record["metrics"]["P"] = metrics_json(*outcome.metrics_p);
    }
    io::write_text(outcome.out_dir / "run_record.json", record.dump(2) + "\n");
    io::write_text(outcome.out_dir / "timings.json", timings_json(res.timings).dump(2) + "\n");
    return outcome;
}

struct NamedMetrics {
    std::string name;
    MetricsReport report;
};

/// Compares W_hat.csv / P_hat_k.csv in pred_dir against W.csv / P_k.csv in
/// truth_dir and writes metrics.csv to out_dir (default pred_dir).
inline std::vector<NamedMetrics> cmd_evaluate(const fs::path& pred_dir, const fs::path& truth_dir,
                                              std::optional<fs::path> out_dir = {}) {
    std::vector<NamedMetrics> out;
    const BinaryMatrix pred_w = io::read_binary(pred_dir / "W_hat.csv");
    const BinaryMatrix truth_w = io::read_binary(truth_dir / "W.csv");
    detail::require(pred_w.rows() == truth_w.rows() && pred_w.cols() == truth_w.cols(),
                    "evaluate: W_hat.csv and W.csv shapes differ");
    out.push_back({"W", evaluate(Dag(pred_w), Dag(truth_w))});

    for (Index k = 1; fs::exists(truth_dir / ("P_" + std::to_string(k) + ".csv")); ++k) {
        const auto pred_path = pred_dir / ("P_hat_" + std::to_string(k) + ".csv");
        if (!fs::exists(pred_path)) throw ArgumentError("evaluate: missing " + pred_path.string());
        const BinaryMatrix pk = io::read_lag(pred_path);
        const BinaryMatrix tk = io::read_lag(truth_dir / ("P_" + std::to_string(k) + ".csv"));
        detail::require(pk.rows() == tk.rows() && pk.cols() == tk.cols(), "evaluate: P_k shapes differ");
        out.push_back({"P_" + std::to_string(k), metrics_lagged(LaggedGraphs({pk}), LaggedGraphs({tk}))});
    }

    std::string csv = "graph,shd,fdr,tpr,n_pred,n_true\n";
    for (const auto& m : out)
        csv += m.name + "," + std::to_string(m.report.shd) + "," + io::format_real(m.report.fdr) + "," +
               io::format_real(m.report.tpr) + "," + std::to_string(m.report.n_pred) + "," +
               std::to_string(m.report.n_true) + "\n";
    io::write_text(out_dir.value_or(pred_dir) / "metrics.csv", csv);
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
};

/// Mean and standard error (sample sd / sqrt(k)); stderr is 0 for k < 2.
inline MeanStderr mean_stderr(const std::vector<double>& v) {
    MeanStderr out;
    if (v.empty()) return out;
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    if (v.size() < 2) return out;
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Least-squares slope of log(y) on log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    detail::require(x.size() == y.size() && x.size() >= 2, "loglog_slope: need two or more points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

struct BenchmarkRow {
    Index d = 0;
    std::string density;
    std::string link;
    std::uint64_t seed = 0;
    std::string status = "ok";
    MetricsReport w;
    std::optional<MetricsReport> p;
    StageTimings timings;
};

struct CellSummary {
    Index d = 0;
    std::string density;
    std::string link;
    std::vector<const BenchmarkRow*> rows;
    std::optional<double> oracle_shd_median;
};

struct BenchmarkOutcome {
    std::vector<BenchmarkRow> rows;
    std::vector<CellSummary> cells;
    std::optional<double> slope_n;
    std::optional<double> slope_d;
    fs::path out_dir;
};

inline DiscoveryOutput discover_in_memory(const SimulatedDataset& sim, const DiscoveryConfig& dc, bool oracle) {
    LoadedDataset data;
    data.mode = sim.mode;
    data.d = sim.sem.nodes();
    data.p = sim.sem.lags();
    data.x = sim.x;
    data.temporal = sim.temporal;
    data.truth_w = sim.sem.dag;
    data.truth_p = sim.sem.lagged;
    if (!oracle) return run_discovery(data, dc, false);

    DiscoveryOutput out;
    if (sim.mode == Mode::Static) {
        OracleProvider provider(sim.x, sim.sem);
        auto r = pick_s_with(provider, sim.x, dc);
        out.w = r.dag;
        out.timings = r.timings;
    } else {
        auto r = dynamical_dag_with(sim.temporal, sim.sem.lags(), dc,
                                    [&](const Eigen::MatrixXd& s, Index) { return OracleProvider(s, sim.sem); });
        out.w = r.w;
        out.p = r.p;
        out.timings = r.timings;
    }
    return out;
}

/// Timed static discovery (Stein scores) on a fresh sin-link dataset.
inline double time_static_run(const ExperimentConfig& cfg, Index d, Index n, std::uint64_t seed) {
    ExperimentConfig c = cfg;
    c.mode = Mode::Static;
    const auto sim = simulate(c, d, cfg.graph.front(), "sin", seed, n);
    const auto start = std::chrono::steady_clock::now();
    (void)pick_s(sim.x, cfg.discovery);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Sweep over d x density x link x seed: simulate, discover, evaluate.
/// Deterministic outputs: results.csv, summary.csv. Wall clock outputs:
/// timings.csv, runtime_n.csv, runtime_d.csv, complexity.csv.
inline BenchmarkOutcome cmd_benchmark(const ExperimentConfig& cfg, std::optional<fs::path> out = {}) {
    BenchmarkOutcome outcome;
    outcome.out_dir = out.value_or(cfg.output_dir);
    fs::create_directories(outcome.out_dir);
    const bool temporal = cfg.temporal();

    for (Index d : cfg.d)
        for (const auto& density : cfg.graph)
            for (const auto& link : cfg.link)
                for (auto seed : cfg.seeds) {
                    BenchmarkRow row{d, density, link, seed};
                    try {
                        const auto sim = simulate(cfg, d, density, link, seed);
                        const auto res = discover_in_memory(sim, cfg.discovery, false);
                        row.w = evaluate(res.w, sim.sem.dag);
                        if (temporal) row.p = metrics_lagged(*res.p, *sim.sem.lagged);
                        row.timings = res.timings;
                    } catch (const std::exception& e) {
                        row.status = std::string("error: ") + e.what();
                        std::replace(row.status.begin(), row.status.end(), ',', ';');
                        std::replace(row.status.begin(), row.status.end(), '\n', ' ');
                    }
                    outcome.rows.push_back(std::move(row));
                }

    for (const auto& row : outcome.rows) {
        auto it = std::find_if(outcome.cells.begin(), outcome.cells.end(), [&](const CellSummary& c) {
            return c.d == row.d && c.density == row.density && c.link == row.link;
        });
        if (it == outcome.cells.end()) {
            outcome.cells.push_back({row.d, row.density, row.link, {}, {}});
            it = std::prev(outcome.cells.end());
        }
        if (row.status == "ok") it->rows.push_back(&row);
    }

    // Oracle calibration: exact scores on the sin-link SEM with the same graph
    // and seeds (GP links have no closed-form score).
    if (cfg.oracle_calibration) {
        for (auto& cell : outcome.cells) {
            std::vector<double> shds;
            for (auto seed : cfg.seeds) {
                try {
                    const auto sim = simulate(cfg, cell.d, cell.density, "sin", seed);
                    const auto res = discover_in_memory(sim, cfg.discovery, true);
                    shds.push_back(static_cast<double>(shd(res.w, sim.sem.dag)));
                } catch (const std::exception&) {
                }
            }
            if (!shds.empty()) cell.oracle_shd_median = median(shds);
        }
    }

    std::string results = "d,density,link,seed,shd,fdr,tpr,n_pred,n_true";
    if (temporal) results += ",shd_p,fdr_p,tpr_p,n_pred_p,n_true_p";
    results += ",status\n";
    std::string timings = "d,density,link,seed,seconds,estimation,ordering,pruning\n";
    for (const auto& r : outcome.rows) {
        results += std::to_string(r.d) + "," + r.density + "," + r.link + "," + std::to_string(r.seed) + "," +
                   std::to_string(r.w.shd) + "," + io::format_real(r.w.fdr) + "," + io::format_real(r.w.tpr) + "," +
                   std::to_string(r.w.n_pred) + "," + std::to_string(r.w.n_true);
        if (temporal) {
            const MetricsReport p = r.p.value_or(MetricsReport{});
            results += "," + std::to_string(p.shd) + "," + io::format_real(p.fdr) + "," + io::format_real(p.tpr) +
                       "," + std::to_string(p.n_pred) + "," + std::to_string(p.n_true);
        }
        results += "," + r.status + "\n";
        timings += std::to_string(r.d) + "," + r.density + "," + r.link + "," + std::to_string(r.seed) + "," +
                   io::format_real(r.timings.total()) + "," + io::format_real(r.timings.estimation) + "," +
                   io::format_real(r.timings.ordering) + "," + io::format_real(r.timings.pruning) + "\n";
    }
    io::write_text(outcome.out_dir / "results.csv", results);
    io::write_text(outcome.out_dir / "timings.csv", timings);

    std::string summary = "d,density,link,runs,shd_mean,shd_se,shd_median,fdr_mean,fdr_se,tpr_mean,tpr_se";
    if (temporal) summary += ",shd_p_mean,shd_p_se,fdr_p_mean,fdr_p_se,tpr_p_mean,tpr_p_se";
    summary += ",oracle_shd_median,shd_target\n";
    for (const auto& c : outcome.cells) {
        std::vector<double> shd_v, fdr_v, tpr_v, shd_p, fdr_p, tpr_p;
        for (const auto* r : c.rows) {
            shd_v.push_back(static_cast<double>(r->w.shd));
            fdr_v.push_back(r->w.fdr);
            tpr_v.push_back(r->w.tpr);
            if (r->p) {
                shd_p.push_back(static_cast<double>(r->p->shd));
                fdr_p.push_back(r->p->fdr);
                tpr_p.push_back(r->p->tpr);
            }
        }
        auto ms = [](const std::vector<double>& v) {
            const auto s = mean_stderr(v);
            return io::format_real(s.mean) + "," + io::format_real(s.stderr_);
        };
        summary += std::to_string(c.d) + "," + c.density + "," + c.link + "," + std::to_string(c.rows.size()) + "," +
                   ms(shd_v) + "," + io::format_real(median(shd_v)) + "," + ms(fdr_v) + "," + ms(tpr_v);
        if (temporal) summary += "," + ms(shd_p) + "," + ms(fdr_p) + "," + ms(tpr_p);
        if (c.oracle_shd_median)
            summary += "," + io::format_real(*c.oracle_shd_median) + "," + io::format_real(*c.oracle_shd_median + 3.0);
        else
            summary += ",,";
        summary += "\n";
    }
    io::write_text(outcome.out_dir / "summary.csv", summary);

    auto sweep = [&](const std::vector<Index>& values, bool over_n, const std::string& file) -> std::optional<double> {
        if (values.empty()) return std::nullopt;
        std::string csv = over_n ? "n,rep,seconds\n" : "d,rep,seconds\n";
        std::vector<double> xs, medians;
        for (Index v : values) {
            std::vector<double> secs;
            for (Index rep = 0; rep < cfg.sweep_reps; ++rep) {
                const Index d = over_n ? cfg.d.front() : v;
                const Index n = over_n ? v : cfg.n;
                secs.push_back(time_static_run(cfg, d, n, cfg.seeds.front() + static_cast<std::uint64_t>(rep)));
                csv += std::to_string(v) + "," + std::to_string(rep) + "," + io::format_real(secs.back()) + "\n";
            }
            xs.push_back(static_cast<double>(v));
            medians.push_back(median(secs));
        }
        io::write_text(outcome.out_dir / file, csv);
        return values.size() >= 2 ? std::optional<double>(loglog_slope(xs, medians)) : std::nullopt;
    };
    outcome.slope_n = sweep(cfg.n_sweep, true, "runtime_n.csv");
    outcome.slope_d = sweep(cfg.d_sweep, false, "runtime_d.csv");
    if (outcome.slope_n || outcome.slope_d) {
        std::string csv = "sweep,loglog_slope\n";
        if (outcome.slope_n) csv += "n," + io::format_real(*outcome.slope_n) + "\n";
        if (outcome.slope_d) csv += "d," + io::format_real(*outcome.slope_d) + "\n";
        io::write_text(outcome.out_dir / "complexity.csv", csv);
    }
    return outcome;
}

}  // namespace pick::experiment
