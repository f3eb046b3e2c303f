// pick: simulate datasets, run discovery, evaluate and benchmark.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pick/experiment.hpp"

namespace ex = pick::experiment;

namespace {

struct Flags {
    std::string config;
    std::optional<long long> seed;
    std::optional<double> tau, alpha, eta, margin;
    std::string prune_rule;
    bool oracle = false;
    std::optional<int> threads;
    std::string out;
    std::string dataset;
    std::string pred, truth;
};

void add_discovery_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--tau", f.tau, "frequency threshold for W and P (default 0.4)");
    cmd->add_option("--alpha", f.alpha, "pruning significance level (default 0.001)");
    cmd->add_option("--eta", f.eta, "Stein ridge regularizer (default 0.01)");
    cmd->add_option("--margin", f.margin, "relative variance drop needed to attribute a parent (default 0)");
    cmd->add_option("--prune-rule", f.prune_rule, "f-test | inverse-alpha | paper-alpha");
    cmd->add_option("--threads", f.threads, "worker threads for temporal steps")->check(CLI::PositiveNumber);
}

ex::DiscoverOptions discover_options(const Flags& f) {
    ex::DiscoverOptions o;
    o.tau = f.tau;
    o.alpha = f.alpha;
    o.eta = f.eta;
    o.margin = f.margin;
    if (!f.prune_rule.empty()) o.rule = ex::parse_rule(f.prune_rule);
    o.oracle_scores = f.oracle;
    o.threads = f.threads;
    if (!f.out.empty()) o.out = f.out;
    return o;
}

void print_metrics(const std::string& name, const pick::MetricsReport& m) {
    std::printf("%-4s shd=%lld fdr=%.4f tpr=%.4f n_pred=%lld n_true=%lld\n", name.c_str(),
                static_cast<long long>(m.shd), m.fdr, m.tpr, static_cast<long long>(m.n_pred),
                static_cast<long long>(m.n_true));
}

int run(int argc, char** argv) {
    CLI::App app{"PICK causal discovery on static and networked time-series data"};
    app.require_subcommand(1);
    Flags f;

    auto* sim = app.add_subcommand("simulate", "generate a dataset with ground truth");
    sim->add_option("--config", f.config, "key=value config file")->required();
    sim->add_option("--seed", f.seed, "seed (default: first entry of seeds)");
    sim->add_option("--out", f.out, "dataset directory (default: output_dir)");

    auto* disc = app.add_subcommand("discover", "recover W (and P_k) from a dataset directory");
    disc->add_option("dataset", f.dataset, "dataset directory written by simulate")->required();
    disc->add_option("--out", f.out, "output directory (default: <dataset>/discovery)");
    disc->add_flag("--oracle-scores", f.oracle, "use exact scores from the ground-truth SEM");
    add_discovery_flags(disc, f);

    auto* eval = app.add_subcommand("evaluate", "compare W_hat/P_hat_k against W/P_k");
    eval->add_option("pred", f.pred, "directory with W_hat.csv")->required();
    eval->add_option("truth", f.truth, "directory with W.csv")->required();
    eval->add_option("--out", f.out, "where metrics.csv goes (default: pred)");

    auto* bench = app.add_subcommand("benchmark", "simulate/discover/evaluate sweep");
    bench->add_option("--config", f.config, "key=value config file")->required();
    bench->add_option("--seed", f.seed, "run a single seed instead of the configured list");
    bench->add_option("--out", f.out, "output directory (default: output_dir)");
    add_discovery_flags(bench, f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (f.seed && *f.seed < 0) throw pick::ArgumentError("--seed must be non-negative");

    if (*sim) {
        const auto cfg = ex::ExperimentConfig::load(f.config);
        std::optional<std::uint64_t> seed;
        if (f.seed) seed = static_cast<std::uint64_t>(*f.seed);
        std::optional<ex::fs::path> out;
        if (!f.out.empty()) out = f.out;
        std::cout << ex::cmd_simulate(cfg, seed, out).string() << "\n";
    } else if (*disc) {
        const auto res = ex::cmd_discover(f.dataset, discover_options(f));
        std::cout << (res.out_dir / "W_hat.csv").string() << "\n";
        if (res.metrics_w) print_metrics("W", *res.metrics_w);
        if (res.metrics_p) print_metrics("P", *res.metrics_p);
        const auto& t = res.result.timings;
        std::printf("time estimation=%.3fs ordering=%.3fs pruning=%.3fs\n", t.estimation, t.ordering, t.pruning);
    } else if (*eval) {
        std::optional<ex::fs::path> out;
        if (!f.out.empty()) out = f.out;
        for (const auto& m : ex::cmd_evaluate(f.pred, f.truth, out)) print_metrics(m.name, m.report);
    } else if (*bench) {
        auto cfg = ex::ExperimentConfig::load(f.config);
        discover_options(f).apply(cfg.discovery);
        if (f.seed) cfg.seeds = {static_cast<std::uint64_t>(*f.seed)};
        std::optional<ex::fs::path> out;
        if (!f.out.empty()) out = f.out;
        const auto res = ex::cmd_benchmark(cfg, out);
        std::size_t failed = 0;
        for (const auto& r : res.rows) failed += r.status != "ok";
        std::cout << (res.out_dir / "summary.csv").string() << "\n";
        std::printf("runs=%zu failed=%zu\n", res.rows.size(), failed);
        if (res.slope_n) std::printf("runtime slope vs n: %.3f\n", *res.slope_n);
        if (res.slope_d) std::printf("runtime slope vs d: %.3f\n", *res.slope_d);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const pick::DegenerateDataError& e) {
        std::cerr << "pick: degenerate data: " << e.what() << "\n";
        return 2;
    } catch (const pick::NumericalError& e) {
        std::cerr << "pick: numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "pick: " << e.what() << "\n";
        return 1;
    }
}
