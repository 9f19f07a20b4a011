#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ecdans/benchmark.hpp"
#include "ecdans/datagen.hpp"
#include "ecdans/discover.hpp"
#include "ecdans/io.hpp"
#include "ecdans/metrics.hpp"

namespace ecdans::cli {

enum ExitCode : int { kOk = 0, kInvalid = 1, kRuntimeFailure = 2 };

/// Parses "target:kind:shape:amplitude", e.g. "0:mean:sin:3.0" or "2:noise:pw@3:1.5".
/// kind is mean|coef|noise; shape is sin[@periods] or pw[@regimes].
inline ChangeSpec parse_change(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 4) throw ValidationError("change spec '" + text + "' must be target:kind:shape:amplitude");
    ChangeSpec c;
    try {
        std::size_t used = 0;
        c.target = std::stoi(parts[0], &used);
        if (used != parts[0].size()) throw std::invalid_argument("target");
        c.amplitude = std::stod(parts[3], &used);
        if (used != parts[3].size()) throw std::invalid_argument("amplitude");
    } catch (const std::logic_error&) {
        throw ValidationError("change spec '" + text + "' has a non-numeric target or amplitude");
    }
    if (parts[1] == "mean") c.kind = ChangeKind::MeanDrift;
    else if (parts[1] == "coef") c.kind = ChangeKind::CoefDrift;
    else if (parts[1] == "noise") c.kind = ChangeKind::NoiseScaleDrift;
    else throw ValidationError("change spec '" + text + "': kind must be mean, coef or noise");

    const auto at = parts[2].find('@');
    const std::string shape = parts[2].substr(0, at);
    const std::optional<std::string> arg =
        at == std::string::npos ? std::nullopt : std::optional<std::string>(parts[2].substr(at + 1));
    try {
        if (shape == "sin") {
            c.shape = ChangeShape::Sinusoid;
            if (arg) c.periods = std::stod(*arg);
        } else if (shape == "pw") {
            c.shape = ChangeShape::PiecewiseConstant;
            if (arg) c.n_regimes = std::stoi(*arg);
        } else {
            throw ValidationError("change spec '" + text + "': shape must be sin[@periods] or pw[@regimes]");
        }
    } catch (const std::logic_error&) {
        throw ValidationError("change spec '" + text + "': bad shape argument");
    }
    return c;
}

inline unsigned resolve_threads(std::optional<unsigned> flag) {
    if (flag) return std::max(1u, *flag);
    if (const char* env = std::getenv("ECDANS_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v >= 1) return static_cast<unsigned>(v);
        } catch (const std::logic_error&) {
        }
    }
    return 1;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path + "'");
    f << content;
    if (!f) throw Error("failed writing '" + path + "'");
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "'");
    return f;
}

struct DiscoverOptions {
    std::string input;
    std::string test = "parcorr";
    std::optional<unsigned> threads;
    std::string out, dot, report;
    DiscoverConfig cfg;
};

inline void add_discover_flags(CLI::App& cmd, DiscoverOptions& o) {
    cmd.add_option("--tau-max", o.cfg.skeleton.tau_max, "maximum lag (>= 1)")->capture_default_str();
    cmd.add_option("--alpha", o.cfg.test.alpha, "significance level")->capture_default_str();
    cmd.add_option("--pc1-max-cond", o.cfg.skeleton.pc1_max_cond, "deepest PC1 conditioning set")->capture_default_str();
    cmd.add_option("--mci-px", o.cfg.skeleton.mci_px, "strongest adjacents per endpoint in MCI (default all)");
    cmd.add_option("--test", o.test, "marginal test: parcorr or hsic")
        ->check(CLI::IsMember({"parcorr", "hsic"}))
        ->capture_default_str();
    cmd.add_option("--hsic-permutations", o.cfg.test.hsic_permutations, "HSIC permutation count")->capture_default_str();
    cmd.add_option("--seed", o.cfg.test.rng_seed, "seed for permutation tests")->capture_default_str();
    cmd.add_option("--n-windows", o.cfg.orient.n_windows, "windows for module trajectories")->capture_default_str();
    cmd.add_option("--min-window", o.cfg.orient.min_window, "minimum samples per window")->capture_default_str();
    cmd.add_option("--margin", o.cfg.orient.decision_margin, "relative score gap needed to orient")->capture_default_str();
    cmd.add_flag("--meek,!--no-meek", o.cfg.orient.meek, "propagate orientations with Meek rules 1-2 (off by default)");
    cmd.add_option("--threads", o.threads, "worker threads (falls back to ECDANS_THREADS)");
}

inline void finish_discover_options(DiscoverOptions& o) {
    o.cfg.test.test_kind = o.test == "hsic" ? TestKind::Hsic : TestKind::ParCorr;
    o.cfg.skeleton.threads = resolve_threads(o.threads);
}

inline int run_discover(DiscoverOptions o, std::ostream& out, std::ostream& err) {
    finish_discover_options(o);
    auto in = open_input(o.input);
    const Dataset data = read_csv(in, o.input);
    const DiscoveryResult r = discover(data, o.cfg);
    const std::string json = serialize_graph(r.graph);
    if (o.out.empty()) out << json;
    else write_file(o.out, json);
    if (!o.dot.empty()) {
        std::ostringstream dot;
        write_dot(r.graph, dot);
        write_file(o.dot, dot.str());
    }
    if (!o.report.empty()) write_file(o.report, report_to_json(r).dump(2) + "\n");
    for (const auto& d : r.diagnostics)
        err << "warning: " << d.rule << ": " << to_string(d.edge.first) << " - " << to_string(d.edge.second) << ": "
            << d.reason << '\n';
    return kOk;
}

struct ScmOptions {
    ScmSpec spec;
    std::vector<std::string> changing;
};

inline void add_scm_flags(CLI::App& cmd, ScmOptions& o, bool with_m) {
    if (with_m) cmd.add_option("--m", o.spec.m, "number of variables (>= 2)")->capture_default_str();
    cmd.add_option("--T", o.spec.T, "series length")->capture_default_str();
    cmd.add_option("--tau-max", o.spec.tau_max, "maximum lag")->capture_default_str();
    cmd.add_option("--p-lagged", o.spec.p_lagged, "lagged edge probability")->capture_default_str();
    cmd.add_option("--p-contemp", o.spec.p_contemp, "contemporaneous edge probability")->capture_default_str();
    cmd.add_option("--coef-low", o.spec.coef_range.first, "smallest |coefficient|")->capture_default_str();
    cmd.add_option("--coef-high", o.spec.coef_range.second, "largest |coefficient|")->capture_default_str();
    cmd.add_option("--autocorr-low", o.spec.autocorr_range.first, "smallest lag-1 self coefficient")->capture_default_str();
    cmd.add_option("--autocorr-high", o.spec.autocorr_range.second, "largest lag-1 self coefficient")->capture_default_str();
    cmd.add_option("--noise-sigma", o.spec.noise_sigma, "innovation standard deviation")->capture_default_str();
    cmd.add_option("--burn-in", o.spec.burn_in, "discarded initial steps")->capture_default_str();
    cmd.add_option("--changing", o.changing, "changing module target:kind:shape:amplitude (repeatable)");
}

inline void finish_scm_options(ScmOptions& o) {
    o.spec.changing.clear();
    for (const auto& c : o.changing) o.spec.changing.push_back(parse_change(c));
    o.spec.validate();
}

inline int run_simulate(ScmOptions o, const std::string& prefix, std::ostream& out) {
    finish_scm_options(o);
    const WindowGraph truth = random_window_graph(o.spec);
    const Dataset data = simulate(truth, o.spec);
    std::ostringstream csv;
    write_csv(data, csv);
    write_file(prefix + ".csv", csv.str());
    write_file(prefix + ".truth.json", serialize_graph(truth));
    out << "wrote " << prefix << ".csv and " << prefix << ".truth.json\n";
    return kOk;
}

inline int run_metrics(const std::string& truth_path, const std::string& est_path, bool exclude_c,
                       std::ostream& out) {
    auto tin = open_input(truth_path);
    auto ein = open_input(est_path);
    const WindowGraph truth = parse_graph(tin);
    const WindowGraph est = parse_graph(ein);
    const Confusion conf = confusion(truth, est, exclude_c);
    out << "class,TP,FP,FN,tpr,fdr,shd\n";
    auto row = [&](const std::string& name, const Counts& k, std::size_t d) {
        const auto rate = tpr(k);
        out << name << ',' << k.tp << ',' << k.fp << ',' << k.fn << ',' << (rate ? format_double(*rate) : "undefined")
            << ',' << format_double(fdr(k)) << ',' << d << '\n';
    };
    row("all", conf.overall, shd(truth, est, exclude_c));
    for (auto cls : {EdgeClass::Lagged, EdgeClass::Contemporaneous, EdgeClass::Surrogate}) {
        if (exclude_c && cls == EdgeClass::Surrogate) continue;
        row(to_string(cls), conf.of(cls), shd(truth, est, cls));
    }
    return kOk;
}

struct BenchmarkOptions {
    ScmOptions scm;
    DiscoverOptions discover;
    std::vector<int> ms{4, 6, 8, 10};
    int seeds = 20;
    std::uint64_t base_seed = 0;
    bool exclude_c = false;
    std::string out_dir = "benchmark";
};

inline int run_benchmark_cmd(BenchmarkOptions o, std::ostream& out) {
    finish_scm_options(o.scm);
    finish_discover_options(o.discover);
    BenchmarkConfig cfg;
    cfg.ms = o.ms;
    cfg.seeds = o.seeds;
    cfg.base_seed = o.base_seed;
    cfg.scm = o.scm.spec;
    cfg.discover = o.discover.cfg;
    cfg.discover.skeleton.tau_max = cfg.scm.tau_max;
    cfg.exclude_surrogate = o.exclude_c;
    cfg.threads = o.discover.cfg.skeleton.threads;
    const BenchmarkResult r = run_benchmark(cfg);

    std::filesystem::create_directories(o.out_dir);
    std::ostringstream metrics, by_class, svg;
    write_metrics_csv(r, cfg, metrics);
    write_class_metrics_csv(r, cfg, by_class);
    write_summary_svg(r.aggregates, svg);
    write_file(o.out_dir + "/metrics.csv", metrics.str());
    write_file(o.out_dir + "/metrics_by_class.csv", by_class.str());
    write_file(o.out_dir + "/summary.svg", svg.str());

    std::size_t failed = 0;
    for (const auto& c : r.cells)
        if (c.error) {
            ++failed;
            out << "cell m=" << c.m << " seed=" << c.seed << " failed: " << *c.error << '\n';
        }
    for (const auto& a : r.aggregates)
        out << "m=" << a.m << " tpr=" << format_double(a.tpr.mean) << " fdr=" << format_double(a.fdr.mean)
            << " shd=" << format_double(a.shd.mean) << " runtime_ms=" << format_double(a.runtime_ms.mean) << '\n';
    return failed == r.cells.size() ? kRuntimeFailure : kOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Causal discovery for autocorrelated, non-stationary time series"};
    app.require_subcommand(1);

    DiscoverOptions disc;
    auto* discover_cmd = app.add_subcommand("discover", "learn a window graph from a CSV dataset");
    discover_cmd->add_option("input", disc.input, "input CSV")->required();
    add_discover_flags(*discover_cmd, disc);
    discover_cmd->add_option("--out", disc.out, "graph JSON path (default stdout)");
    discover_cmd->add_option("--dot", disc.dot, "also write a DOT rendering");
    discover_cmd->add_option("--report", disc.report, "write a run report JSON");

    ScmOptions sim;
    std::string sim_prefix = "sim";
    auto* simulate_cmd = app.add_subcommand("simulate", "generate a synthetic dataset and its true graph");
    add_scm_flags(*simulate_cmd, sim, true);
    simulate_cmd->add_option("--seed", sim.spec.seed, "generator seed")->capture_default_str();
    simulate_cmd->add_option("--out", sim_prefix, "output prefix (<prefix>.csv, <prefix>.truth.json)")
        ->capture_default_str();

    BenchmarkOptions bench;
    auto* benchmark_cmd = app.add_subcommand("benchmark", "simulate, discover and score over a grid");
    add_scm_flags(*benchmark_cmd, bench.scm, false);
    benchmark_cmd->add_option("--ms", bench.ms, "variable counts of the grid")->delimiter(',')->capture_default_str();
    benchmark_cmd->add_option("--seeds", bench.seeds, "seeds per grid cell")->capture_default_str();
    benchmark_cmd->add_option("--seed", bench.base_seed, "first seed")->capture_default_str();
    benchmark_cmd->add_option("--alpha", bench.discover.cfg.test.alpha, "significance level")->capture_default_str();
    benchmark_cmd->add_option("--pc1-max-cond", bench.discover.cfg.skeleton.pc1_max_cond, "deepest PC1 set")
        ->capture_default_str();
    benchmark_cmd->add_option("--n-windows", bench.discover.cfg.orient.n_windows, "windows for module trajectories")
        ->capture_default_str();
    benchmark_cmd->add_option("--margin", bench.discover.cfg.orient.decision_margin, "orientation margin")
        ->capture_default_str();
    benchmark_cmd->add_flag("--meek", bench.discover.cfg.orient.meek, "propagate with Meek rules 1-2");
    benchmark_cmd->add_flag("--exclude-c", bench.exclude_c, "ignore C edges in metrics");
    benchmark_cmd->add_option("--threads", bench.discover.threads, "parallel cells (falls back to ECDANS_THREADS)");
    benchmark_cmd->add_option("--out", bench.out_dir, "output directory")->capture_default_str();

    std::string truth_path, est_path;
    bool exclude_c = false;
    auto* metrics_cmd = app.add_subcommand("metrics", "compare an estimated graph with the truth");
    metrics_cmd->add_option("truth", truth_path, "true graph JSON")->required();
    metrics_cmd->add_option("estimate", est_path, "estimated graph JSON")->required();
    metrics_cmd->add_flag("--exclude-c", exclude_c, "ignore C edges");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (*discover_cmd) return run_discover(disc, out, err);
        if (*simulate_cmd) return run_simulate(sim, sim_prefix, out);
        if (*benchmark_cmd) return run_benchmark_cmd(bench, out);
        if (*metrics_cmd) return run_metrics(truth_path, est_path, exclude_c, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeFailure;
    }
    return kInvalid;
}

}  // namespace ecdans::cli
