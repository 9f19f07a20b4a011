#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ecdans/datagen.hpp"
#include "ecdans/discover.hpp"
#include "ecdans/io.hpp"
#include "ecdans/metrics.hpp"
#include "ecdans/parallel.hpp"

namespace ecdans {

struct BenchmarkConfig {
    std::vector<int> ms{4, 6, 8, 10};
    int seeds = 20;
    std::uint64_t base_seed = 0;
    /// Template for every cell; m and seed are overwritten per cell.
    ScmSpec scm;
    DiscoverConfig discover;
    bool exclude_surrogate = false;
    unsigned threads = 1;

    void validate() const {
        if (ms.empty()) throw ValidationError("benchmark needs at least one m");
        if (seeds < 1) throw ValidationError("benchmark needs seeds >= 1");
        for (int m : ms) {
            ScmSpec s = scm;
            s.m = m;
            s.validate();
        }
        discover.validate();
    }
};

struct CellResult {
    std::uint64_t seed = 0;
    int m = 0;
    std::optional<std::string> error;
    WindowGraph truth;
    WindowGraph estimate;
    Confusion confusion;
    std::size_t shd = 0;
    std::array<std::size_t, 3> shd_by_class{};
    double runtime_ms = 0.0;
};

struct Summary {
    std::size_t n = 0;
    double mean = 0.0;
    std::optional<double> sd;
};

inline Summary summarize(const std::vector<double>& xs) {
    Summary s;
    s.n = xs.size();
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() >= 2) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return s;
}

struct Aggregate {
    int m = 0;
    std::size_t cells = 0;
    std::size_t failures = 0;
    Summary tp, fp, fn, tpr, fdr, shd, runtime_ms;
};

struct BenchmarkResult {
    std::vector<CellResult> cells;
    std::vector<Aggregate> aggregates;
};

inline CellResult run_cell(const BenchmarkConfig& cfg, int m, std::uint64_t seed) {
    CellResult cell;
    cell.seed = seed;
    cell.m = m;
    try {
        ScmSpec spec = cfg.scm;
        spec.m = m;
        spec.seed = seed;
        cell.truth = random_window_graph(spec);
        const Dataset data = simulate(cell.truth, spec);
        DiscoverConfig dc = cfg.discover;
        dc.skeleton.threads = 1;
        const auto t0 = std::chrono::steady_clock::now();
        cell.estimate = discover(data, dc).graph;
        cell.runtime_ms = detail::elapsed_ms(t0);
        cell.confusion = confusion(cell.truth, cell.estimate, cfg.exclude_surrogate);
        cell.shd = shd(cell.truth, cell.estimate, cfg.exclude_surrogate);
        for (auto c : {EdgeClass::Lagged, EdgeClass::Contemporaneous, EdgeClass::Surrogate})
            cell.shd_by_class[static_cast<std::size_t>(c)] = shd(cell.truth, cell.estimate, c);
    } catch (const std::exception& e) {
        cell.error = e.what();
    }
    return cell;
}

inline BenchmarkResult run_benchmark(const BenchmarkConfig& cfg) {
    cfg.validate();
    struct Job {
        int m;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (int m : cfg.ms)
        for (int s = 0; s < cfg.seeds; ++s) jobs.push_back({m, cfg.base_seed + static_cast<std::uint64_t>(s)});

    BenchmarkResult out;
    out.cells = parallel_map(jobs.size(), cfg.threads,
                             [&](std::size_t k) { return run_cell(cfg, jobs[k].m, jobs[k].seed); });
    for (int m : cfg.ms) {
        Aggregate a;
        a.m = m;
        std::vector<double> tp, fp, fn, rate, fdrs, shds, times;
        for (const auto& c : out.cells) {
            if (c.m != m) continue;
            ++a.cells;
            if (c.error) {
                ++a.failures;
                continue;
            }
            const Counts& k = c.confusion.overall;
            tp.push_back(static_cast<double>(k.tp));
            fp.push_back(static_cast<double>(k.fp));
            fn.push_back(static_cast<double>(k.fn));
            if (auto r = tpr(k)) rate.push_back(*r);
            fdrs.push_back(fdr(k));
            shds.push_back(static_cast<double>(c.shd));
            times.push_back(c.runtime_ms);
        }
        a.tp = summarize(tp);
        a.fp = summarize(fp);
        a.fn = summarize(fn);
        a.tpr = summarize(rate);
        a.fdr = summarize(fdrs);
        a.shd = summarize(shds);
        a.runtime_ms = summarize(times);
        out.aggregates.push_back(a);
    }
    return out;
}

inline constexpr const char* kMetricsHeader =
    "seed,m,T,tau_max,class,TP,FP,FN,tpr,fdr,shd,runtime_ms,tpr_sd,fdr_sd,shd_sd,runtime_ms_sd";

/// One row per cell (class "all") followed by one "mean" row per m.
inline void write_metrics_csv(const BenchmarkResult& r, const BenchmarkConfig& cfg, std::ostream& out) {
    const std::string dims = std::to_string(cfg.scm.T) + "," + std::to_string(cfg.scm.tau_max);
    out << kMetricsHeader << '\n';
    for (const auto& c : r.cells) {
        out << c.seed << ',' << c.m << ',' << dims << ',';
        if (c.error) {
            out << "error,,,,,,,,,,,\n";
            continue;
        }
        const Counts& k = c.confusion.overall;
        const auto rate = tpr(k);
        out << "all," << k.tp << ',' << k.fp << ',' << k.fn << ',' << (rate ? format_double(*rate) : "") << ','
            << format_double(fdr(k)) << ',' << c.shd << ',' << format_double(c.runtime_ms) << ",,,,\n";
    }
    auto mean = [](const Summary& s) { return s.n ? format_double(s.mean) : std::string{}; };
    auto sd = [](const Summary& s) { return s.sd ? format_double(*s.sd) : std::string{}; };
    for (const auto& a : r.aggregates) {
        out << "mean," << a.m << ',' << dims << ",all," << mean(a.tp) << ',' << mean(a.fp) << ',' << mean(a.fn) << ','
            << mean(a.tpr) << ',' << mean(a.fdr) << ',' << mean(a.shd) << ',' << mean(a.runtime_ms) << ','
            << sd(a.tpr) << ',' << sd(a.fdr) << ',' << sd(a.shd) << ',' << sd(a.runtime_ms) << '\n';
    }
}

/// Per-class breakdown: one row per (cell, edge class).
inline void write_class_metrics_csv(const BenchmarkResult& r, const BenchmarkConfig& cfg, std::ostream& out) {
    out << "seed,m,T,tau_max,class,TP,FP,FN,tpr,fdr,shd,runtime_ms\n";
    for (const auto& c : r.cells) {
        if (c.error) continue;
        for (auto cls : {EdgeClass::Lagged, EdgeClass::Contemporaneous, EdgeClass::Surrogate}) {
            if (cfg.exclude_surrogate && cls == EdgeClass::Surrogate) continue;
            const Counts& k = c.confusion.of(cls);
            const auto rate = tpr(k);
            out << c.seed << ',' << c.m << ',' << cfg.scm.T << ',' << cfg.scm.tau_max << ',' << to_string(cls) << ','
                << k.tp << ',' << k.fp << ',' << k.fn << ',' << (rate ? format_double(*rate) : "") << ','
                << format_double(fdr(k)) << ',' << c.shd_by_class[static_cast<std::size_t>(cls)] << ','
                << format_double(c.runtime_ms) << '\n';
        }
    }
}

/// Four line panels (TPR, FDR, SHD, runtime) against m, with +-1 sd bars.
inline void write_summary_svg(const std::vector<Aggregate>& aggs, std::ostream& out) {
    constexpr double W = 260, H = 200, pad = 40, gap = 20;
    struct Panel {
        const char* title;
        Summary Aggregate::*metric;
    };
    const Panel panels[] = {{"TPR", &Aggregate::tpr}, {"FDR", &Aggregate::fdr},
                            {"SHD", &Aggregate::shd}, {"runtime (ms)", &Aggregate::runtime_ms}};
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 4 * (W + gap) << "\" height=\"" << H + 2 * pad
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    double mmin = 0, mmax = 1;
    if (!aggs.empty()) {
        mmin = aggs.front().m;
        mmax = aggs.back().m;
        for (const auto& a : aggs) {
            mmin = std::min<double>(mmin, a.m);
            mmax = std::max<double>(mmax, a.m);
        }
    }
    if (mmax == mmin) mmax = mmin + 1;
    for (std::size_t p = 0; p < 4; ++p) {
        const double x0 = static_cast<double>(p) * (W + gap) + pad;
        const double w = W - pad;
        double ymax = 0;
        for (const auto& a : aggs) {
            const Summary& s = a.*(panels[p].metric);
            ymax = std::max(ymax, s.mean + s.sd.value_or(0.0));
        }
        if (p < 2) ymax = std::max(ymax, 1.0);
        if (ymax <= 0) ymax = 1;
        auto px = [&](double m) { return x0 + (m - mmin) / (mmax - mmin) * w; };
        auto py = [&](double v) { return pad + H - v / ymax * H; };
        out << "  <g>\n    <text x=\"" << x0 + w / 2 << "\" y=\"" << pad - 15 << "\" text-anchor=\"middle\">"
            << panels[p].title << "</text>\n";
        out << "    <line x1=\"" << x0 << "\" y1=\"" << pad + H << "\" x2=\"" << x0 + w << "\" y2=\"" << pad + H
            << "\" stroke=\"black\"/>\n";
        out << "    <line x1=\"" << x0 << "\" y1=\"" << pad << "\" x2=\"" << x0 << "\" y2=\"" << pad + H
            << "\" stroke=\"black\"/>\n";
        out << "    <text x=\"" << x0 - 4 << "\" y=\"" << pad + 4 << "\" text-anchor=\"end\">" << format_double(ymax)
            << "</text>\n";
        std::string path;
        for (const auto& a : aggs) {
            const Summary& s = a.*(panels[p].metric);
            out << "    <text x=\"" << px(a.m) << "\" y=\"" << pad + H + 14 << "\" text-anchor=\"middle\">m=" << a.m
                << "</text>\n";
            if (s.n == 0) continue;
            path += (path.empty() ? "M" : " L") + format_double(px(a.m)) + " " + format_double(py(s.mean));
            if (s.sd)
                out << "    <line x1=\"" << px(a.m) << "\" y1=\"" << py(s.mean - *s.sd) << "\" x2=\"" << px(a.m)
                    << "\" y2=\"" << py(s.mean + *s.sd) << "\" stroke=\"steelblue\"/>\n";
            out << "    <circle cx=\"" << px(a.m) << "\" cy=\"" << py(s.mean) << "\" r=\"3\" fill=\"steelblue\"/>\n";
        }
        if (!path.empty()) out << "    <path d=\"" << path << "\" fill=\"none\" stroke=\"steelblue\"/>\n";
        out << "  </g>\n";
    }
    out << "</svg>\n";
}

}  // namespace ecdans
