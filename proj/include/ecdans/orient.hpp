#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecdans/citest.hpp"
#include "ecdans/model.hpp"

namespace ecdans {

struct OrientConfig {
    /// Contiguous windows used to trace how each causal module changes.
    int n_windows = 10;
    int min_window = 30;
    /// Relative gap between the two direction scores needed to orient.
    double decision_margin = 0.1;
    /// Propagate orientations with Meek rules 1 and 2 afterwards.
    bool meek = false;

    void validate() const {
        if (n_windows < 2) throw ValidationError("n_windows must be >= 2");
        if (min_window < 10) throw ValidationError("min_window must be >= 10");
        if (!(decision_margin >= 0.0)) throw ValidationError("decision_margin must be >= 0");
    }
};

/// A rule declined or failed to orient an edge.
struct Diagnostic {
    NodePair edge;
    std::string rule;
    std::string reason;
};

/// Lagged edges point forward in time.
inline WindowGraph orient_lagged(WindowGraph g) {
    for (const auto& e : g.edges())
        if (classify({e.a, e.b}) == EdgeClass::Lagged) g.orient(e.a, e.b);
    return g;
}

/// C edges point away from C.
inline WindowGraph orient_surrogate(WindowGraph g) {
    for (const auto& e : g.edges())
        if (e.a.surrogate) g.orient(e.a, e.b);
    return g;
}

/// For C -> X_i - X_j with X_j not adjacent to C: a collider X_j -> X_i when
/// X_i is absent from the set that separated C and X_j, otherwise X_i -> X_j.
/// Edges receiving contradictory demands stay undirected.
inline WindowGraph orient_ctriples(WindowGraph g, const SeparationLog& log,
                                   std::vector<Diagnostic>* diagnostics = nullptr) {
    const NodeRef C = NodeRef::time();
    std::map<NodePair, std::set<NodeRef>> demanded_source;
    for (const auto& e : g.edges()) {
        if (e.directed() || classify({e.a, e.b}) != EdgeClass::Contemporaneous) continue;
        for (auto [xi, xj] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
            if (!g.has_edge(C, xi) || g.has_edge(C, xj)) continue;
            const auto* sepset = log.find(C, xj);
            if (!sepset)
                throw ConsistencyError("no separating set recorded for removed edge C - " + to_string(xj));
            const bool xi_separates = std::find(sepset->begin(), sepset->end(), xi) != sepset->end();
            demanded_source[{e.a, e.b}].insert(xi_separates ? xi : xj);
        }
    }
    for (const auto& [pair, sources] : demanded_source) {
        if (sources.size() > 1) {
            if (diagnostics) diagnostics->push_back({pair, "ctriple", "conflicting triple orientations"});
            continue;
        }
        const NodeRef from = *sources.begin();
        g.orient(from, from == pair.first ? pair.second : pair.first);
    }
    return g;
}

namespace detail {

/// Lagged neighbours of X_t^var in the graph.
inline std::vector<NodeRef> lagged_neighbors(const WindowGraph& g, int var) {
    std::vector<NodeRef> out;
    for (auto n : g.neighbors(NodeRef::variable(var)))
        if (n.is_lagged()) out.push_back(n);
    return out;
}

inline Eigen::MatrixXd design(const Dataset& data, const std::vector<NodeRef>& regressors, int tau_max) {
    const int n = effective_length(data.T(), tau_max);
    Eigen::MatrixXd D(n, static_cast<Eigen::Index>(regressors.size()) + 1);
    D.col(0).setOnes();
    for (std::size_t c = 0; c < regressors.size(); ++c)
        D.col(static_cast<Eigen::Index>(c) + 1) = lagged_column(data, regressors[c], tau_max);
    return D;
}

inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& D, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
    qr.setThreshold(1e-10);
    if (qr.rank() < D.cols()) throw DegenerateConditioning("window regression is rank deficient");
    return qr.solve(y);
}

inline double log_variance(const Eigen::VectorXd& r) {
    const double mean = r.mean();
    const double var = (r.array() - mean).square().sum() / static_cast<double>(r.size());
    if (!(var > 0.0)) throw DegenerateConditioning("window residual variance is zero");
    return std::log(var);
}

/// Columns z-scored across windows; constant columns become zero.
inline Eigen::MatrixXd standardize_columns(Eigen::MatrixXd M) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
        const double mean = M.col(c).mean();
        M.col(c).array() -= mean;
        const double sd = std::sqrt(M.col(c).squaredNorm() / static_cast<double>(M.rows()));
        if (sd > 1e-12) M.col(c) /= sd;
        else M.col(c).setZero();
    }
    return M;
}

}  // namespace detail

/// Dependence between the windowed trajectory of the cause's marginal and
/// of the effect's mechanism, for the hypothesis cause -> effect. Smaller
/// means the two modules change more independently.
inline double module_dependence_score(const Dataset& data, const WindowGraph& g, int cause, int effect,
                                      const OrientConfig& cfg) {
    const int tau_max = g.tau_max();
    const int n = effective_length(data.T(), tau_max);
    const int w = n / cfg.n_windows;
    if (w < cfg.min_window)
        throw InsufficientSample("windows of " + std::to_string(w) + " samples are below min_window " +
                                 std::to_string(cfg.min_window));

    const Eigen::VectorXd xc = lagged_column(data, NodeRef::variable(cause), tau_max);
    const Eigen::VectorXd xe = lagged_column(data, NodeRef::variable(effect), tau_max);

    const auto cause_lags = detail::lagged_neighbors(g, cause);
    const Eigen::MatrixXd Dc = detail::design(data, cause_lags, tau_max);
    const Eigen::VectorXd marginal_resid = xc - Dc * detail::least_squares(Dc, xc);

    std::vector<NodeRef> effect_regs{NodeRef::variable(cause)};
    for (auto n : detail::lagged_neighbors(g, effect)) effect_regs.push_back(n);
    const Eigen::MatrixXd De = detail::design(data, effect_regs, tau_max);

    Eigen::MatrixXd marginal(cfg.n_windows, 2);
    Eigen::MatrixXd conditional(cfg.n_windows, De.cols() + 1);
    for (int k = 0; k < cfg.n_windows; ++k) {
        const Eigen::Index start = static_cast<Eigen::Index>(k) * w;
        const Eigen::VectorXd r = marginal_resid.segment(start, w);
        marginal(k, 0) = r.mean();
        marginal(k, 1) = detail::log_variance(r);

        const Eigen::MatrixXd Dw = De.middleRows(start, w);
        const Eigen::VectorXd yw = xe.segment(start, w);
        const Eigen::VectorXd beta = detail::least_squares(Dw, yw);
        conditional.row(k).head(beta.size()) = beta.transpose();
        conditional(k, beta.size()) = detail::log_variance(yw - Dw * beta);
    }
    return hsic_statistic(detail::standardize_columns(marginal), detail::standardize_columns(conditional));
}

/// Orients undirected contemporaneous edges between two changing modules by
/// the direction whose module trajectories are less dependent.
inline WindowGraph orient_by_module_independence(const Dataset& data, WindowGraph g, const OrientConfig& cfg,
                                                 std::vector<Diagnostic>* diagnostics = nullptr) {
    cfg.validate();
    if (data.m() != g.m()) throw DimensionMismatch("dataset and graph disagree on m");
    auto note = [&](const NodePair& p, std::string reason) {
        if (diagnostics) diagnostics->push_back({p, "module_independence", std::move(reason)});
    };
    for (const auto& e : g.edges()) {
        if (e.directed() || classify({e.a, e.b}) != EdgeClass::Contemporaneous) continue;
        if (!g.is_changing(e.a.var) || !g.is_changing(e.b.var)) continue;
        double forward = 0.0, backward = 0.0;
        try {
            forward = module_dependence_score(data, g, e.a.var, e.b.var, cfg);
            backward = module_dependence_score(data, g, e.b.var, e.a.var, cfg);
        } catch (const InsufficientSample& ex) {
            note({e.a, e.b}, ex.what());
            continue;
        } catch (const DegenerateConditioning& ex) {
            note({e.a, e.b}, ex.what());
            continue;
        } catch (const DegenerateKernel& ex) {
            note({e.a, e.b}, ex.what());
            continue;
        }
        const double larger = std::max(forward, backward);
        if (!(larger > 0.0) || std::abs(forward - backward) / larger <= cfg.decision_margin) {
            note({e.a, e.b}, "direction scores within decision margin");
            continue;
        }
        if (forward < backward) g.orient(e.a, e.b);
        else g.orient(e.b, e.a);
    }
    return g;
}

/// Meek rules 1 and 2 over undirected contemporaneous edges, to a fixpoint.
inline WindowGraph propagate_meek(WindowGraph g) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& e : g.edges()) {
            if (e.directed() || classify({e.a, e.b}) != EdgeClass::Contemporaneous) continue;
            for (auto [b, c] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
                bool orient = false;
                for (auto a : g.neighbors(b)) {
                    if (a == c) continue;
                    // R1: a -> b - c, a and c non-adjacent
                    if (g.is_directed(a, b) && !g.has_edge(a, c)) orient = true;
                    // R2: b -> a -> c
                    if (g.is_directed(b, a) && g.has_edge(a, c) && g.is_directed(a, c)) orient = true;
                    if (orient) break;
                }
                if (orient) {
                    g.orient(b, c);
                    changed = true;
                    break;
                }
            }
        }
    }
    return g;
}

/// Full orientation stage on a learned skeleton.
inline WindowGraph orient_graph(const Dataset& data, WindowGraph skeleton, const SeparationLog& log,
                                const OrientConfig& cfg, std::vector<Diagnostic>* diagnostics = nullptr) {
    cfg.validate();
    WindowGraph g = orient_lagged(std::move(skeleton));
    g = orient_surrogate(std::move(g));
    g = orient_ctriples(std::move(g), log, diagnostics);
    g = orient_by_module_independence(data, std::move(g), cfg, diagnostics);
    if (cfg.meek) g = propagate_meek(std::move(g));
    return g;
}

}  // namespace ecdans
