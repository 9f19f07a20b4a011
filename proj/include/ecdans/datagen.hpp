#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ecdans/citest.hpp"
#include "ecdans/model.hpp"

namespace ecdans {

enum class ChangeKind { MeanDrift, CoefDrift, NoiseScaleDrift };
enum class ChangeShape { Sinusoid, PiecewiseConstant };

/// A time-varying causal module on one variable.
struct ChangeSpec {
    int target = 0;
    ChangeKind kind = ChangeKind::MeanDrift;
    ChangeShape shape = ChangeShape::Sinusoid;
    /// Sinusoid: number of periods over the series.
    double periods = 1.0;
    /// PiecewiseConstant: number of regimes.
    int n_regimes = 2;
    /// Noise-sigma units for MeanDrift / NoiseScaleDrift, absolute for CoefDrift.
    double amplitude = 1.0;

    /// Drift profile in [-1, 1] at kept time index t of a length-T series.
    [[nodiscard]] double profile(int t, int T) const {
        const double u = static_cast<double>(std::max(t, 0)) / static_cast<double>(T);
        if (shape == ChangeShape::Sinusoid) return std::sin(2.0 * std::numbers::pi * periods * u);
        const int regime = std::min(static_cast<int>(u * n_regimes), n_regimes - 1);
        return -1.0 + 2.0 * regime / static_cast<double>(n_regimes - 1);
    }
};

struct ScmSpec {
    int m = 4;
    int tau_max = 3;
    double p_lagged = 0.05;
    double p_contemp = 0.15;
    std::pair<double, double> coef_range{0.4, 0.8};
    std::pair<double, double> autocorr_range{0.2, 0.5};
    double noise_sigma = 1.0;
    std::vector<ChangeSpec> changing;
    std::uint64_t seed = 0;
    int T = 1000;
    int burn_in = 200;

    void validate() const {
        if (m < 2) throw ValidationError("m must be >= 2");
        if (tau_max < 1) throw ValidationError("tau_max must be >= 1");
        if (T < 2) throw ValidationError("T must be >= 2");
        if (burn_in < 0) throw ValidationError("burn_in must be >= 0");
        auto prob = [](double p, const char* what) {
            if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(what) + " must lie in [0, 1]");
        };
        prob(p_lagged, "p_lagged");
        prob(p_contemp, "p_contemp");
        if (!(coef_range.first > 0.0 && coef_range.first <= coef_range.second && coef_range.second < 1.0))
            throw ValidationError("coef_range needs 0 < low <= high < 1");
        if (!(autocorr_range.first >= 0.0 && autocorr_range.first <= autocorr_range.second &&
              autocorr_range.second < 1.0))
            throw ValidationError("autocorr_range needs 0 <= low <= high < 1");
        if (!(noise_sigma > 0.0)) throw ValidationError("noise_sigma must be positive");
        for (const auto& c : changing) {
            if (c.target < 0 || c.target >= m)
                throw ValidationError("change target " + std::to_string(c.target) + " out of range");
            if (!(c.amplitude > 0.0)) throw ValidationError("change amplitude must be positive");
            if (c.shape == ChangeShape::Sinusoid && !(c.periods > 0.0))
                throw ValidationError("sinusoid periods must be positive");
            if (c.shape == ChangeShape::PiecewiseConstant && c.n_regimes < 2)
                throw ValidationError("piecewise drift needs at least 2 regimes");
            if (c.kind == ChangeKind::CoefDrift &&
                !(c.amplitude + std::max(coef_range.second, autocorr_range.second) < 1.0))
                throw ValidationError("coefficient drift would leave (-1, 1)");
        }
    }
};

/// Incoming (parent, coefficient) pairs of every X_t^j.
struct ScmParameters {
    std::vector<std::vector<std::pair<NodeRef, double>>> parents;
};

/// Ground-truth window graph: each variable's own lag-1 edge, other lagged
/// edges with p_lagged, an acyclic contemporaneous part with p_contemp along
/// a random order, and C -> target for every change.
inline WindowGraph random_window_graph(const ScmSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(derive_seed(spec.seed, {1}));
    std::bernoulli_distribution lagged(spec.p_lagged);
    std::bernoulli_distribution contemp(spec.p_contemp);

    WindowGraph g(spec.m, spec.tau_max);
    for (int j = 0; j < spec.m; ++j)
        for (int i = 0; i < spec.m; ++i)
            for (int lag = 1; lag <= spec.tau_max; ++lag)
                if ((i == j && lag == 1) || lagged(rng)) g.add_directed(NodeRef::variable(i, lag), NodeRef::variable(j));

    std::vector<int> order(static_cast<std::size_t>(spec.m));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t u = 0; u < order.size(); ++u)
        for (std::size_t v = u + 1; v < order.size(); ++v)
            if (contemp(rng)) g.add_directed(NodeRef::variable(order[u]), NodeRef::variable(order[v]));

    for (const auto& c : spec.changing) g.add_directed(NodeRef::time(), NodeRef::variable(c.target));
    return g;
}

/// Contemporaneous topological order (Kahn, lowest index first).
inline std::vector<int> contemporaneous_order(const WindowGraph& g) {
    const int m = g.m();
    std::vector<int> indegree(static_cast<std::size_t>(m), 0);
    std::vector<std::vector<int>> children(static_cast<std::size_t>(m));
    for (const auto& e : g.edges()) {
        if (classify({e.a, e.b}) != EdgeClass::Contemporaneous) continue;
        if (!e.directed()) throw ValidationError("ground-truth graph has an undirected contemporaneous edge");
        const int from = e.orientation == Orientation::AtoB ? e.a.var : e.b.var;
        const int to = e.orientation == Orientation::AtoB ? e.b.var : e.a.var;
        children[static_cast<std::size_t>(from)].push_back(to);
        ++indegree[static_cast<std::size_t>(to)];
    }
    std::vector<int> order;
    std::vector<bool> done(static_cast<std::size_t>(m), false);
    while (static_cast<int>(order.size()) < m) {
        int next = -1;
        for (int v = 0; v < m && next < 0; ++v)
            if (!done[static_cast<std::size_t>(v)] && indegree[static_cast<std::size_t>(v)] == 0) next = v;
        if (next < 0) throw ValidationError("contemporaneous part of the graph is cyclic");
        done[static_cast<std::size_t>(next)] = true;
        order.push_back(next);
        for (int c : children[static_cast<std::size_t>(next)]) --indegree[static_cast<std::size_t>(c)];
    }
    return order;
}

/// Parents of every contemporaneous variable in a fully oriented graph (C excluded).
inline std::vector<std::vector<NodeRef>> graph_parents(const WindowGraph& g) {
    std::vector<std::vector<NodeRef>> parents(static_cast<std::size_t>(g.m()));
    for (const auto& e : g.edges()) {
        if (e.a.surrogate) continue;
        if (!e.directed()) throw ValidationError("ground-truth graph must be fully oriented");
        const NodeRef from = e.orientation == Orientation::AtoB ? e.a : e.b;
        const NodeRef to = e.orientation == Orientation::AtoB ? e.b : e.a;
        parents[static_cast<std::size_t>(to.var)].push_back(from);
    }
    return parents;
}

inline ScmParameters sample_parameters(const WindowGraph& g, const ScmSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> coef(spec.coef_range.first, spec.coef_range.second);
    std::uniform_real_distribution<double> autocorr(spec.autocorr_range.first, spec.autocorr_range.second);
    std::bernoulli_distribution negative(0.5);
    ScmParameters p;
    const auto parents = graph_parents(g);
    p.parents.resize(parents.size());
    for (std::size_t j = 0; j < parents.size(); ++j) {
        for (const auto& par : parents[j]) {
            double a = 0.0;
            if (par.var == static_cast<int>(j) && par.lag == 1) {
                a = autocorr(rng);
            } else {
                a = coef(rng);
                if (negative(rng)) a = -a;
            }
            p.parents[j].emplace_back(par, a);
        }
    }
    return p;
}

/// Spectral radius of the reduced-form VAR companion matrix with every
/// coefficient-drift target pushed to `drift_level` (in [-1, 1]).
inline double spectral_radius(const ScmParameters& params, const ScmSpec& spec, double drift_level) {
    const int m = spec.m;
    const int L = spec.tau_max;
    std::vector<Eigen::MatrixXd> A(static_cast<std::size_t>(L) + 1, Eigen::MatrixXd::Zero(m, m));
    for (int j = 0; j < m; ++j) {
        double delta = 0.0;
        for (const auto& c : spec.changing)
            if (c.target == j && c.kind == ChangeKind::CoefDrift) delta += c.amplitude * drift_level;
        for (const auto& [par, a] : params.parents[static_cast<std::size_t>(j)])
            A[static_cast<std::size_t>(par.lag)](j, par.var) += a + delta;
    }
    const Eigen::MatrixXd inv = (Eigen::MatrixXd::Identity(m, m) - A[0]).inverse();
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(m * L, m * L);
    for (int lag = 1; lag <= L; ++lag) companion.block(0, (lag - 1) * m, m, m) = inv * A[static_cast<std::size_t>(lag)];
    if (L > 1) companion.block(m, 0, m * (L - 1), m * (L - 1)).setIdentity();
    return companion.eigenvalues().cwiseAbs().maxCoeff();
}

/// Deterministic simulation given parameters and a (burn_in + T) x m matrix
/// of standard-normal innovations. Returns the kept T x m block, or an empty
/// matrix if any value exceeds 1e6 in magnitude.
inline Eigen::MatrixXd run_process(const WindowGraph& g, const ScmParameters& params, const ScmSpec& spec,
                                   const Eigen::MatrixXd& innovations) {
    const int m = spec.m;
    const int L = spec.tau_max;
    const int steps = spec.burn_in + spec.T;
    if (innovations.rows() != steps || innovations.cols() != m)
        throw DimensionMismatch("innovation matrix must be (burn_in + T) x m");
    const auto order = contemporaneous_order(g);

    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(steps + L, m);
    for (int s = 0; s < steps; ++s) {
        const int row = s + L;
        const int t = s - spec.burn_in;
        for (int j : order) {
            double mean_shift = 0.0, coef_shift = 0.0, scale = 1.0;
            for (const auto& c : spec.changing) {
                if (c.target != j) continue;
                const double level = c.profile(t, spec.T);
                switch (c.kind) {
                    case ChangeKind::MeanDrift: mean_shift += c.amplitude * spec.noise_sigma * level; break;
                    case ChangeKind::CoefDrift: coef_shift += c.amplitude * level; break;
                    case ChangeKind::NoiseScaleDrift: scale *= 1.0 + c.amplitude * 0.5 * (1.0 + level); break;
                }
            }
            double v = mean_shift + spec.noise_sigma * scale * innovations(s, j);
            for (const auto& [par, a] : params.parents[static_cast<std::size_t>(j)])
                v += (a + coef_shift) * X(row - par.lag, par.var);
            if (!std::isfinite(v) || std::abs(v) > 1e6) return {};
            X(row, j) = v;
        }
    }
    return X.bottomRows(spec.T);
}

/// Samples coefficients and noise for `g` and simulates the process. Unstable
/// coefficient draws are resampled a bounded number of times.
inline Dataset simulate(const WindowGraph& g, const ScmSpec& spec) {
    spec.validate();
    if (g.m() != spec.m || g.tau_max() != spec.tau_max)
        throw DimensionMismatch("graph dimensions differ from the SCM spec");
    constexpr int kMaxAttempts = 50;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        std::mt19937_64 rng(derive_seed(spec.seed, {2, static_cast<std::uint64_t>(attempt)}));
        const ScmParameters params = sample_parameters(g, spec, rng);
        bool stable = true;
        for (double level : {-1.0, 0.0, 1.0}) stable = stable && spectral_radius(params, spec, level) < 1.0;
        if (!stable) continue;
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::MatrixXd noise(spec.burn_in + spec.T, spec.m);
        for (Eigen::Index r = 0; r < noise.rows(); ++r)
            for (Eigen::Index c = 0; c < noise.cols(); ++c) noise(r, c) = normal(rng);
        Eigen::MatrixXd X = run_process(g, params, spec, noise);
        if (X.size() == 0) continue;
        return Dataset(std::move(X));
    }
    throw Error("simulation diverged after " + std::to_string(kMaxAttempts) + " coefficient draws");
}

}  // namespace ecdans
