#pragma once

// d-separation oracle over the time-unrolled ground-truth process. Test-only.

#include <queue>
#include <span>
#include <vector>

#include "ecdans/model.hpp"

namespace ecdans::testing {

class DSeparationOracle {
public:
    /// Unrolls `truth` over lags 0..horizon; C is one node feeding every
    /// time slice of each changing variable.
    DSeparationOracle(const WindowGraph& truth, int horizon)
        : m_(truth.m()), horizon_(horizon), n_(truth.m() * (horizon + 1) + 1) {
        parents_.resize(static_cast<std::size_t>(n_));
        children_.resize(static_cast<std::size_t>(n_));
        for (const auto& e : truth.edges()) {
            if (!e.directed()) throw ConsistencyError("oracle needs an oriented truth graph");
            const NodeRef from = e.orientation == Orientation::AtoB ? e.a : e.b;
            const NodeRef to = e.orientation == Orientation::AtoB ? e.b : e.a;
            for (int s = 0; s <= horizon_; ++s) {
                if (from.surrogate) {
                    link(c_id(), id(to.var, s));
                } else if (s + from.lag <= horizon_) {
                    link(id(from.var, s + from.lag), id(to.var, s));
                }
            }
        }
    }

    [[nodiscard]] bool d_separated(NodeRef a, NodeRef b, std::span<const NodeRef> cond) const {
        std::vector<bool> observed(static_cast<std::size_t>(n_), false);
        for (auto c : cond) observed[static_cast<std::size_t>(node_id(c))] = true;
        return !reachable(node_id(a), observed)[static_cast<std::size_t>(node_id(b))];
    }

    /// p = 1 for d-separated pairs, 0 otherwise; effect size 1 for dependent pairs.
    [[nodiscard]] CITestResult test(NodeRef a, NodeRef b, std::span<const NodeRef> cond) const {
        CITestResult r;
        r.independent = d_separated(a, b, cond);
        r.p_value = r.independent ? 1.0 : 0.0;
        r.statistic = r.independent ? 0.0 : 1.0;
        r.effect_size = r.statistic;
        r.cond_set.assign(cond.begin(), cond.end());
        return r;
    }

private:
    [[nodiscard]] int id(int var, int lag) const { return lag * m_ + var; }
    [[nodiscard]] int c_id() const { return n_ - 1; }
    [[nodiscard]] int node_id(NodeRef n) const { return n.surrogate ? c_id() : id(n.var, n.lag); }

    void link(int from, int to) {
        parents_[static_cast<std::size_t>(to)].push_back(from);
        children_[static_cast<std::size_t>(from)].push_back(to);
    }

    // Reachability along active trails (Bayes ball).
    [[nodiscard]] std::vector<bool> reachable(int source, const std::vector<bool>& observed) const {
        const auto N = static_cast<std::size_t>(n_);
        // ancestors of the observed set, for collider activation
        std::vector<bool> anc(N, false);
        std::queue<int> q;
        for (std::size_t v = 0; v < N; ++v)
            if (observed[v]) {
                anc[v] = true;
                q.push(static_cast<int>(v));
            }
        while (!q.empty()) {
            const int v = q.front();
            q.pop();
            for (int p : parents_[static_cast<std::size_t>(v)])
                if (!anc[static_cast<std::size_t>(p)]) {
                    anc[static_cast<std::size_t>(p)] = true;
                    q.push(p);
                }
        }
        // state: (node, arrived from child = up / from parent = down)
        std::vector<bool> seen_up(N, false), seen_down(N, false), reach(N, false);
        std::queue<std::pair<int, bool>> frontier;  // bool: moving up (arrived from a child)
        frontier.push({source, true});
        while (!frontier.empty()) {
            auto [v, up] = frontier.front();
            frontier.pop();
            const auto vi = static_cast<std::size_t>(v);
            if (up ? seen_up[vi] : seen_down[vi]) continue;
            (up ? seen_up : seen_down)[vi] = true;
            if (!observed[vi]) reach[vi] = true;
            if (up && !observed[vi]) {
                for (int p : parents_[vi]) frontier.push({p, true});
                for (int c : children_[vi]) frontier.push({c, false});
            } else if (!up) {
                if (!observed[vi])
                    for (int c : children_[vi]) frontier.push({c, false});
                if (anc[vi])
                    for (int p : parents_[vi]) frontier.push({p, true});
            }
        }
        return reach;
    }

    int m_;
    int horizon_;
    int n_;
    std::vector<std::vector<int>> parents_;
    std::vector<std::vector<int>> children_;
};

}  // namespace ecdans::testing
