#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ecdans/citest.hpp"
#include "ecdans/model.hpp"
#include "ecdans/parallel.hpp"

namespace ecdans {

struct SkeletonConfig {
    int tau_max = 1;
    /// Deepest conditioning set tried by the PC1 candidate search.
    int pc1_max_cond = 3;
    /// Strongest adjacents taken from each endpoint for MCI conditioning; unset = all.
    std::optional<int> mci_px;
    /// Cap on the nested conditioning set grown when testing X_t^j against C; unset = whole pool.
    std::optional<int> surrogate_max_cond;
    unsigned threads = 1;

    void validate() const {
        if (tau_max < 1) throw ValidationError("tau_max must be >= 1");
        if (pc1_max_cond < 0) throw ValidationError("pc1_max_cond must be >= 0");
        if (mci_px && *mci_px < 0) throw ValidationError("mci_px must be >= 0");
        if (surrogate_max_cond && *surrogate_max_cond < 0) throw ValidationError("surrogate_max_cond must be >= 0");
    }
};

struct PhaseStats {
    std::string phase;
    std::size_t tests = 0;
    double runtime_ms = 0.0;
};

struct CandidateSearch {
    std::vector<RankedNode> survivors;
    SeparationLog log;
    std::size_t tests = 0;
};

struct PrunedAdjacency {
    AdjacencySets adjacency;
    SeparationLog log;
    std::size_t tests = 0;
};

struct GraphUpdate {
    WindowGraph graph;
    SeparationLog log;
    std::size_t tests = 0;
};

namespace detail {

inline std::vector<NodeRef> strongest(const std::vector<RankedNode>& ranked, std::size_t count,
                                      std::optional<NodeRef> skip = std::nullopt) {
    std::vector<NodeRef> out;
    for (const auto& r : ranked) {
        if (out.size() >= count) break;
        if (skip && r.node == *skip) continue;
        out.push_back(r.node);
    }
    return out;
}

inline void append_unique(std::vector<NodeRef>& into, NodeRef n) {
    if (std::find(into.begin(), into.end(), n) == into.end()) into.push_back(n);
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace detail

/// PC1 search for X_t^j over all lagged nodes and the other contemporaneous
/// variables (C is not a candidate). At depth p each candidate is tested
/// given the p strongest other survivors of the previous depth; removals are
/// applied at the end of the depth. A candidate's strength is the minimum
/// effect size it has shown so far.
template <IndependenceTester Tester>
CandidateSearch pc1_search(const Tester& tester, int m, int j, const SkeletonConfig& cfg) {
    cfg.validate();
    if (j < 0 || j >= m) throw ValidationError("pc1_search: variable index out of range");
    const NodeRef target = NodeRef::variable(j);
    const double unseen = std::numeric_limits<double>::infinity();

    CandidateSearch out;
    std::vector<RankedNode>& cands = out.survivors;
    for (int i = 0; i < m; ++i)
        for (int lag = 0; lag <= cfg.tau_max; ++lag)
            if (lag > 0 || i != j) cands.push_back({NodeRef::variable(i, lag), unseen});
    sort_by_strength(cands);

    for (int depth = 0; depth <= cfg.pc1_max_cond; ++depth) {
        if (cands.size() <= static_cast<std::size_t>(depth)) break;
        const std::vector<RankedNode> snapshot = cands;
        std::vector<std::pair<NodeRef, std::vector<NodeRef>>> separated;
        for (auto& cand : cands) {
            const auto cond = detail::strongest(snapshot, static_cast<std::size_t>(depth), cand.node);
            ++out.tests;
            CITestResult r;
            try {
                r = tester.test(target, cand.node, cond);
            } catch (const DegenerateConditioning&) {
                continue;
            }
            cand.effect_size = std::min(cand.effect_size, r.effect_size);
            if (r.independent) separated.emplace_back(cand.node, cond);
        }
        for (auto& [node, cond] : separated) {
            out.log.record(target, node, std::move(cond));
            std::erase_if(cands, [&](const RankedNode& c) { return c.node == node; });
        }
        sort_by_strength(cands);
    }
    return out;
}

/// MCI pruning of the PC1 supersets into adjacency sets. Contemporaneous
/// adjacency is the union over both endpoints' verdicts.
template <IndependenceTester Tester>
PrunedAdjacency mci_prune(const Tester& tester, const std::vector<std::vector<RankedNode>>& supersets,
                          const SkeletonConfig& cfg) {
    cfg.validate();
    const int m = static_cast<int>(supersets.size());
    const std::size_t px = cfg.mci_px ? static_cast<std::size_t>(*cfg.mci_px)
                                      : std::numeric_limits<std::size_t>::max();

    struct PerTarget {
        std::vector<RankedNode> kept;
        std::vector<std::pair<NodeRef, std::vector<NodeRef>>> separated;
        std::size_t tests = 0;
    };

    auto per_target = parallel_map(static_cast<std::size_t>(m), cfg.threads, [&](std::size_t jj) {
        const int j = static_cast<int>(jj);
        const NodeRef target = NodeRef::variable(j);
        PerTarget res;
        for (const auto& cand : supersets[jj]) {
            const NodeRef v = cand.node;
            std::vector<NodeRef> cond;
            for (auto n : detail::strongest(supersets[jj], px, v)) detail::append_unique(cond, n);
            std::size_t taken = 0;
            for (const auto& src : supersets[static_cast<std::size_t>(v.var)]) {
                if (taken >= px) break;
                const NodeRef shifted = src.node.shifted(v.lag);
                if (shifted.lag > cfg.tau_max) continue;
                ++taken;
                if (shifted == target || shifted == v) continue;
                detail::append_unique(cond, shifted);
            }
            ++res.tests;
            try {
                const CITestResult r = tester.test(target, v, cond);
                if (r.independent) {
                    res.separated.emplace_back(v, std::move(cond));
                } else {
                    res.kept.push_back({v, r.effect_size});
                }
            } catch (const DegenerateConditioning&) {
                res.kept.push_back(cand);
            }
        }
        return res;
    });

    PrunedAdjacency out{AdjacencySets(m), {}, 0};
    for (int j = 0; j < m; ++j) {
        auto& res = per_target[static_cast<std::size_t>(j)];
        out.tests += res.tests;
        for (auto& [node, cond] : res.separated) out.log.record(NodeRef::variable(j), node, std::move(cond));
        for (const auto& k : res.kept) {
            if (k.node.lag > 0) out.adjacency.lagged[static_cast<std::size_t>(j)].push_back(k);
            else out.adjacency.contemporaneous[static_cast<std::size_t>(j)].push_back(k);
        }
    }
    // symmetrize contemporaneous adjacency by union
    auto& contemp = out.adjacency.contemporaneous;
    std::vector<std::vector<RankedNode>> additions(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        for (const auto& k : contemp[static_cast<std::size_t>(j)]) {
            const auto& other = contemp[static_cast<std::size_t>(k.node.var)];
            const bool mirrored = std::any_of(other.begin(), other.end(),
                                              [&](const RankedNode& r) { return r.node.var == j; });
            if (!mirrored) additions[static_cast<std::size_t>(k.node.var)].push_back({NodeRef::variable(j), k.effect_size});
        }
    }
    for (int j = 0; j < m; ++j) {
        auto& list = contemp[static_cast<std::size_t>(j)];
        list.insert(list.end(), additions[static_cast<std::size_t>(j)].begin(),
                    additions[static_cast<std::size_t>(j)].end());
        for (const auto& k : list) out.log.erase(NodeRef::variable(j), k.node);
        sort_by_strength(list);
        sort_by_strength(out.adjacency.lagged[static_cast<std::size_t>(j)]);
    }
    return out;
}

/// Lagged and contemporaneous adjacencies plus C - X_t^j for every j.
inline WindowGraph build_undirected_graph(const AdjacencySets& adj, int m, int tau_max) {
    if (adj.m() != m) throw DimensionMismatch("adjacency sets cover " + std::to_string(adj.m()) +
                                              " variables, expected " + std::to_string(m));
    WindowGraph g(m, tau_max);
    for (int j = 0; j < m; ++j) {
        const NodeRef x = NodeRef::variable(j);
        for (const auto& r : adj.lagged[static_cast<std::size_t>(j)]) {
            if (!r.node.is_lagged()) throw ConsistencyError("lagged adjacency holds " + to_string(r.node));
            g.add_edge(r.node, x);
        }
        for (const auto& r : adj.contemporaneous[static_cast<std::size_t>(j)]) {
            if (!r.node.is_contemporaneous() || r.node.var == j)
                throw ConsistencyError("contemporaneous adjacency holds " + to_string(r.node));
            g.add_edge(r.node, x);
        }
        g.add_edge(NodeRef::time(), x);
    }
    return g;
}

/// Tests every X_t^j against C, growing one nested conditioning set from
/// the lagged then contemporaneous adjacents of X_t^j; the first independent verdict
/// removes the C edge.
template <IndependenceTester Tester>
GraphUpdate detect_changing_modules(const Tester& tester, WindowGraph graph, const AdjacencySets& adj,
                                    const SkeletonConfig& cfg) {
    cfg.validate();
    const int m = graph.m();
    const NodeRef C = NodeRef::time();
    struct Verdict {
        std::optional<std::vector<NodeRef>> separated_by;
        std::size_t tests = 0;
    };
    const std::size_t cap = cfg.surrogate_max_cond ? static_cast<std::size_t>(*cfg.surrogate_max_cond)
                                                   : std::numeric_limits<std::size_t>::max();

    auto verdicts = parallel_map(static_cast<std::size_t>(m), cfg.threads, [&](std::size_t jj) {
        const NodeRef x = NodeRef::variable(static_cast<int>(jj));
        Verdict v;
        if (!graph.has_edge(C, x)) return v;
        std::vector<NodeRef> cond;
        auto independent_given = [&](const std::vector<NodeRef>& z) {
            ++v.tests;
            return tester.test(x, C, z).independent;
        };
        try {
            if (independent_given(cond)) {
                v.separated_by = cond;
                return v;
            }
        } catch (const DegenerateConditioning&) {
        }
        for (const auto& cand : adj.combined(static_cast<int>(jj))) {
            if (cond.size() >= cap) break;
            cond.push_back(cand.node);
            try {
                if (independent_given(cond)) {
                    v.separated_by = cond;
                    return v;
                }
            } catch (const DegenerateConditioning&) {
                cond.pop_back();
            }
        }
        return v;
    });

    GraphUpdate out{std::move(graph), {}, 0};
    for (int j = 0; j < m; ++j) {
        auto& v = verdicts[static_cast<std::size_t>(j)];
        out.tests += v.tests;
        if (v.separated_by) {
            out.graph.remove_edge(C, NodeRef::variable(j));
            out.log.record(C, NodeRef::variable(j), std::move(*v.separated_by));
        }
    }
    return out;
}

/// One test per contemporaneous edge given the union of both endpoints'
/// adjacency sets, plus C when C is still adjacent to either endpoint.
template <IndependenceTester Tester>
GraphUpdate refine_contemporaneous(const Tester& tester, WindowGraph graph, const AdjacencySets& adj,
                                   const SkeletonConfig& cfg) {
    cfg.validate();
    std::vector<NodePair> pairs;
    for (const auto& [k, o] : graph.edge_map())
        if (classify(k) == EdgeClass::Contemporaneous) pairs.push_back(k);

    struct Verdict {
        std::optional<std::vector<NodeRef>> separated_by;
    };
    auto verdicts = parallel_map(pairs.size(), cfg.threads, [&](std::size_t e) {
        const auto [a, b] = pairs[e];
        std::vector<NodeRef> cond;
        for (int var : {a.var, b.var}) {
            for (const auto& r : adj.lagged[static_cast<std::size_t>(var)]) detail::append_unique(cond, r.node);
            for (const auto& r : adj.contemporaneous[static_cast<std::size_t>(var)])
                detail::append_unique(cond, r.node);
        }
        std::erase_if(cond, [&](NodeRef n) { return n == a || n == b; });
        if (graph.has_edge(NodeRef::time(), a) || graph.has_edge(NodeRef::time(), b)) cond.push_back(NodeRef::time());
        std::sort(cond.begin(), cond.end());
        Verdict v;
        try {
            if (tester.test(a, b, cond).independent) v.separated_by = std::move(cond);
        } catch (const DegenerateConditioning&) {
        }
        return v;
    });

    GraphUpdate out{std::move(graph), {}, pairs.size()};
    for (std::size_t e = 0; e < pairs.size(); ++e) {
        if (!verdicts[e].separated_by) continue;
        out.graph.remove_edge(pairs[e].first, pairs[e].second);
        out.log.record(pairs[e].first, pairs[e].second, std::move(*verdicts[e].separated_by));
    }
    return out;
}

struct SkeletonResult {
    std::vector<std::vector<RankedNode>> supersets;
    AdjacencySets adjacency;
    WindowGraph graph;
    SeparationLog log;
    std::vector<PhaseStats> phases;
};

/// Full skeleton search: candidate search, MCI pruning, graph with C, C-edge pruning,
/// contemporaneous refinement.
template <IndependenceTester Tester>
SkeletonResult learn_skeleton(const Tester& tester, int m, const SkeletonConfig& cfg) {
    cfg.validate();
    if (m < 2) throw ValidationError("need at least 2 variables");
    SkeletonResult out;
    using clock = std::chrono::steady_clock;

    auto t0 = clock::now();
    auto searches = parallel_map(static_cast<std::size_t>(m), cfg.threads, [&](std::size_t j) {
        return pc1_search(tester, m, static_cast<int>(j), cfg);
    });
    PhaseStats pc1{"pc1", 0, 0.0};
    for (auto& s : searches) {
        pc1.tests += s.tests;
        out.log.merge(s.log);
        out.supersets.push_back(std::move(s.survivors));
    }
    pc1.runtime_ms = detail::elapsed_ms(t0);
    out.phases.push_back(pc1);

    t0 = clock::now();
    auto pruned = mci_prune(tester, out.supersets, cfg);
    out.log.merge(pruned.log);
    out.adjacency = std::move(pruned.adjacency);
    // a contemporaneous pair kept by either endpoint is adjacent, so drop any
    // separating set recorded from the other side
    for (int j = 0; j < m; ++j)
        for (const auto& k : out.adjacency.contemporaneous[static_cast<std::size_t>(j)])
            out.log.erase(NodeRef::variable(j), k.node);
    out.phases.push_back({"mci", pruned.tests, detail::elapsed_ms(t0)});

    t0 = clock::now();
    WindowGraph g = build_undirected_graph(out.adjacency, m, cfg.tau_max);
    out.phases.push_back({"graph", 0, detail::elapsed_ms(t0)});

    t0 = clock::now();
    auto changing = detect_changing_modules(tester, std::move(g), out.adjacency, cfg);
    out.log.merge(changing.log);
    out.phases.push_back({"changing_modules", changing.tests, detail::elapsed_ms(t0)});

    t0 = clock::now();
    auto refined = refine_contemporaneous(tester, std::move(changing.graph), out.adjacency, cfg);
    out.log.merge(refined.log);
    out.graph = std::move(refined.graph);
    out.phases.push_back({"contemporaneous", refined.tests, detail::elapsed_ms(t0)});
    return out;
}

}  // namespace ecdans
