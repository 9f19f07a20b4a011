#include <gtest/gtest.h>

#include <random>

#include "ecdans/metrics.hpp"
#include "graph_enum.hpp"

using namespace ecdans;
using namespace ecdans::testing;

namespace {

NodeRef X(int var, int lag = 0) { return NodeRef::variable(var, lag); }
const NodeRef C = NodeRef::time();

WindowGraph small_truth() {
    WindowGraph g(3, 1);
    g.add_directed(X(0, 1), X(0));
    g.add_directed(X(0), X(1));
    g.add_directed(C, X(2));
    return g;
}

}  // namespace

TEST(Metrics, IdenticalGraphsArePerfect) {
    const WindowGraph g = small_truth();
    const Counts k = confusion(g, g).overall;
    EXPECT_EQ(k, (Counts{3, 0, 0}));
    EXPECT_EQ(tpr(k), 1.0);
    EXPECT_EQ(fdr(k), 0.0);
    EXPECT_EQ(shd(g, g), 0u);
}

TEST(Metrics, MissingExtraAndReversedEdges) {
    const WindowGraph truth = small_truth();
    WindowGraph est(3, 1);
    est.add_directed(X(1), X(0));
    est.add_directed(X(2, 1), X(1));
    const Confusion c = confusion(truth, est);
    EXPECT_EQ(c.overall, (Counts{1, 1, 2}));
    EXPECT_EQ(c.of(EdgeClass::Contemporaneous), (Counts{1, 0, 0}));
    EXPECT_EQ(c.of(EdgeClass::Lagged), (Counts{0, 1, 1}));
    EXPECT_EQ(c.of(EdgeClass::Surrogate), (Counts{0, 0, 1}));
    EXPECT_DOUBLE_EQ(*tpr(c.overall), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(fdr(c.overall), 0.5);
    // missing lag, missing C, extra lag, reversed contemporaneous
    EXPECT_EQ(shd(truth, est), 4u);
    EXPECT_EQ(shd(truth, est, true), 3u);
    EXPECT_EQ(skeleton_distance(truth, est), 3u);
}

TEST(Metrics, UndirectedCountsAsOrientationError) {
    const WindowGraph truth = small_truth();
    WindowGraph est = truth;
    est.unorient(X(0), X(1));
    EXPECT_EQ(shd(truth, est), 1u);
    EXPECT_EQ(skeleton_distance(truth, est), 0u);
}

TEST(Metrics, EmptyGraphs) {
    const WindowGraph e(3, 1);
    const Counts k = confusion(e, e).overall;
    EXPECT_FALSE(tpr(k).has_value());
    EXPECT_EQ(fdr(k), 0.0);
    EXPECT_EQ(fdr(confusion(e, small_truth()).overall), 1.0);
}

TEST(Metrics, DimensionMismatchIsRejected) {
    EXPECT_THROW(shd(WindowGraph(3, 1), WindowGraph(3, 2)), DimensionMismatch);
    EXPECT_THROW(confusion(WindowGraph(3, 1), WindowGraph(4, 1)), DimensionMismatch);
}

TEST(Metrics, ExcludingCDropsSurrogateCounts) {
    WindowGraph est = small_truth();
    est.remove_edge(C, X(2));
    est.add_directed(C, X(0));
    const Counts k = confusion(small_truth(), est, true).overall;
    EXPECT_EQ(k, (Counts{2, 0, 0}));
    EXPECT_EQ(shd(small_truth(), est, true), 0u);
    EXPECT_EQ(shd(small_truth(), est), 2u);
}

TEST(Metrics, ShdMatchesSlotHammingDistanceExhaustively) {
    constexpr int m = 3, tau = 1, max_total = 4;
    const auto slots = window_slots(m, tau);
    const auto states = enumerate_states(slots, max_total);
    std::vector<WindowGraph> graphs;
    std::vector<int> counts;
    graphs.reserve(states.size());
    for (const auto& s : states) {
        graphs.push_back(build_graph(slots, s, m, tau));
        counts.push_back(edge_count(s));
    }
    std::size_t pairs = 0, mismatches = 0;
    for (std::size_t x = 0; x < states.size(); ++x)
        for (std::size_t y = 0; y < states.size(); ++y) {
            if (counts[x] + counts[y] > max_total) continue;
            ++pairs;
            const std::size_t d = shd(graphs[x], graphs[y]);
            if (d != slot_distance(states[x], states[y])) ++mismatches;
            if (d != shd(graphs[y], graphs[x])) ++mismatches;
        }
    EXPECT_EQ(mismatches, 0u);
    EXPECT_GT(pairs, 600000u);
}

TEST(Metrics, TriangleInequalityOnSmallGraphs) {
    constexpr int m = 3, tau = 1;
    const auto slots = window_slots(m, tau);
    const auto states = enumerate_states(slots, 3);
    std::vector<WindowGraph> graphs;
    for (const auto& s : states) graphs.push_back(build_graph(slots, s, m, tau));
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> pick(0, graphs.size() - 1);
    for (int trial = 0; trial < 100000; ++trial) {
        const auto &a = graphs[pick(rng)], &b = graphs[pick(rng)], &c = graphs[pick(rng)];
        ASSERT_LE(shd(a, c), shd(a, b) + shd(b, c));
    }
}

TEST(Metrics, ClassBreakdownsSumToOverall) {
    const auto slots = window_slots(3, 1);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 2000; ++trial) {
        SlotState a(slots.size()), b(slots.size());
        for (std::size_t k = 0; k < slots.size(); ++k) {
            a[k] = static_cast<std::uint8_t>(rng() % 2 ? 0 : rng() % static_cast<unsigned>(slots[k].states));
            b[k] = static_cast<std::uint8_t>(rng() % 2 ? 0 : rng() % static_cast<unsigned>(slots[k].states));
        }
        const WindowGraph ga = build_graph(slots, a, 3, 1), gb = build_graph(slots, b, 3, 1);
        const Confusion c = confusion(ga, gb);
        Counts sum;
        std::size_t shd_sum = 0;
        for (auto cls : {EdgeClass::Lagged, EdgeClass::Contemporaneous, EdgeClass::Surrogate}) {
            sum.tp += c.of(cls).tp;
            sum.fp += c.of(cls).fp;
            sum.fn += c.of(cls).fn;
            shd_sum += shd(ga, gb, cls);
        }
        ASSERT_EQ(sum, c.overall);
        ASSERT_EQ(shd_sum, shd(ga, gb));
        ASSERT_EQ(shd(ga, gb, true), shd_sum - shd(ga, gb, EdgeClass::Surrogate));
    }
}

TEST(Metrics, InvariantUnderVariableRelabelling) {
    const auto slots = window_slots(3, 2);
    std::mt19937_64 rng(8);
    auto relabel = [](const WindowGraph& g, const std::vector<int>& p) {
        WindowGraph out(g.m(), g.tau_max());
        auto f = [&](NodeRef n) { return n.surrogate ? n : NodeRef::variable(p[static_cast<std::size_t>(n.var)], n.lag); };
        for (const auto& e : g.edges()) {
            if (e.orientation == Orientation::AtoB) out.add_directed(f(e.a), f(e.b));
            else if (e.orientation == Orientation::BtoA) out.add_directed(f(e.b), f(e.a));
            else out.add_edge(f(e.a), f(e.b));
        }
        return out;
    };
    for (int trial = 0; trial < 500; ++trial) {
        SlotState a(slots.size()), b(slots.size());
        for (std::size_t k = 0; k < slots.size(); ++k) {
            a[k] = static_cast<std::uint8_t>(rng() % static_cast<unsigned>(slots[k].states));
            b[k] = static_cast<std::uint8_t>(rng() % static_cast<unsigned>(slots[k].states));
        }
        std::vector<int> p{0, 1, 2};
        std::shuffle(p.begin(), p.end(), rng);
        const WindowGraph ga = build_graph(slots, a, 3, 2), gb = build_graph(slots, b, 3, 2);
        ASSERT_EQ(shd(ga, gb), shd(relabel(ga, p), relabel(gb, p)));
        ASSERT_EQ(confusion(ga, gb).overall, confusion(relabel(ga, p), relabel(gb, p)).overall);
    }
}
