#include <gtest/gtest.h>

#include "dsep_oracle.hpp"
#include "ecdans/datagen.hpp"
#include "ecdans/metrics.hpp"
#include "ecdans/skeleton.hpp"

using namespace ecdans;
using ecdans::testing::DSeparationOracle;

namespace {

NodeRef X(int var, int lag = 0) { return NodeRef::variable(var, lag); }

SkeletonConfig config(int tau_max) {
    SkeletonConfig c;
    c.tau_max = tau_max;
    return c;
}

// X0 and X1 autocorrelated, X0[t-1] -> X1[t].
WindowGraph two_variable_truth() {
    WindowGraph g(2, 1);
    g.add_directed(X(0, 1), X(0));
    g.add_directed(X(1, 1), X(1));
    g.add_directed(X(0, 1), X(1));
    return g;
}

std::vector<NodeRef> nodes_of(const std::vector<RankedNode>& v) {
    std::vector<NodeRef> out;
    for (const auto& r : v) out.push_back(r.node);
    std::sort(out.begin(), out.end());
    return out;
}

Dataset simulated(std::uint64_t seed, int m, std::vector<ChangeSpec> changes = {}) {
    ScmSpec s;
    s.m = m;
    s.tau_max = 2;
    s.T = 800;
    s.seed = seed;
    s.changing = std::move(changes);
    return simulate(random_window_graph(s), s);
}

}  // namespace

TEST(Pc1Search, KeepsTrueParentsAndLogsTheRest) {
    const DSeparationOracle oracle(two_variable_truth(), 10);
    const auto res = pc1_search(oracle, 2, 1, config(1));
    EXPECT_EQ(nodes_of(res.survivors), (std::vector<NodeRef>{X(0, 1), X(1, 1)}));
    ASSERT_TRUE(res.log.contains(X(1), X(0)));
    EXPECT_EQ(*res.log.find(X(1), X(0)), (std::vector<NodeRef>{X(0, 1)}));
    EXPECT_GT(res.tests, 3u);
}

TEST(Pc1Search, DepthZeroKeepsEveryMarginallyDependentCandidate) {
    const DSeparationOracle oracle(two_variable_truth(), 10);
    SkeletonConfig c = config(1);
    c.pc1_max_cond = 0;
    const auto res = pc1_search(oracle, 2, 1, c);
    EXPECT_EQ(res.survivors.size(), 3u);
    EXPECT_EQ(res.tests, 3u);
    EXPECT_THROW(pc1_search(oracle, 2, 2, c), ValidationError);
}

TEST(MciPrune, RemovesCandidatesExplainedByTheSourcePast) {
    // X0 -> X1 -> X2 through lag 1; a superset for X2 that also holds X0[t-2]
    WindowGraph truth(3, 2);
    for (int v = 0; v < 3; ++v) truth.add_directed(X(v, 1), X(v));
    truth.add_directed(X(0, 1), X(1));
    truth.add_directed(X(1, 1), X(2));
    const DSeparationOracle oracle(truth, 12);
    std::vector<std::vector<RankedNode>> supersets{
        {{X(0, 1), 1.0}},
        {{X(1, 1), 1.0}, {X(0, 1), 1.0}},
        {{X(2, 1), 1.0}, {X(1, 1), 1.0}, {X(0, 2), 0.5}},
    };
    const auto res = mci_prune(oracle, supersets, config(2));
    EXPECT_EQ(nodes_of(res.adjacency.lagged[2]), (std::vector<NodeRef>{X(1, 1), X(2, 1)}));
    EXPECT_TRUE(res.log.contains(X(2), X(0, 2)));
    EXPECT_EQ(res.tests, 6u);
}

TEST(MciPrune, ContemporaneousAdjacencyIsSymmetric) {
    WindowGraph truth(2, 1);
    truth.add_directed(X(0), X(1));
    const DSeparationOracle oracle(truth, 4);
    // only X1 proposes X0
    std::vector<std::vector<RankedNode>> supersets{{}, {{X(0), 1.0}}};
    const auto res = mci_prune(oracle, supersets, config(1));
    EXPECT_EQ(nodes_of(res.adjacency.contemporaneous[0]), (std::vector<NodeRef>{X(1)}));
    EXPECT_EQ(nodes_of(res.adjacency.contemporaneous[1]), (std::vector<NodeRef>{X(0)}));
    EXPECT_EQ(res.log.size(), 0u);
}

TEST(BuildGraph, AddsSurrogateEdgeForEveryVariable) {
    AdjacencySets adj(2);
    adj.lagged[1].push_back({X(0, 1), 0.4});
    const WindowGraph g = build_undirected_graph(adj, 2, 1);
    EXPECT_EQ(g.size(), 3u);
    EXPECT_TRUE(g.has_edge(X(0, 1), X(1)));
    EXPECT_TRUE(g.has_edge(NodeRef::time(), X(0)));
    EXPECT_TRUE(g.has_edge(NodeRef::time(), X(1)));
    for (const auto& e : g.edges()) EXPECT_FALSE(e.directed());
}

TEST(BuildGraph, MirroredContemporaneousEntriesGiveOneEdge) {
    AdjacencySets adj(3);
    adj.contemporaneous[0].push_back({X(1), 0.3});
    adj.contemporaneous[1].push_back({X(0), 0.3});
    adj.lagged[2].push_back({X(2, 1), 0.5});
    adj.lagged[2].push_back({X(1, 2), 0.2});
    const WindowGraph g = build_undirected_graph(adj, 3, 2);
    EXPECT_EQ(g.size(), 6u);
    EXPECT_THROW(build_undirected_graph(adj, 4, 2), DimensionMismatch);
}

TEST(ChangingModules, KeepsOnlyTheDriftingVariable) {
    WindowGraph truth = two_variable_truth();
    truth.add_directed(NodeRef::time(), X(0));
    const DSeparationOracle oracle(truth, 10);
    AdjacencySets adj(2);
    adj.lagged[0].push_back({X(0, 1), 1.0});
    adj.lagged[1].push_back({X(0, 1), 1.0});
    adj.lagged[1].push_back({X(1, 1), 1.0});
    const auto res = detect_changing_modules(oracle, build_undirected_graph(adj, 2, 1), adj, config(1));
    EXPECT_TRUE(res.graph.has_edge(NodeRef::time(), X(0)));
    EXPECT_FALSE(res.graph.has_edge(NodeRef::time(), X(1)));
    ASSERT_TRUE(res.log.contains(NodeRef::time(), X(1)));
    // X1 sees C through X0[t-1]; the first separating set holds it
    const auto* sep = res.log.find(NodeRef::time(), X(1));
    EXPECT_NE(std::find(sep->begin(), sep->end(), X(0, 1)), sep->end());
    EXPECT_EQ(res.graph.changing_modules(), (std::vector<int>{0}));
}

TEST(RefineContemporaneous, DropsShieldedPair) {
    WindowGraph truth(3, 1);
    truth.add_directed(X(0), X(1));
    truth.add_directed(X(1), X(2));
    const DSeparationOracle oracle(truth, 4);
    AdjacencySets adj(3);
    adj.contemporaneous[0] = {{X(1), 1.0}, {X(2), 0.5}};
    adj.contemporaneous[1] = {{X(0), 1.0}, {X(2), 1.0}};
    adj.contemporaneous[2] = {{X(1), 1.0}, {X(0), 0.5}};
    WindowGraph g = build_undirected_graph(adj, 3, 1);
    for (int v = 0; v < 3; ++v) g.remove_edge(NodeRef::time(), X(v));
    const auto res = refine_contemporaneous(oracle, g, adj, config(1));
    EXPECT_EQ(res.tests, 3u);
    EXPECT_FALSE(res.graph.has_edge(X(0), X(2)));
    EXPECT_TRUE(res.graph.has_edge(X(0), X(1)));
    EXPECT_TRUE(res.graph.has_edge(X(1), X(2)));
    EXPECT_EQ(*res.log.find(X(0), X(2)), (std::vector<NodeRef>{X(1)}));
}

TEST(LearnSkeleton, LaterStepsOnlyRemoveEdges) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Dataset d = simulated(seed, 4, {{.target = 1, .amplitude = 2.0}});
        const CITester tester(d, TestConfig{}, 2);
        const auto res = learn_skeleton(tester, 4, config(2));
        const WindowGraph built = build_undirected_graph(res.adjacency, 4, 2);
        for (const auto& e : res.graph.edges()) EXPECT_TRUE(built.has_edge(e.a, e.b)) << seed;
        EXPECT_LE(res.graph.size(), built.size());
    }
}

TEST(LearnSkeleton, EveryAbsentPairHasOneSeparatingSetWithoutEndpoints) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Dataset d = simulated(seed, 4, {{.target = 0, .amplitude = 2.0}});
        const CITester tester(d, TestConfig{}, 2);
        const auto res = learn_skeleton(tester, 4, config(2));
        std::vector<NodeRef> sources{NodeRef::time()};
        for (int v = 0; v < 4; ++v)
            for (int lag = 0; lag <= 2; ++lag) sources.push_back(X(v, lag));
        for (int j = 0; j < 4; ++j)
            for (auto s : sources) {
                if (s == X(j) || (s.is_contemporaneous() && s.var > j)) continue;
                const bool adjacent = res.graph.has_edge(s, X(j));
                const auto* sep = res.log.find(s, X(j));
                EXPECT_EQ(adjacent, sep == nullptr) << seed << " " << to_string(s) << " " << j;
                if (sep) {
                    EXPECT_EQ(std::find(sep->begin(), sep->end(), s), sep->end());
                    EXPECT_EQ(std::find(sep->begin(), sep->end(), X(j)), sep->end());
                }
            }
    }
}

TEST(LearnSkeleton, AdjacencyListsAreStrengthOrdered) {
    const Dataset d = simulated(3, 5);
    const CITester tester(d, TestConfig{}, 2);
    const auto res = learn_skeleton(tester, 5, config(2));
    auto check = [](const std::vector<RankedNode>& v) {
        for (std::size_t k = 1; k < v.size(); ++k) EXPECT_FALSE(stronger(v[k], v[k - 1]));
    };
    for (int j = 0; j < 5; ++j) {
        check(res.supersets[static_cast<std::size_t>(j)]);
        check(res.adjacency.lagged[static_cast<std::size_t>(j)]);
        check(res.adjacency.contemporaneous[static_cast<std::size_t>(j)]);
    }
    std::vector<std::string> phases;
    for (const auto& p : res.phases) phases.push_back(p.phase);
    EXPECT_EQ(phases, (std::vector<std::string>{"pc1", "mci", "graph", "changing_modules", "contemporaneous"}));
}

TEST(LearnSkeleton, ThreadCountDoesNotChangeTheResult) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset d = simulated(seed, 6, {{.target = 2, .amplitude = 2.0}});
        const CITester tester(d, TestConfig{}, 2);
        SkeletonConfig one = config(2), many = config(2);
        many.threads = 8;
        const auto a = learn_skeleton(tester, 6, one);
        const auto b = learn_skeleton(tester, 6, many);
        EXPECT_EQ(a.graph, b.graph);
        EXPECT_EQ(a.log.entries(), b.log.entries());
        for (std::size_t p = 0; p < a.phases.size(); ++p) EXPECT_EQ(a.phases[p].tests, b.phases[p].tests);
    }
}

TEST(LearnSkeleton, MatchesOracleOnStationaryLaggedProcesses) {
    // without contemporaneous links or drift the oracle skeleton is exact
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        ScmSpec s;
        s.m = 4;
        s.tau_max = 2;
        s.p_contemp = 0.0;
        s.seed = seed;
        const WindowGraph truth = random_window_graph(s);
        const DSeparationOracle oracle(truth, 20);
        const auto res = learn_skeleton(oracle, 4, config(2));
        EXPECT_EQ(skeleton_distance(truth, res.graph), 0u) << "seed " << seed;
    }
}

TEST(SkeletonConfig, Validation) {
    SkeletonConfig c;
    c.tau_max = 0;
    EXPECT_THROW(c.validate(), ValidationError);
    c.tau_max = 1;
    c.mci_px = -1;
    EXPECT_THROW(c.validate(), ValidationError);
}
