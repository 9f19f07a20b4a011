#pragma once

#include <chrono>
#include <vector>

#include "ecdans/citest.hpp"
#include "ecdans/model.hpp"
#include "ecdans/orient.hpp"
#include "ecdans/skeleton.hpp"

namespace ecdans {

struct DiscoverConfig {
    SkeletonConfig skeleton;
    TestConfig test;
    OrientConfig orient;

    void validate() const {
        skeleton.validate();
        test.validate();
        orient.validate();
    }
};

struct DiscoveryResult {
    WindowGraph skeleton;
    WindowGraph graph;
    SeparationLog log;
    AdjacencySets adjacency;
    std::vector<PhaseStats> phases;
    std::vector<Diagnostic> diagnostics;
};

/// Skeleton search followed by orientation.
inline DiscoveryResult discover(const Dataset& data, const DiscoverConfig& cfg) {
    cfg.validate();
    if (data.T() <= cfg.skeleton.tau_max + 10)
        throw ValidationError("insufficient data: T=" + std::to_string(data.T()) + " must exceed tau_max + 10 = " +
                              std::to_string(cfg.skeleton.tau_max + 10));
    const CITester tester(data, cfg.test, cfg.skeleton.tau_max);
    SkeletonResult sk = learn_skeleton(tester, data.m(), cfg.skeleton);

    DiscoveryResult out;
    out.skeleton = sk.graph;
    out.log = std::move(sk.log);
    out.adjacency = std::move(sk.adjacency);
    out.phases = std::move(sk.phases);

    const auto t0 = std::chrono::steady_clock::now();
    out.graph = orient_graph(data, std::move(sk.graph), out.log, cfg.orient, &out.diagnostics);
    out.phases.push_back({"orient", 0, detail::elapsed_ms(t0)});
    return out;
}

}  // namespace ecdans
