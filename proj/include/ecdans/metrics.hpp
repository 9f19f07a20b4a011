#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <set>

#include "ecdans/model.hpp"

namespace ecdans {

struct Counts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    friend bool operator==(const Counts&, const Counts&) = default;
};

/// Skeleton-level confusion counts, overall and per edge class.
struct Confusion {
    Counts overall;
    std::array<Counts, 3> by_class{};

    [[nodiscard]] const Counts& of(EdgeClass c) const { return by_class[static_cast<std::size_t>(c)]; }
};

inline void require_same_dims(const WindowGraph& a, const WindowGraph& b) {
    if (!a.same_dims(b))
        throw DimensionMismatch("graphs differ in dimensions: m=" + std::to_string(a.m()) + " tau_max=" +
                                std::to_string(a.tau_max()) + " vs m=" + std::to_string(b.m()) +
                                " tau_max=" + std::to_string(b.tau_max()));
}

/// With `exclude_surrogate` C edges are ignored entirely.
inline Confusion confusion(const WindowGraph& truth, const WindowGraph& estimate, bool exclude_surrogate = false) {
    require_same_dims(truth, estimate);
    Confusion out;
    auto bump = [&](const NodePair& p, std::size_t Counts::*field) {
        const EdgeClass c = classify(p);
        if (exclude_surrogate && c == EdgeClass::Surrogate) return;
        ++(out.overall.*field);
        ++(out.by_class[static_cast<std::size_t>(c)].*field);
    };
    for (const auto& [p, o] : truth.edge_map()) bump(p, estimate.has_edge(p.first, p.second) ? &Counts::tp : &Counts::fn);
    for (const auto& [p, o] : estimate.edge_map())
        if (!truth.has_edge(p.first, p.second)) bump(p, &Counts::fp);
    return out;
}

/// Undefined (nullopt) when the true graph has no edges.
inline std::optional<double> tpr(const Counts& c) {
    if (c.tp + c.fn == 0) return std::nullopt;
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

/// 0 when nothing was predicted.
inline double fdr(const Counts& c) {
    if (c.tp + c.fp == 0) return 0.0;
    return static_cast<double>(c.fp) / static_cast<double>(c.tp + c.fp);
}

/// Missing or extra adjacencies cost 1; shared adjacencies cost 1 when
/// their orientation differs (a reversal counts once).
inline std::size_t shd(const WindowGraph& truth, const WindowGraph& estimate, bool exclude_surrogate = false) {
    require_same_dims(truth, estimate);
    std::size_t d = 0;
    const auto& te = truth.edge_map();
    const auto& ee = estimate.edge_map();
    for (const auto& [p, o] : te) {
        if (exclude_surrogate && classify(p) == EdgeClass::Surrogate) continue;
        auto it = ee.find(p);
        if (it == ee.end() || it->second != o) ++d;
    }
    for (const auto& [p, o] : ee) {
        if (exclude_surrogate && classify(p) == EdgeClass::Surrogate) continue;
        if (!te.contains(p)) ++d;
    }
    return d;
}

/// SHD restricted to one edge class.
inline std::size_t shd(const WindowGraph& truth, const WindowGraph& estimate, EdgeClass only) {
    require_same_dims(truth, estimate);
    std::size_t d = 0;
    for (const auto& [p, o] : truth.edge_map()) {
        if (classify(p) != only) continue;
        auto got = estimate.orientation(p);
        if (!got || *got != o) ++d;
    }
    for (const auto& [p, o] : estimate.edge_map())
        if (classify(p) == only && !truth.has_edge(p.first, p.second)) ++d;
    return d;
}

/// Skeleton-only SHD: adjacency differences, orientation ignored.
inline std::size_t skeleton_distance(const WindowGraph& truth, const WindowGraph& estimate) {
    const Counts c = confusion(truth, estimate).overall;
    return c.fp + c.fn;
}

}  // namespace ecdans
