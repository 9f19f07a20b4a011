#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ecdans/error.hpp"

namespace ecdans {

/// T x m observations, rows are time steps.
class Dataset {
public:
    Dataset(Eigen::MatrixXd values, std::vector<std::string> names)
        : values_(std::move(values)), names_(std::move(names)) {
        if (values_.rows() < 2 || values_.cols() < 2)
            throw ValidationError("dataset needs at least 2 time steps and 2 variables, got T=" +
                                  std::to_string(values_.rows()) +
                                  " m=" + std::to_string(values_.cols()));
        if (static_cast<Eigen::Index>(names_.size()) != values_.cols())
            throw ValidationError("dataset has " + std::to_string(values_.cols()) +
                                  " columns but " + std::to_string(names_.size()) + " names");
        std::unordered_set<std::string> seen;
        for (const auto& n : names_) {
            if (n.empty()) throw ValidationError("empty variable name");
            if (!seen.insert(n).second) throw ValidationError("duplicate variable name '" + n + "'");
        }
        if (!values_.allFinite()) throw ValidationError("dataset contains NaN or Inf");
    }

    /// Names default to X0, X1, ...
    explicit Dataset(Eigen::MatrixXd values) : Dataset(values, default_names(values.cols())) {}

    [[nodiscard]] const Eigen::MatrixXd& values() const noexcept { return values_; }
    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }
    [[nodiscard]] int T() const noexcept { return static_cast<int>(values_.rows()); }
    [[nodiscard]] int m() const noexcept { return static_cast<int>(values_.cols()); }

    static std::vector<std::string> default_names(Eigen::Index m) {
        std::vector<std::string> out;
        for (Eigen::Index i = 0; i < m; ++i) out.push_back("X" + std::to_string(i));
        return out;
    }

private:
    Eigen::MatrixXd values_;
    std::vector<std::string> names_;
};

/// A node of the window graph: variable `var` at time t - `lag`, or the
/// surrogate time node C. Orders variables by (var, lag) with C last.
struct NodeRef {
    int var = 0;
    int lag = 0;
    bool surrogate = false;

    static constexpr NodeRef variable(int index, int lag = 0) noexcept { return {index, lag, false}; }
    static constexpr NodeRef time() noexcept { return {-1, 0, true}; }

    [[nodiscard]] constexpr bool is_contemporaneous() const noexcept { return !surrogate && lag == 0; }
    [[nodiscard]] constexpr bool is_lagged() const noexcept { return !surrogate && lag > 0; }

    /// The same variable `by` steps further in the past.
    [[nodiscard]] constexpr NodeRef shifted(int by) const noexcept {
        return surrogate ? *this : NodeRef{var, lag + by, false};
    }

    friend constexpr bool operator==(const NodeRef&, const NodeRef&) = default;
    friend constexpr std::strong_ordering operator<=>(const NodeRef& a, const NodeRef& b) noexcept {
        if (a.surrogate != b.surrogate) return a.surrogate ? std::strong_ordering::greater
                                                           : std::strong_ordering::less;
        if (a.surrogate) return std::strong_ordering::equal;
        if (auto c = a.var <=> b.var; c != 0) return c;
        return a.lag <=> b.lag;
    }
};

inline std::string to_string(const NodeRef& n) {
    if (n.surrogate) return "C";
    std::string s = "X" + std::to_string(n.var) + "[t";
    if (n.lag > 0) s += "-" + std::to_string(n.lag);
    return s + "]";
}

enum class Orientation { Undirected, AtoB, BtoA };

/// Edges are stored canonically: if one endpoint is lagged or C it is `a`,
/// otherwise `a` is the lower-indexed contemporaneous variable. An oriented
/// lagged or C edge therefore always reads AtoB.
struct Edge {
    NodeRef a;
    NodeRef b;
    Orientation orientation = Orientation::Undirected;

    [[nodiscard]] bool directed() const noexcept { return orientation != Orientation::Undirected; }
    friend bool operator==(const Edge&, const Edge&) = default;
};

using NodePair = std::pair<NodeRef, NodeRef>;

enum class EdgeClass { Lagged, Contemporaneous, Surrogate };

inline const char* to_string(EdgeClass c) {
    switch (c) {
        case EdgeClass::Lagged: return "lagged";
        case EdgeClass::Contemporaneous: return "contemporaneous";
        case EdgeClass::Surrogate: return "surrogate";
    }
    return "?";
}

/// Canonical endpoint order for an unordered pair (see Edge).
inline NodePair canonical_pair(NodeRef x, NodeRef y) {
    const bool x_anchor = !x.is_contemporaneous();
    const bool y_anchor = !y.is_contemporaneous();
    if (y_anchor && !x_anchor) return {y, x};
    if (x_anchor && !y_anchor) return {x, y};
    return x < y ? NodePair{x, y} : NodePair{y, x};
}

inline EdgeClass classify(const NodePair& p) {
    if (p.first.surrogate || p.second.surrogate) return EdgeClass::Surrogate;
    if (p.first.is_lagged() || p.second.is_lagged()) return EdgeClass::Lagged;
    return EdgeClass::Contemporaneous;
}

/// Edges over lags 0..tau_max plus C. Every edge lands on a contemporaneous node.
class WindowGraph {
public:
    WindowGraph() = default;
    WindowGraph(int m, int tau_max) : m_(m), tau_max_(tau_max) {
        if (m < 1) throw ValidationError("graph needs m >= 1");
        if (tau_max < 0) throw ValidationError("graph needs tau_max >= 0");
    }

    [[nodiscard]] int m() const noexcept { return m_; }
    [[nodiscard]] int tau_max() const noexcept { return tau_max_; }
    [[nodiscard]] std::size_t size() const noexcept { return edges_.size(); }

    /// Adds (or overwrites) an undirected edge.
    void add_edge(NodeRef x, NodeRef y) { set(x, y, std::nullopt); }

    /// Adds (or overwrites) the directed edge from -> to.
    void add_directed(NodeRef from, NodeRef to) { set(from, to, from); }

    bool remove_edge(NodeRef x, NodeRef y) { return edges_.erase(canonical_pair(x, y)) > 0; }

    [[nodiscard]] bool has_edge(NodeRef x, NodeRef y) const {
        return edges_.contains(canonical_pair(x, y));
    }

    /// true iff the edge x -> y exists.
    [[nodiscard]] bool is_directed(NodeRef from, NodeRef to) const {
        auto it = edges_.find(canonical_pair(from, to));
        if (it == edges_.end()) return false;
        return (it->second == Orientation::AtoB && it->first.first == from) ||
               (it->second == Orientation::BtoA && it->first.second == from);
    }

    [[nodiscard]] bool is_undirected(NodeRef x, NodeRef y) const {
        auto it = edges_.find(canonical_pair(x, y));
        return it != edges_.end() && it->second == Orientation::Undirected;
    }

    void orient(NodeRef from, NodeRef to) {
        if (!has_edge(from, to))
            throw ConsistencyError("cannot orient missing edge " + to_string(from) + " - " + to_string(to));
        add_directed(from, to);
    }

    void unorient(NodeRef x, NodeRef y) {
        if (!has_edge(x, y))
            throw ConsistencyError("cannot unorient missing edge " + to_string(x) + " - " + to_string(y));
        add_edge(x, y);
    }

    [[nodiscard]] std::optional<Orientation> orientation(const NodePair& canonical) const {
        auto it = edges_.find(canonical);
        if (it == edges_.end()) return std::nullopt;
        return it->second;
    }

    /// All edges in canonical order.
    [[nodiscard]] std::vector<Edge> edges() const {
        std::vector<Edge> out;
        out.reserve(edges_.size());
        for (const auto& [k, o] : edges_) out.push_back({k.first, k.second, o});
        return out;
    }

    [[nodiscard]] const std::map<NodePair, Orientation>& edge_map() const noexcept { return edges_; }

    /// Variables adjacent to C.
    [[nodiscard]] std::vector<int> changing_modules() const {
        std::vector<int> out;
        for (const auto& [k, o] : edges_)
            if (k.first.surrogate) out.push_back(k.second.var);
        return out;
    }

    [[nodiscard]] bool is_changing(int var) const {
        return has_edge(NodeRef::time(), NodeRef::variable(var));
    }

    /// Nodes adjacent to `node`, sorted.
    [[nodiscard]] std::vector<NodeRef> neighbors(NodeRef node) const {
        std::vector<NodeRef> out;
        for (const auto& [k, o] : edges_) {
            if (k.first == node) out.push_back(k.second);
            else if (k.second == node) out.push_back(k.first);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    [[nodiscard]] bool same_dims(const WindowGraph& other) const noexcept {
        return m_ == other.m_ && tau_max_ == other.tau_max_;
    }

    friend bool operator==(const WindowGraph&, const WindowGraph&) = default;

private:
    void check_endpoints(NodeRef x, NodeRef y) const {
        auto check = [&](NodeRef n) {
            if (n.surrogate) return;
            if (n.var < 0 || n.var >= m_ || n.lag < 0 || n.lag > tau_max_)
                throw ValidationError("node " + to_string(n) + " outside window m=" + std::to_string(m_) +
                                      " tau_max=" + std::to_string(tau_max_));
        };
        check(x);
        check(y);
        if (x == y) throw ValidationError("self-loop on " + to_string(x));
        if (!x.is_contemporaneous() && !y.is_contemporaneous())
            throw ValidationError("edge " + to_string(x) + " - " + to_string(y) +
                                  " must land on a contemporaneous node");
    }

    void set(NodeRef x, NodeRef y, std::optional<NodeRef> from) {
        check_endpoints(x, y);
        const auto key = canonical_pair(x, y);
        Orientation o = Orientation::Undirected;
        if (from) o = (*from == key.first) ? Orientation::AtoB : Orientation::BtoA;
        if (o == Orientation::BtoA && !key.first.is_contemporaneous())
            throw ValidationError("edge into the past or into C: " + to_string(key.second) + " -> " +
                                  to_string(key.first));
        edges_[key] = o;
    }

    int m_ = 0;
    int tau_max_ = 0;
    std::map<NodePair, Orientation> edges_;
};

/// Outcome of one (conditional) independence test.
struct CITestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    double effect_size = 0.0;
    bool independent = true;
    std::vector<NodeRef> cond_set;
};

/// Removed pair -> the conditioning set that separated it.
class SeparationLog {
public:
    /// Records the first separating set for a pair; later records are ignored.
    bool record(NodeRef x, NodeRef y, std::vector<NodeRef> cond) {
        if (std::find(cond.begin(), cond.end(), x) != cond.end() ||
            std::find(cond.begin(), cond.end(), y) != cond.end())
            throw ConsistencyError("separating set of " + to_string(x) + " - " + to_string(y) +
                                   " contains an endpoint");
        return entries_.try_emplace(key(x, y), std::move(cond)).second;
    }

    [[nodiscard]] const std::vector<NodeRef>* find(NodeRef x, NodeRef y) const {
        auto it = entries_.find(key(x, y));
        return it == entries_.end() ? nullptr : &it->second;
    }

    [[nodiscard]] bool contains(NodeRef x, NodeRef y) const { return entries_.contains(key(x, y)); }
    bool erase(NodeRef x, NodeRef y) { return entries_.erase(key(x, y)) > 0; }

    /// Entries of `other` not already present are added, in key order.
    void merge(const SeparationLog& other) {
        for (const auto& [k, v] : other.entries_) entries_.try_emplace(k, v);
    }

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] const std::map<NodePair, std::vector<NodeRef>>& entries() const noexcept { return entries_; }

private:
    static NodePair key(NodeRef x, NodeRef y) { return x < y ? NodePair{x, y} : NodePair{y, x}; }
    std::map<NodePair, std::vector<NodeRef>> entries_;
};

struct RankedNode {
    NodeRef node;
    double effect_size = 0.0;
    friend bool operator==(const RankedNode&, const RankedNode&) = default;
};

/// Descending effect size, ties by ascending NodeRef.
inline bool stronger(const RankedNode& x, const RankedNode& y) {
    if (x.effect_size != y.effect_size) return x.effect_size > y.effect_size;
    return x.node < y.node;
}

inline void sort_by_strength(std::vector<RankedNode>& v) { std::sort(v.begin(), v.end(), stronger); }

/// Lagged and contemporaneous adjacents of each X_t^j, strongest first.
struct AdjacencySets {
    std::vector<std::vector<RankedNode>> lagged;
    std::vector<std::vector<RankedNode>> contemporaneous;

    AdjacencySets() = default;
    explicit AdjacencySets(int m) : lagged(m), contemporaneous(m) {}

    [[nodiscard]] int m() const noexcept { return static_cast<int>(lagged.size()); }

    /// Lagged adjacents followed by contemporaneous ones, each in strength order.
    [[nodiscard]] std::vector<RankedNode> combined(int j) const {
        std::vector<RankedNode> out = lagged[j];
        out.insert(out.end(), contemporaneous[j].begin(), contemporaneous[j].end());
        sort_by_strength(out);
        return out;
    }

    friend bool operator==(const AdjacencySets&, const AdjacencySets&) = default;
};

/// Effective sample length shared by every test in a run.
inline int effective_length(int T, int tau_max) { return T - tau_max; }

/// Column for `ref` aligned on the common window: row k refers to target
/// time tau_max + k. C maps to the normalized index k / (n - 1).
inline Eigen::VectorXd lagged_column(const Dataset& data, NodeRef ref, int tau_max) {
    const int n = effective_length(data.T(), tau_max);
    if (tau_max < 0 || n < 2)
        throw AlignmentError("tau_max=" + std::to_string(tau_max) + " leaves no window in T=" +
                             std::to_string(data.T()));
    if (ref.surrogate) {
        Eigen::VectorXd c(n);
        for (int k = 0; k < n; ++k) c[k] = static_cast<double>(k) / static_cast<double>(n - 1);
        return c;
    }
    if (ref.lag < 0 || ref.lag > tau_max)
        throw AlignmentError("lag " + std::to_string(ref.lag) + " exceeds tau_max " + std::to_string(tau_max));
    if (ref.var < 0 || ref.var >= data.m())
        throw AlignmentError("variable index " + std::to_string(ref.var) + " out of range");
    return data.values().col(ref.var).segment(tau_max - ref.lag, n);
}

}  // namespace ecdans
