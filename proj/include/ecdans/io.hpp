#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "ecdans/discover.hpp"
#include "ecdans/model.hpp"

namespace ecdans {

using Json = nlohmann::ordered_json;

inline constexpr int kGraphSchemaVersion = 1;

/// Shortest decimal form that round-trips.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw Error("cannot format number");
    return std::string(buf, ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace detail

/// Comma-separated numeric table with a header row of variable names.
inline Dataset read_csv(std::istream& in, const std::string& source = "<csv>") {
    auto where = [&](std::size_t line, std::size_t col) {
        return source + ":" + std::to_string(line) + (col ? ":" + std::to_string(col) : std::string{}) + ": ";
    };
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> names;
    while (names.empty() && std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
        std::unordered_set<std::string> seen;
        std::size_t col = 0;
        for (auto cell : detail::split_commas(line)) {
            ++col;
            if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
            if (cell.empty()) throw ParseError(where(line_no, col) + "empty column name");
            if (!seen.insert(std::string(cell)).second)
                throw ParseError(where(line_no, col) + "duplicate column name '" + std::string(cell) + "'");
            names.emplace_back(cell);
        }
    }
    if (names.empty()) throw ParseError(source + ": empty input, expected a header row");

    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_commas(line);
        if (cells.size() != names.size())
            throw ParseError(where(line_no, 0) + "expected " + std::to_string(names.size()) + " fields, got " +
                             std::to_string(cells.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v = 0.0;
            const auto cell = cells[c];
            const char* first = cell.data();
            if (!cell.empty() && *first == '+') ++first;
            auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size())
                throw ParseError(where(line_no, c + 1) + "non-numeric value '" + std::string(cell) + "'");
            if (!std::isfinite(v)) throw ParseError(where(line_no, c + 1) + "non-finite value '" + std::string(cell) + "'");
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw ParseError(source + ": no data rows");
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(names.size()));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < names.size(); ++c)
            M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * names.size() + c];
    return Dataset(std::move(M), std::move(names));
}

inline void write_csv(const Dataset& data, std::ostream& out) {
    for (std::size_t c = 0; c < data.names().size(); ++c) out << (c ? "," : "") << data.names()[c];
    out << '\n';
    for (int r = 0; r < data.T(); ++r) {
        for (int c = 0; c < data.m(); ++c) out << (c ? "," : "") << format_double(data.values()(r, c));
        out << '\n';
    }
}

// graph JSON

inline Json node_to_json(NodeRef n) {
    if (n.surrogate) return "C";
    return Json{{"var", n.var}, {"lag", n.lag}};
}

inline Json graph_to_json(const WindowGraph& g) {
    Json edges = Json::array();
    for (const auto& e : g.edges()) {
        const char* dir = e.orientation == Orientation::AtoB ? "ab" : e.orientation == Orientation::BtoA ? "ba" : "und";
        edges.push_back(Json{{"a", node_to_json(e.a)}, {"b", node_to_json(e.b)}, {"dir", dir}});
    }
    return Json{{"schema", kGraphSchemaVersion},
                {"m", g.m()},
                {"tau_max", g.tau_max()},
                {"changing_modules", g.changing_modules()},
                {"edges", std::move(edges)}};
}

inline std::string serialize_graph(const WindowGraph& g) { return graph_to_json(g).dump(2) + "\n"; }

namespace detail {

inline const Json& field(const Json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw ParseError("graph JSON: '" + path + "' must be an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError("graph JSON: missing field '" + path + "." + key + "'");
    return *it;
}

inline int int_field(const Json& obj, const char* key, const std::string& path) {
    const Json& v = field(obj, key, path);
    if (!v.is_number_integer()) throw ParseError("graph JSON: field '" + path + "." + key + "' must be an integer");
    return v.get<int>();
}

inline NodeRef node_from_json(const Json& j, const std::string& path) {
    if (j.is_string()) {
        if (j.get<std::string>() != "C") throw ParseError("graph JSON: field '" + path + "' must be \"C\" or {var, lag}");
        return NodeRef::time();
    }
    return NodeRef::variable(int_field(j, "var", path), int_field(j, "lag", path));
}

}  // namespace detail

inline WindowGraph graph_from_json(const Json& j) {
    const std::string root = "$";
    const int schema = detail::int_field(j, "schema", root);
    if (schema != kGraphSchemaVersion)
        throw ParseError("graph JSON: field '$.schema' has unsupported version " + std::to_string(schema));
    const int m = detail::int_field(j, "m", root);
    const int tau_max = detail::int_field(j, "tau_max", root);
    if (m < 1) throw ParseError("graph JSON: field '$.m' must be >= 1");
    if (tau_max < 0) throw ParseError("graph JSON: field '$.tau_max' must be >= 0");
    WindowGraph g(m, tau_max);

    const Json& edges = detail::field(j, "edges", root);
    if (!edges.is_array()) throw ParseError("graph JSON: field '$.edges' must be an array");
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const std::string path = "$.edges[" + std::to_string(k) + "]";
        const NodeRef a = detail::node_from_json(detail::field(edges[k], "a", path), path + ".a");
        const NodeRef b = detail::node_from_json(detail::field(edges[k], "b", path), path + ".b");
        const Json& dir = detail::field(edges[k], "dir", path);
        if (!dir.is_string()) throw ParseError("graph JSON: field '" + path + ".dir' must be a string");
        const auto d = dir.get<std::string>();
        if (g.has_edge(a, b)) throw ParseError("graph JSON: field '" + path + "' duplicates an earlier edge");
        try {
            if (d == "und") g.add_edge(a, b);
            else if (d == "ab") g.add_directed(a, b);
            else if (d == "ba") g.add_directed(b, a);
            else throw ParseError("graph JSON: field '" + path + ".dir' must be \"ab\", \"ba\" or \"und\"");
        } catch (const ParseError&) {
            throw;
        } catch (const ValidationError& e) {
            throw ParseError("graph JSON: field '" + path + "': " + e.what());
        }
    }

    const Json& cm = detail::field(j, "changing_modules", root);
    if (!cm.is_array()) throw ParseError("graph JSON: field '$.changing_modules' must be an array");
    std::vector<int> listed;
    for (const auto& v : cm) {
        if (!v.is_number_integer()) throw ParseError("graph JSON: field '$.changing_modules' must hold integers");
        listed.push_back(v.get<int>());
    }
    std::sort(listed.begin(), listed.end());
    if (listed != g.changing_modules())
        throw ParseError("graph JSON: field '$.changing_modules' disagrees with the C edges");
    return g;
}

inline WindowGraph parse_graph(std::istream& in) {
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("graph JSON: ") + e.what());
    }
    return graph_from_json(j);
}

inline WindowGraph parse_graph(const std::string& text) {
    std::istringstream in(text);
    return parse_graph(in);
}

// DOT

inline void write_dot(const WindowGraph& g, std::ostream& out) {
    auto q = [](NodeRef n) { return "\"" + to_string(n) + "\""; };
    out << "digraph window {\n  rankdir=LR;\n";
    for (int lag = g.tau_max(); lag >= 0; --lag) {
        out << "  { rank=same;";
        for (int v = 0; v < g.m(); ++v) out << ' ' << q(NodeRef::variable(v, lag)) << ';';
        out << " }\n";
    }
    out << "  " << q(NodeRef::time()) << " [shape=box];\n";
    for (const auto& e : g.edges()) {
        if (e.orientation == Orientation::BtoA) out << "  " << q(e.b) << " -> " << q(e.a) << ";\n";
        else out << "  " << q(e.a) << " -> " << q(e.b) << (e.directed() ? ";\n" : " [dir=none];\n");
    }
    out << "}\n";
}

// run report

inline Json report_to_json(const DiscoveryResult& r) {
    Json phases = Json::array();
    std::size_t total = 0;
    for (const auto& p : r.phases) {
        phases.push_back(Json{{"phase", p.phase}, {"tests", p.tests}, {"runtime_ms", p.runtime_ms}});
        total += p.tests;
    }
    Json diags = Json::array();
    for (const auto& d : r.diagnostics)
        diags.push_back(Json{{"edge", to_string(d.edge.first) + " - " + to_string(d.edge.second)},
                             {"rule", d.rule},
                             {"reason", d.reason}});
    return Json{{"phases", std::move(phases)},
                {"total_tests", total},
                {"skeleton_edges", r.skeleton.size()},
                {"separations", r.log.size()},
                {"diagnostics", std::move(diags)}};
}

}  // namespace ecdans
