#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace meshbridge {

using NodeId = std::uint32_t;

// Undirected edge, stored with u < v.
struct Edge {
    NodeId u = 0;
    NodeId v = 0;

    Edge() = default;
    Edge(NodeId a, NodeId b) : u(a < b ? a : b), v(a < b ? b : a) {}

    auto operator<=>(const Edge&) const = default;
};

std::string to_string(const Edge& e);

class Graph {
public:
    explicit Graph(std::size_t node_count = 0);

    std::size_t node_count() const { return adjacency_.size(); }
    std::size_t edge_count() const { return edges_.size(); }

    // Returns false when the edge already exists. Throws on self-loops and unknown nodes.
    bool add_edge(NodeId a, NodeId b);
    bool remove_edge(NodeId a, NodeId b);
    bool has_edge(NodeId a, NodeId b) const;

    // Sorted ascending.
    std::span<const NodeId> neighbors(NodeId n) const;
    const std::set<Edge>& edges() const { return edges_; }

private:
    void check(NodeId n) const;

    std::vector<std::vector<NodeId>> adjacency_;
    std::set<Edge> edges_;
};

struct BiconnectivityReport {
    std::set<Edge> bridges;
    std::set<NodeId> articulation_points;
    // Each component sorted; components ordered by smallest member.
    std::vector<std::vector<NodeId>> components;

    bool operator==(const BiconnectivityReport&) const = default;
};

std::vector<std::vector<NodeId>> connected_components(const Graph& g);
std::size_t component_count(const Graph& g, std::optional<NodeId> removed_node = std::nullopt,
                             std::optional<Edge> removed_edge = std::nullopt);

BiconnectivityReport tarjan_report(const Graph& g);
// Removal-and-count reference implementation.
BiconnectivityReport brute_force_report(const Graph& g);

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Text format: a "nodes N" header, then one "u v [etx]" line per edge. '#' starts a comment.
struct ParsedGraph {
    Graph graph;
    std::map<Edge, double> etx;
};

ParsedGraph parse_graph(std::istream& in);
ParsedGraph load_graph(const std::string& path);
void write_graph(std::ostream& out, const Graph& g);

// Keeps edges whose annotation is at most the threshold; unannotated edges stay.
Graph apply_etx_cut(const ParsedGraph& parsed, double threshold);

}  // namespace meshbridge
