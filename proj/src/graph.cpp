#include "meshbridge/graph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace meshbridge {

std::string to_string(const Edge& e) {
    return std::to_string(e.u) + "-" + std::to_string(e.v);
}

Graph::Graph(std::size_t node_count) : adjacency_(node_count) {}

void Graph::check(NodeId n) const {
    if (n >= adjacency_.size())
        throw std::out_of_range("unknown node " + std::to_string(n));
}

bool Graph::add_edge(NodeId a, NodeId b) {
    check(a);
    check(b);
    if (a == b)
        throw std::invalid_argument("self-loop on node " + std::to_string(a));
    if (!edges_.insert(Edge(a, b)).second)
        return false;
    auto insert_sorted = [](std::vector<NodeId>& list, NodeId n) {
        list.insert(std::lower_bound(list.begin(), list.end(), n), n);
    };
    insert_sorted(adjacency_[a], b);
    insert_sorted(adjacency_[b], a);
    return true;
}

bool Graph::remove_edge(NodeId a, NodeId b) {
    check(a);
    check(b);
    if (edges_.erase(Edge(a, b)) == 0)
        return false;
    auto erase_sorted = [](std::vector<NodeId>& list, NodeId n) {
        list.erase(std::lower_bound(list.begin(), list.end(), n));
    };
    erase_sorted(adjacency_[a], b);
    erase_sorted(adjacency_[b], a);
    return true;
}

bool Graph::has_edge(NodeId a, NodeId b) const {
    if (a == b || a >= adjacency_.size() || b >= adjacency_.size())
        return false;
    return edges_.count(Edge(a, b)) > 0;
}

std::span<const NodeId> Graph::neighbors(NodeId n) const {
    check(n);
    return adjacency_[n];
}

namespace {

// Labels every node with a component index; skips the removed node/edge.
std::vector<int> label_components(const Graph& g, std::optional<NodeId> removed_node,
                                  std::optional<Edge> removed_edge, int& count) {
    const std::size_t n = g.node_count();
    std::vector<int> label(n, -1);
    std::vector<NodeId> stack;
    count = 0;
    for (NodeId start = 0; start < n; ++start) {
        if (label[start] >= 0 || (removed_node && *removed_node == start))
            continue;
        label[start] = count;
        stack.push_back(start);
        while (!stack.empty()) {
            NodeId cur = stack.back();
            stack.pop_back();
            for (NodeId next : g.neighbors(cur)) {
                if (label[next] >= 0 || (removed_node && *removed_node == next))
                    continue;
                if (removed_edge && *removed_edge == Edge(cur, next))
                    continue;
                label[next] = count;
                stack.push_back(next);
            }
        }
        ++count;
    }
    return label;
}

}  // namespace

std::vector<std::vector<NodeId>> connected_components(const Graph& g) {
    int count = 0;
    auto label = label_components(g, std::nullopt, std::nullopt, count);
    std::vector<std::vector<NodeId>> out(count);
    for (NodeId n = 0; n < g.node_count(); ++n)
        out[label[n]].push_back(n);
    return out;
}

std::size_t component_count(const Graph& g, std::optional<NodeId> removed_node,
                            std::optional<Edge> removed_edge) {
    int count = 0;
    label_components(g, removed_node, removed_edge, count);
    return static_cast<std::size_t>(count);
}

BiconnectivityReport tarjan_report(const Graph& g) {
    const std::size_t n = g.node_count();
    BiconnectivityReport report;
    report.components = connected_components(g);

    constexpr std::uint32_t unvisited = 0;
    std::vector<std::uint32_t> order(n, unvisited), low(n, 0);
    std::vector<NodeId> parent(n, 0);
    std::uint32_t counter = 0;

    struct Frame {
        NodeId node;
        std::size_t next_index;
    };
    std::vector<Frame> stack;

    for (NodeId root = 0; root < n; ++root) {
        if (order[root] != unvisited)
            continue;
        order[root] = low[root] = ++counter;
        parent[root] = root;
        std::size_t root_children = 0;
        stack.push_back({root, 0});
        while (!stack.empty()) {
            Frame& top = stack.back();
            auto adj = g.neighbors(top.node);
            if (top.next_index < adj.size()) {
                NodeId next = adj[top.next_index++];
                if (order[next] == unvisited) {
                    parent[next] = top.node;
                    order[next] = low[next] = ++counter;
                    if (top.node == root)
                        ++root_children;
                    stack.push_back({next, 0});
                } else if (next != parent[top.node]) {
                    low[top.node] = std::min(low[top.node], order[next]);
                }
                continue;
            }
            NodeId done = top.node;
            stack.pop_back();
            if (stack.empty())
                break;
            NodeId up = stack.back().node;
            low[up] = std::min(low[up], low[done]);
            if (low[done] > order[up])
                report.bridges.insert(Edge(up, done));
            if (up != root && low[done] >= order[up])
                report.articulation_points.insert(up);
        }
        if (root_children >= 2)
            report.articulation_points.insert(root);
    }
    return report;
}

BiconnectivityReport brute_force_report(const Graph& g) {
    BiconnectivityReport report;
    report.components = connected_components(g);
    const std::size_t base = report.components.size();
    for (const Edge& e : g.edges())
        if (component_count(g, std::nullopt, e) > base)
            report.bridges.insert(e);
    for (NodeId v = 0; v < g.node_count(); ++v)
        if (component_count(g, v, std::nullopt) > base)
            report.articulation_points.insert(v);
    return report;
}

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

ParsedGraph parse_graph(std::istream& in) {
    std::optional<ParsedGraph> parsed;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        std::istringstream line(raw);
        std::string first;
        if (!(line >> first))
            continue;
        if (!parsed) {
            long long count = -1;
            if (first != "nodes" || !(line >> count) || count < 0)
                throw ParseError(line_no, "expected 'nodes N' header");
            parsed = ParsedGraph{Graph(static_cast<std::size_t>(count)), {}};
        } else {
            long long a = -1, b = -1;
            std::istringstream head(first);
            if (!(head >> a) || !head.eof() || !(line >> b))
                throw ParseError(line_no, "expected 'u v [etx]'");
            const auto n = static_cast<long long>(parsed->graph.node_count());
            if (a < 0 || b < 0 || a >= n || b >= n)
                throw ParseError(line_no, "node id out of range");
            if (a == b)
                throw ParseError(line_no, "self-loop");
            double etx = 0;
            bool annotated = false;
            if (line >> etx) {
                annotated = true;
            } else if (!line.eof()) {
                throw ParseError(line_no, "bad etx annotation");
            }
            std::string rest;
            if (line.clear(), line >> rest)
                throw ParseError(line_no, "trailing tokens");
            Edge e(static_cast<NodeId>(a), static_cast<NodeId>(b));
            if (!parsed->graph.add_edge(e.u, e.v))
                throw ParseError(line_no, "duplicate edge " + to_string(e));
            if (annotated)
                parsed->etx[e] = etx;
        }
    }
    if (!parsed)
        throw ParseError(line_no, "missing 'nodes N' header");
    return std::move(*parsed);
}

ParsedGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    return parse_graph(in);
}

void write_graph(std::ostream& out, const Graph& g) {
    out << "nodes " << g.node_count() << '\n';
    for (const Edge& e : g.edges())
        out << e.u << ' ' << e.v << '\n';
}

Graph apply_etx_cut(const ParsedGraph& parsed, double threshold) {
    Graph out(parsed.graph.node_count());
    for (const Edge& e : parsed.graph.edges()) {
        auto it = parsed.etx.find(e);
        if (it == parsed.etx.end() || it->second <= threshold)
            out.add_edge(e.u, e.v);
    }
    return out;
}

}  // namespace meshbridge
