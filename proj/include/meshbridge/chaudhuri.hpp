#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "meshbridge/graph.hpp"
#include "meshbridge/netsim.hpp"

namespace meshbridge::chaudhuri {

// Back edge from a node to one of its DFS ancestors.
struct Link {
    NodeId from;
    NodeId ancestor;
    auto operator<=>(const Link&) const = default;
};

enum class Phase { idle, search, nontree, done };

struct State {
    std::optional<NodeId> parent;
    std::set<NodeId> children;
    std::set<NodeId> visited_seen;
    std::vector<Link> up_links;
    std::vector<Link> collected;
    std::size_t pending_children = 0;
    bool is_articulation = false;
    Phase phase = Phase::idle;
};

struct MessageCounts {
    std::size_t search = 0;
    std::size_t terminate = 0;
    std::size_t nontree = 0;
    std::size_t total() const { return search + terminate + nontree; }
};

class Protocol : public netsim::PacketHandler {
public:
    // Nodes know their neighbor sets; the engine must use a lossless channel.
    Protocol(netsim::Engine& engine, const Graph& neighbors);

    void start(NodeId root);
    bool finished() const;
    const State& state(NodeId n) const { return states_.at(n); }
    const MessageCounts& counts() const { return counts_; }
    std::set<NodeId> articulation_points() const;

    void on_receive(NodeId node, NodeId from, const netsim::PacketPtr& packet) override;
    void on_timer(NodeId, std::uint64_t) override {}

private:
    void advance(NodeId node);
    void send(NodeId from, NodeId to, netsim::PacketPtr packet);
    void on_terminate(NodeId node);
    void report_up(NodeId node);

    netsim::Engine& engine_;
    const Graph& graph_;
    std::optional<NodeId> root_;
    std::vector<State> states_;
    MessageCounts counts_;
};

struct BaselineResult {
    std::map<NodeId, bool> is_articulation;
    MessageCounts counts;
};

// Runs one DFS from root over a lossless copy of g.
BaselineResult run_baseline(const Graph& g, NodeId root, std::uint64_t seed = 1);

}  // namespace meshbridge::chaudhuri
