#pragma once

// One DIBADAWN network over a lossless link graph, with scripted explorer losses.

#include <initializer_list>
#include <set>
#include <utility>

#include "meshbridge/dibadawn.hpp"
#include "meshbridge/netsim.hpp"

namespace meshbridge::testing {

struct Harness {
    netsim::Engine engine;
    dibadawn::Protocol protocol;

    Harness(const Graph& g, dibadawn::ProtocolConfig cfg = {}, std::uint64_t seed = 1)
        : engine(netsim::LossTable::from_graph(g), netsim::ChannelConfig{}, seed),
          protocol(engine, with_trace(cfg)) {}

    static dibadawn::ProtocolConfig with_trace(dibadawn::ProtocolConfig cfg) {
        cfg.record_trace = true;
        return cfg;
    }

    // Drops the explorer broadcast from `from` at `to`.
    void lose_explorers(std::set<std::pair<NodeId, NodeId>> lost) {
        engine.set_drop_filter([lost](const netsim::Reception& r) {
            return r.is_broadcast && dynamic_cast<const dibadawn::ForwardMessage*>(r.packet) &&
                   lost.count({r.sender, r.receiver}) > 0;
        });
    }

    ExplorerId search_from(NodeId initiator) {
        ExplorerId id = protocol.start_search(initiator);
        engine.run();
        return id;
    }

    std::set<Edge> bridges_at(NodeId n) const { return protocol.node(n).query_results().bridges; }
    bool articulation_at(NodeId n) const { return protocol.node(n).query_results().is_articulation; }
};

inline Graph make_graph(std::size_t n, std::initializer_list<std::pair<NodeId, NodeId>> edges) {
    Graph g(n);
    for (auto [a, b] : edges)
        g.add_edge(a, b);
    return g;
}

}  // namespace meshbridge::testing
