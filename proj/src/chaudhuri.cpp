#include "meshbridge/chaudhuri.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace meshbridge::chaudhuri {

namespace {

struct SearchToken : netsim::Packet {
    bool returning = false;
    std::set<NodeId> visited;
    std::string describe() const override {
        return std::string(returning ? "search-return" : "search") + "(" + std::to_string(visited.size()) + ")";
    }
};

struct Terminate : netsim::Packet {
    std::string describe() const override { return "terminate"; }
};

struct NonTree : netsim::Packet {
    std::vector<Link> links;
    std::string describe() const override {
        std::ostringstream out;
        out << "nontree(";
        for (const Link& l : links)
            out << ' ' << l.from << '>' << l.ancestor;
        out << " )";
        return out.str();
    }
};

}  // namespace

Protocol::Protocol(netsim::Engine& engine, const Graph& neighbors)
    : engine_(engine), graph_(neighbors), states_(neighbors.node_count()) {
    if (engine.channel().mode == netsim::ChannelMode::shadowing)
        throw std::invalid_argument("baseline needs a reliable channel");
    if (engine.channel().mode == netsim::ChannelMode::loss_table) {
        for (const Edge& e : neighbors.edges())
            if (engine.link_probability(e.u, e.v) < 1.0 || engine.link_probability(e.v, e.u) < 1.0)
                throw std::invalid_argument("baseline needs a reliable channel");
    }
    if (engine.node_count() != neighbors.node_count())
        throw std::invalid_argument("graph and engine sizes differ");
    engine.set_handler(this);
}

void Protocol::send(NodeId from, NodeId to, netsim::PacketPtr packet) {
    engine_.unicast(from, to, std::move(packet), engine_.now());
}

void Protocol::start(NodeId root) {
    root_ = root;
    State& st = states_.at(root);
    st.phase = Phase::search;
    st.visited_seen.insert(root);
    advance(root);
}

bool Protocol::finished() const {
    return root_ && states_[*root_].phase == Phase::done;
}

void Protocol::advance(NodeId node) {
    State& st = states_[node];
    for (NodeId next : graph_.neighbors(node)) {
        if (st.visited_seen.count(next))
            continue;
        auto token = std::make_shared<SearchToken>();
        token->visited = st.visited_seen;
        ++counts_.search;
        send(node, next, std::move(token));
        return;
    }
    if (st.parent) {
        auto token = std::make_shared<SearchToken>();
        token->returning = true;
        token->visited = st.visited_seen;
        ++counts_.search;
        send(node, *st.parent, std::move(token));
        return;
    }
    // Root finished the traversal.
    st.is_articulation = st.children.size() >= 2;
    on_terminate(node);
}

void Protocol::on_terminate(NodeId node) {
    State& st = states_[node];
    st.phase = Phase::nontree;
    st.pending_children = st.children.size();
    for (NodeId child : st.children) {
        ++counts_.terminate;
        send(node, child, std::make_shared<Terminate>());
    }
    if (st.children.empty())
        report_up(node);
}

void Protocol::report_up(NodeId node) {
    State& st = states_[node];
    st.phase = Phase::done;
    if (!st.parent)
        return;
    auto msg = std::make_shared<NonTree>();
    msg->links = st.up_links;
    msg->links.insert(msg->links.end(), st.collected.begin(), st.collected.end());
    ++counts_.nontree;
    send(node, *st.parent, std::move(msg));
}

void Protocol::on_receive(NodeId node, NodeId from, const netsim::PacketPtr& packet) {
    State& st = states_.at(node);
    if (auto token = dynamic_cast<const SearchToken*>(packet.get())) {
        if (token->returning) {
            st.children.insert(from);
            st.visited_seen = token->visited;
        } else {
            st.parent = from;
            st.phase = Phase::search;
            st.visited_seen = token->visited;
            for (NodeId nb : graph_.neighbors(node))
                if (nb != from && st.visited_seen.count(nb))
                    st.up_links.push_back({node, nb});
            st.visited_seen.insert(node);
        }
        advance(node);
    } else if (dynamic_cast<const Terminate*>(packet.get())) {
        on_terminate(node);
    } else if (auto nontree = dynamic_cast<const NonTree*>(packet.get())) {
        bool escapes = false;
        for (const Link& l : nontree->links) {
            if (l.ancestor == node)
                continue;
            escapes = true;
            st.collected.push_back(l);
        }
        if (!escapes && st.parent)
            st.is_articulation = true;
        if (--st.pending_children == 0)
            report_up(node);
    }
}

std::set<NodeId> Protocol::articulation_points() const {
    std::set<NodeId> out;
    for (NodeId n = 0; n < states_.size(); ++n)
        if (states_[n].is_articulation)
            out.insert(n);
    return out;
}

BaselineResult run_baseline(const Graph& g, NodeId root, std::uint64_t seed) {
    netsim::ChannelConfig channel;
    channel.unicast_attempts = 1;
    netsim::Engine engine(netsim::LossTable::from_graph(g, 1.0), channel, seed);
    Protocol protocol(engine, g);
    protocol.start(root);
    engine.run();
    if (!protocol.finished() && g.node_count() > 0)
        throw std::logic_error("baseline did not terminate");
    BaselineResult result;
    for (NodeId n = 0; n < g.node_count(); ++n)
        result.is_articulation[n] = protocol.state(n).is_articulation;
    result.counts = protocol.counts();
    return result;
}

}  // namespace meshbridge::chaudhuri
