#include "meshbridge/dibadawn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace meshbridge::dibadawn {

double ProtocolConfig::slot_time() const {
    if (backward_slot_time)
        return *backward_slot_time;
    return jitter_max() + (unicast_attempts + 1) * max_tx_time;
}

void ProtocolConfig::validate() const {
    if (initial_ttl < 1)
        throw std::invalid_argument("initial TTL must be at least 1");
    if (!(max_traversal_time > 0))
        throw std::invalid_argument("max traversal time must be positive");
    if (!(jitter_divisor > 0))
        throw std::invalid_argument("jitter divisor must be positive");
    if (!(max_tx_time >= 0) || unicast_attempts < 1)
        throw std::invalid_argument("bad transmission parameters");
    if (!(slot_time() >= 0))
        throw std::invalid_argument("backward slot time must be non-negative");
    if (history_window < 1)
        throw std::invalid_argument("history window must be at least 1");
}

double competence(int hops) {
    static constexpr double table[] = {
        0.95,      0.90,      0.9954834, 0.9944834, 0.9932621, 0.9917703, 0.9899482,
        0.9877227, 0.9850044, 0.9816844, 0.9776292, 0.9726763, 0.9666267, 0.9592378,
        0.9502129, 0.9391899, 0.9257264, 0.9092820, 0.8891968, 0.8646647,
    };
    if (hops < 1)
        throw std::domain_error("competence needs hops >= 1");
    if (hops > 20)
        return 0.85;
    return table[hops - 1];
}

ForwardDelay compute_forward_delay(double forwarder_jitter, const ProtocolConfig& cfg, double own_jitter) {
    ForwardDelay d;
    d.own_jitter = own_jitter;
    d.min_delay = cfg.max_traversal_time - forwarder_jitter - cfg.max_tx_time;
    if (d.min_delay < 0) {
        d.min_delay = 0;
        d.clamped = true;
    }
    return d;
}

double compute_timeout(int hop_distance, int initial_ttl, const ProtocolConfig& cfg) {
    if (hop_distance < 0 || hop_distance > initial_ttl)
        throw std::domain_error("hop distance outside [0, initial TTL]");
    return (initial_ttl - hop_distance) * (cfg.max_traversal_time + cfg.slot_time());
}

CycleId CycleId::make(const ExplorerId& search, NodeId a, NodeId b) {
    CycleId c{{search.key(), a, b}};
    std::sort(c.values.begin(), c.values.end());
    return c;
}

std::string ForwardMessage::describe() const {
    std::ostringstream out;
    out << "fwd(" << to_string(explorer) << " ttl=" << ttl << " by=" << forwarded_by << " tp=";
    if (tree_parent)
        out << *tree_parent;
    else
        out << '-';
    out << " hops=" << hops_traveled << ')';
    return out.str();
}

std::string BackwardMessage::describe() const {
    std::ostringstream out;
    out << "back(" << to_string(search) << " from=" << sender;
    if (bridge_marker)
        out << " bridge";
    for (const CycleItem& item : items)
        out << " c" << item.cycle.values[0] << '.' << item.cycle.values[1] << '.' << item.cycle.values[2] << '/'
            << item.hops;
    out << ')';
    return out.str();
}

void StatementStore::push(const std::optional<Edge>& subject, const voting::Statement& s) {
    auto& ring = subject ? edges_[*subject] : self_;
    ring.push_back(s);
    while (ring.size() > capacity_)
        ring.pop_front();
}

namespace {

bool vote_on(const std::deque<voting::Statement>& ring, const voting::RuleConfig& cfg) {
    std::vector<voting::Statement> window(ring.begin(), ring.end());
    return voting::vote(window, cfg);
}

}  // namespace

Published publish(const StatementStore& store, const std::set<Edge>& last_bridges, bool last_articulation,
                  bool any_search, const PublishRule& rule) {
    Published out;
    if (!any_search)
        return out;
    if (rule.bridges) {
        for (const auto& [edge, ring] : store.edges())
            if (vote_on(ring, *rule.bridges))
                out.bridges.insert(edge);
    } else {
        out.bridges = last_bridges;
    }
    out.is_articulation = rule.articulation ? vote_on(store.self(), *rule.articulation) : last_articulation;
    return out;
}

Node::Node(NodeId id, netsim::Transport& transport, const ProtocolConfig& cfg, ProtocolStats& stats, Trace* trace)
    : id_(id), net_(transport), cfg_(cfg), stats_(stats), trace_(trace), store_(cfg.history_window) {}

const SearchState* Node::active(const ExplorerId& search) const {
    auto it = active_.find(search.key());
    return it == active_.end() ? nullptr : &it->second;
}

ExplorerId Node::start_search() {
    ExplorerId search{id_, next_sequence_++};
    const double start = net_.now();
    SearchState& st = active_[search.key()];
    st.search = search;
    st.visited = true;
    st.hop_distance = 0;
    st.my_ttl = cfg_.initial_ttl;
    st.timer = net_.set_timer(id_, compute_timeout(0, cfg_.initial_ttl, cfg_), search.key());
    ++stats_.searches_started;

    auto msg = std::make_shared<ForwardMessage>();
    msg->explorer = search;
    msg->ttl = cfg_.initial_ttl - 1;
    msg->forwarded_by = id_;
    msg->hops_traveled = 0;
    msg->forwarder_jitter = net_.uniform(0, cfg_.jitter_max());
    const double at = start + msg->forwarder_jitter;
    net_.broadcast(id_, std::move(msg), at);

    if (trace_)
        trace_->visits.push_back({search, id_, std::nullopt, 0, start});
    return search;
}

void Node::log_token(SearchState& st, NodeId neighbor, const SearchState::Token& t) {
    st.neighbor_log[neighbor].insert(t);
}

void Node::mark(SearchState& st, Verdict verdict, NodeId neighbor, double comp) {
    EdgeMarking m{net_.now(), st.search, verdict, Edge(id_, neighbor), comp};
    auto [it, inserted] = st.markings.emplace(m.edge, m);
    if (inserted)
        return;
    EdgeMarking& cur = it->second;
    if (verdict != Verdict::no_bridge)
        return;
    if (cur.verdict == Verdict::bridge)
        cur = m;
    else
        cur.competence = std::max(cur.competence, comp);
}

void Node::on_forward(const ForwardMessage& msg) {
    const std::uint64_t key = msg.explorer.key();
    if (finished_.count(key))
        return;
    auto it = active_.find(key);
    if (it == active_.end()) {
        SearchState& st = active_[key];
        st.search = msg.explorer;
        st.visited = true;
        st.parent = msg.forwarded_by;
        st.hop_distance = msg.hops_traveled + 1;
        st.my_ttl = msg.ttl;

        ForwardDelay delay = compute_forward_delay(msg.forwarder_jitter, cfg_, net_.uniform(0, cfg_.jitter_max()));
        if (delay.clamped) {
            ++stats_.clamped_delays;
            net_.note(id_, "forward delay clamped");
        }
        const double anchor = net_.now() + delay.min_delay;
        const int hop_for_timer = std::min(st.hop_distance, cfg_.initial_ttl);
        st.timer = net_.set_timer(id_, delay.min_delay + compute_timeout(hop_for_timer, cfg_.initial_ttl, cfg_), key);
        if (trace_)
            trace_->visits.push_back({st.search, id_, st.parent, st.hop_distance, net_.now()});

        if (st.my_ttl > 0) {
            auto out = std::make_shared<ForwardMessage>();
            out->explorer = msg.explorer;
            out->ttl = st.my_ttl - 1;
            out->forwarded_by = id_;
            out->tree_parent = st.parent;
            out->hops_traveled = st.hop_distance;
            out->forwarder_jitter = delay.own_jitter;
            net_.broadcast(id_, std::move(out), anchor + delay.own_jitter);
        }
        return;
    }

    SearchState& st = it->second;
    if (msg.tree_parent && *msg.tree_parent == id_)
        return;
    if (cfg_.asymmetry_guard && std::abs(st.hop_distance - msg.hops_traveled) > 1) {
        ++stats_.asymmetric_cross_edges;
        net_.note(id_, "asymmetric cross edge to " + std::to_string(msg.forwarded_by) + " ignored");
        return;
    }
    for (const auto& ce : st.cross_edges)
        if (ce.neighbor == msg.forwarded_by)
            return;
    CycleId cycle = CycleId::make(st.search, id_, msg.forwarded_by);
    st.cross_edges.push_back({msg.forwarded_by, cycle, msg.hops_traveled});
    log_token(st, msg.forwarded_by, {false, cycle.values});
}

void Node::detect_cycles(SearchState& st) {
    for (const auto& ce : st.cross_edges) {
        mark(st, Verdict::no_bridge, ce.neighbor, 1.0);
        log_token(st, ce.neighbor, {false, ce.cycle.values});
        st.out_buffer.push_back({ce.cycle, 0, id_});
        if (trace_)
            trace_->detected.push_back({st.search, id_, ce.cycle});
    }
}

void Node::flush(SearchState& st) {
    if (trace_)
        trace_->flushes.push_back({st.search, id_, st.hop_distance, net_.now()});
    if (!st.parent) {
        if (!st.out_buffer.empty())
            ++stats_.dropped_at_root;
        return;
    }
    auto msg = std::make_shared<BackwardMessage>();
    msg->search = st.search;
    msg->sender = id_;
    if (st.out_buffer.empty()) {
        msg->bridge_marker = true;
        mark(st, Verdict::bridge, *st.parent, 1.0);
        log_token(st, *st.parent, {true, {st.search.key(), id_, 0}});
    } else {
        for (const auto& item : st.out_buffer) {
            msg->items.push_back({item.cycle, item.hops_received + 1});
            log_token(st, *st.parent, {false, item.cycle.values});
            if (trace_)
                trace_->sent_up.push_back({st.search, id_, item.cycle});
        }
        st.out_buffer.clear();
    }
    const double jitter = cfg_.backward_jitter ? net_.uniform(0, cfg_.jitter_max()) : 0.0;
    net_.unicast(id_, *st.parent, std::move(msg), net_.now() + jitter);
}

void Node::on_backward(const BackwardMessage& msg) {
    auto it = active_.find(msg.search.key());
    if (it == active_.end()) {
        ++stats_.stale_backward;
        net_.note(id_, "backward message for unknown or finished search " + to_string(msg.search) + " dropped");
        return;
    }
    SearchState& st = it->second;
    if (msg.bridge_marker) {
        mark(st, Verdict::bridge, msg.sender, 1.0);
        log_token(st, msg.sender, {true, {st.search.key(), msg.sender, 0}});
        return;
    }
    for (const CycleItem& item : msg.items) {
        log_token(st, msg.sender, {false, item.cycle.values});
        auto match = std::find_if(st.out_buffer.begin(), st.out_buffer.end(),
                                  [&](const SearchState::Buffered& b) { return b.cycle == item.cycle; });
        if (match == st.out_buffer.end()) {
            st.out_buffer.push_back({item.cycle, item.hops, msg.sender});
            continue;
        }
        mark(st, Verdict::no_bridge, msg.sender, competence(item.hops));
        mark(st, Verdict::no_bridge, match->from, match->hops_received > 0 ? competence(match->hops_received) : 1.0);
        log_token(st, match->from, {false, item.cycle.values});
        if (trace_)
            trace_->eliminated.push_back({st.search, id_, item.cycle});
        st.out_buffer.erase(match);
    }
}

bool Node::detect_articulation(const SearchState& st) const {
    std::vector<NodeId> members;
    for (const auto& entry : st.neighbor_log)
        if (!entry.second.empty())
            members.push_back(entry.first);
    if (members.size() < 2)
        return false;

    std::vector<std::size_t> root(members.size());
    std::iota(root.begin(), root.end(), 0);
    auto find = [&](std::size_t i) {
        while (root[i] != i)
            i = root[i] = root[root[i]];
        return i;
    };
    std::map<SearchState::Token, std::size_t> first_holder;
    for (std::size_t i = 0; i < members.size(); ++i)
        for (const auto& token : st.neighbor_log.at(members[i])) {
            auto [pos, inserted] = first_holder.emplace(token, i);
            if (!inserted)
                root[find(i)] = find(pos->second);
        }
    std::size_t classes = 0;
    for (std::size_t i = 0; i < members.size(); ++i)
        if (find(i) == i)
            ++classes;
    return classes >= 2;
}

void Node::forget_stale_and_store(const SearchState& st, bool is_articulation) {
    ++round_;
    const double now = net_.now();
    auto emit = [&](const std::optional<Edge>& subject, const voting::Statement& s, bool implicit) {
        store_.push(subject, s);
        if (sink_ && *sink_)
            (*sink_)(StatementRecord{round_, epoch_, now, id_, st.search, subject, s, implicit});
    };

    std::vector<Edge> absent;
    for (const auto& entry : store_.edges())
        if (!st.markings.count(entry.first))
            absent.push_back(entry.first);

    last_markings_.clear();
    last_bridges_.clear();
    for (const auto& [edge, m] : st.markings) {
        last_markings_.push_back(m);
        if (m.verdict == Verdict::bridge)
            last_bridges_.insert(edge);
        emit(edge, {m.verdict == Verdict::bridge, m.competence, st.search, now}, false);
    }
    for (const Edge& edge : absent)
        emit(edge, {false, 1.0, st.search, now}, true);
    last_articulation_ = is_articulation;
    emit(std::nullopt, {is_articulation, 1.0, st.search, now}, false);
}

void Node::on_timeout(const ExplorerId& search) {
    auto it = active_.find(search.key());
    if (it == active_.end())
        return;
    SearchState& st = it->second;
    detect_cycles(st);
    flush(st);
    bool articulation = detect_articulation(st);
    forget_stale_and_store(st, articulation);
    finished_.insert(search.key());
    active_.erase(it);
    ++stats_.searches_completed;
}

Published Node::query_results(const PublishRule& rule) const {
    return publish(store_, last_bridges_, last_articulation_, round_ > 0, rule);
}

Protocol::Protocol(netsim::Engine& engine, ProtocolConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    nodes_.reserve(engine.node_count());
    for (NodeId n = 0; n < engine.node_count(); ++n)
        nodes_.emplace_back(n, engine, cfg_, stats_, cfg_.record_trace ? &trace_ : nullptr);
    engine.set_handler(this);
}

NetworkView Protocol::network_view(const PublishRule& rule) const {
    NetworkView all;
    for (const Node& n : nodes_) {
        Published p = n.query_results(rule);
        all.bridges.insert(p.bridges.begin(), p.bridges.end());
        if (p.is_articulation)
            all.articulation_points.insert(n.id());
    }
    return all;
}

void Protocol::set_statement_sink(std::function<void(const StatementRecord&)> sink) {
    sink_ = std::move(sink);
    for (Node& n : nodes_)
        n.set_statement_sink(&sink_);
}

void Protocol::set_epoch(std::size_t epoch) {
    for (Node& n : nodes_)
        n.set_epoch(epoch);
}

void Protocol::on_receive(NodeId node, NodeId, const netsim::PacketPtr& packet) {
    if (auto fwd = dynamic_cast<const ForwardMessage*>(packet.get()))
        nodes_.at(node).on_forward(*fwd);
    else if (auto back = dynamic_cast<const BackwardMessage*>(packet.get()))
        nodes_.at(node).on_backward(*back);
}

void Protocol::on_timer(NodeId node, std::uint64_t tag) {
    nodes_.at(node).on_timeout(ExplorerId::from_key(tag));
}

}  // namespace meshbridge::dibadawn
