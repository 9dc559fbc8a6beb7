#include "meshbridge/netsim.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace meshbridge::netsim {

double distance(const Point& a, const Point& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

LossTable::LossTable(std::size_t node_count) : n_(node_count), p_(node_count * node_count, 0.0) {}

LossTable LossTable::from_graph(const Graph& g, double probability) {
    LossTable t(g.node_count());
    for (const Edge& e : g.edges())
        t.set_symmetric(e.u, e.v, probability);
    return t;
}

void LossTable::set(NodeId from, NodeId to, double p) {
    if (from >= n_ || to >= n_ || from == to)
        throw std::out_of_range("loss table pair out of range");
    if (!(p >= 0 && p <= 1))
        throw std::invalid_argument("probability outside [0,1]");
    p_[static_cast<std::size_t>(from) * n_ + to] = p;
}

void LossTable::set_symmetric(NodeId a, NodeId b, double p) {
    set(a, b, p);
    set(b, a, p);
}

double LossTable::get(NodeId from, NodeId to) const {
    if (from >= n_ || to >= n_)
        throw std::out_of_range("loss table pair out of range");
    return from == to ? 0.0 : p_[static_cast<std::size_t>(from) * n_ + to];
}

void ChannelConfig::validate() const {
    if (unicast_attempts < 1)
        throw std::invalid_argument("unicast_attempts must be at least 1");
    if (!(max_tx_time >= 0))
        throw std::invalid_argument("max_tx_time must be non-negative");
    if (mode == ChannelMode::lossless && !(lossless_range > 0))
        throw std::invalid_argument("lossless range must be positive");
    if (mode == ChannelMode::shadowing)
        shadowing.validate();
}

Engine::Engine(NodePlacement placement, ChannelConfig channel, std::uint64_t seed)
    : channel_(std::move(channel)),
      positions_(std::move(placement.positions)),
      neighbors_(positions_.size()),
      rng_(seed),
      counters_(positions_.size()) {
    channel_.validate();
    for (const Point& p : positions_)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw std::invalid_argument("non-finite node position");
    if (channel_.mode == ChannelMode::loss_table && channel_.table.node_count() != positions_.size())
        throw std::invalid_argument("loss table size does not match placement");
    build_neighborhoods();
}

Engine::Engine(LossTable table, ChannelConfig channel, std::uint64_t seed)
    : channel_(std::move(channel)),
      positions_(table.node_count()),
      neighbors_(table.node_count()),
      rng_(seed),
      counters_(table.node_count()) {
    channel_.mode = ChannelMode::loss_table;
    channel_.table = std::move(table);
    channel_.validate();
    build_neighborhoods();
}

double Engine::link_probability(NodeId from, NodeId to) const {
    if (from == to)
        return 0.0;
    switch (channel_.mode) {
    case ChannelMode::lossless:
        return distance(positions_.at(from), positions_.at(to)) <= channel_.lossless_range ? 1.0 : 0.0;
    case ChannelMode::shadowing: {
        double d = distance(positions_.at(from), positions_.at(to));
        return d > 0 ? reception_probability(d, channel_.shadowing) : 1.0;
    }
    case ChannelMode::loss_table:
        return channel_.table.get(from, to);
    }
    return 0.0;
}

void Engine::build_neighborhoods() {
    const auto n = static_cast<NodeId>(neighbors_.size());
    for (NodeId a = 0; a < n; ++a)
        for (NodeId b = 0; b < n; ++b) {
            if (a == b)
                continue;
            double p = link_probability(a, b);
            if (p > channel_.min_probability)
                neighbors_[a].push_back({b, p});
        }
}

bool Engine::draw(double p) {
    if (p >= 1.0)
        return true;
    if (p <= 0.0)
        return false;
    return uniform(0.0, 1.0) < p;
}

double Engine::uniform(double lo, double hi) {
    double unit = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
}

std::uint64_t Engine::push(double time, Kind kind, NodeId node, NodeId peer, std::uint64_t tag, PacketPtr packet) {
    if (time < now_)
        time = now_;
    std::uint64_t seq = next_seq_++;
    queue_.push(Event{time, seq, kind, node, peer, tag, std::move(packet)});
    return seq;
}

void Engine::broadcast(NodeId sender, PacketPtr packet, double at) {
    push(at, Kind::transmit_broadcast, sender, sender, 0, std::move(packet));
}

void Engine::unicast(NodeId sender, NodeId receiver, PacketPtr packet, double at) {
    push(at, Kind::transmit_unicast, sender, receiver, 0, std::move(packet));
}

TimerId Engine::set_timer(NodeId node, double duration, std::uint64_t tag) {
    if (!(duration >= 0))
        throw std::invalid_argument("timer duration must be non-negative");
    TimerId id = push(now_ + duration, Kind::timer, node, node, tag, nullptr);
    pending_timers_.insert(id);
    return id;
}

void Engine::cancel_timer(TimerId id) {
    pending_timers_.erase(id);
}

void Engine::schedule(double at, std::function<void()> action, std::string label) {
    std::uint64_t seq = push(at, Kind::action, 0, 0, 0, nullptr);
    actions_.emplace(seq, std::make_pair(std::move(action), std::move(label)));
}

void Engine::note(NodeId node, const std::string& what) {
    if (!log_)
        return;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9f", now_);
    *log_ << buf << " note " << node << ' ' << what << '\n';
}

void Engine::log_line(const Event& ev, const char* kind, const std::string& details) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9f", ev.time);
    *log_ << buf << ' ' << kind << ' ' << ev.node << ' ' << details << '\n';
}

void Engine::run_until(double t_end) {
    while (!queue_.empty() && queue_.top().time <= t_end) {
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.time;
        dispatch(ev);
    }
    if (t_end > now_ && std::isfinite(t_end))
        now_ = t_end;
}

void Engine::run() {
    while (!queue_.empty()) {
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.time;
        dispatch(ev);
    }
}

void Engine::dispatch(Event& ev) {
    switch (ev.kind) {
    case Kind::transmit_broadcast: {
        ++stats_.broadcasts;
        counters_.record_tx(ev.node);
        if (log_)
            log_line(ev, "tx-bcast", ev.packet->describe());
        for (const Neighbor& nb : neighbors_[ev.node]) {
            if (drop_filter_ && drop_filter_({ev.node, nb.node, true, ev.time, ev.packet.get()}))
                continue;
            if (!draw(nb.probability))
                continue;
            counters_.record_rx(ev.node, nb.node);
            push(ev.time + channel_.max_tx_time, Kind::deliver, nb.node, ev.node, 0, ev.packet);
        }
        break;
    }
    case Kind::transmit_unicast: {
        ++stats_.unicasts;
        double p = link_probability(ev.node, ev.peer);
        int attempt = 0;
        bool ok = false;
        for (; attempt < channel_.unicast_attempts && !ok; ++attempt) {
            if (drop_filter_ && drop_filter_({ev.node, ev.peer, false, ev.time, ev.packet.get()}))
                continue;
            ok = draw(p);
        }
        if (log_)
            log_line(ev, "tx-ucast",
                     "to=" + std::to_string(ev.peer) + " attempts=" + std::to_string(attempt) +
                         (ok ? " ok " : " failed ") + ev.packet->describe());
        if (ok)
            push(ev.time + attempt * channel_.max_tx_time, Kind::deliver, ev.peer, ev.node, 0, ev.packet);
        else
            ++stats_.unicast_failures;
        break;
    }
    case Kind::deliver:
        ++stats_.deliveries;
        if (log_)
            log_line(ev, "deliver", "from=" + std::to_string(ev.peer) + " " + ev.packet->describe());
        if (handler_)
            handler_->on_receive(ev.node, ev.peer, ev.packet);
        break;
    case Kind::timer:
        if (pending_timers_.erase(ev.seq) == 0)
            break;
        ++stats_.timers_fired;
        if (log_)
            log_line(ev, "timer", "tag=" + std::to_string(ev.tag));
        if (handler_)
            handler_->on_timer(ev.node, ev.tag);
        break;
    case Kind::action: {
        auto it = actions_.find(ev.seq);
        auto action = std::move(it->second);
        actions_.erase(it);
        ++stats_.actions;
        if (log_) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.9f", ev.time);
            *log_ << buf << " action - " << action.second << '\n';
        }
        action.first();
        break;
    }
    }
}

}  // namespace meshbridge::netsim
