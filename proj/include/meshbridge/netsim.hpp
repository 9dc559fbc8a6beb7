#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "meshbridge/graph.hpp"
#include "meshbridge/radio.hpp"

namespace meshbridge::netsim {

struct Point {
    double x = 0;
    double y = 0;
};

double distance(const Point& a, const Point& b);

struct NodePlacement {
    std::vector<Point> positions;
    std::size_t size() const { return positions.size(); }
};

// Directed per-pair reception probabilities; pairs not listed are 0.
class LossTable {
public:
    LossTable() : LossTable(0) {}
    explicit LossTable(std::size_t node_count);
    static LossTable from_graph(const Graph& g, double probability = 1.0);

    std::size_t node_count() const { return n_; }
    void set(NodeId from, NodeId to, double p);
    void set_symmetric(NodeId a, NodeId b, double p);
    double get(NodeId from, NodeId to) const;

private:
    std::size_t n_;
    std::vector<double> p_;
};

enum class ChannelMode { lossless, shadowing, loss_table };

struct ChannelConfig {
    ChannelMode mode = ChannelMode::shadowing;
    double lossless_range = 250.0;
    ShadowingParams shadowing = ShadowingParams::calibrated();
    LossTable table;
    double max_tx_time = 0.002;
    int unicast_attempts = 7;
    bool ack_modeled = true;
    // Broadcast neighborhood cut-off.
    double min_probability = 1e-6;

    void validate() const;
};

struct Packet {
    virtual ~Packet() = default;
    virtual std::string describe() const = 0;
};
using PacketPtr = std::shared_ptr<const Packet>;

class PacketHandler {
public:
    virtual ~PacketHandler() = default;
    virtual void on_receive(NodeId node, NodeId from, const PacketPtr& packet) = 0;
    virtual void on_timer(NodeId node, std::uint64_t tag) = 0;
};

using TimerId = std::uint64_t;

// What a protocol node may do. Times are absolute simulation seconds.
class Transport {
public:
    virtual ~Transport() = default;
    virtual double now() const = 0;
    virtual void broadcast(NodeId sender, PacketPtr packet, double at) = 0;
    virtual void unicast(NodeId sender, NodeId receiver, PacketPtr packet, double at) = 0;
    virtual TimerId set_timer(NodeId node, double duration, std::uint64_t tag) = 0;
    virtual void cancel_timer(TimerId id) = 0;
    virtual double uniform(double lo, double hi) = 0;
    virtual void note(NodeId node, const std::string& what) = 0;
};

// Lets tests script losses: return true to drop this reception attempt.
struct Reception {
    NodeId sender;
    NodeId receiver;
    bool is_broadcast;
    double time;
    const Packet* packet;
};
using DropFilter = std::function<bool(const Reception&)>;

struct Neighbor {
    NodeId node;
    double probability;
};

struct EngineStats {
    std::uint64_t broadcasts = 0;
    std::uint64_t unicasts = 0;
    std::uint64_t unicast_failures = 0;
    std::uint64_t deliveries = 0;
    std::uint64_t timers_fired = 0;
    std::uint64_t actions = 0;
};

class Engine : public Transport {
public:
    Engine(NodePlacement placement, ChannelConfig channel, std::uint64_t seed);
    // Loss-table channel without geometry.
    Engine(LossTable table, ChannelConfig channel, std::uint64_t seed);

    std::size_t node_count() const { return neighbors_.size(); }
    const ChannelConfig& channel() const { return channel_; }
    double link_probability(NodeId from, NodeId to) const;
    std::span<const Neighbor> neighborhood(NodeId node) const { return neighbors_.at(node); }

    void set_handler(PacketHandler* handler) { handler_ = handler; }
    void set_drop_filter(DropFilter filter) { drop_filter_ = std::move(filter); }
    void set_event_log(std::ostream* log) { log_ = log; }

    double now() const override { return now_; }
    void broadcast(NodeId sender, PacketPtr packet, double at) override;
    void unicast(NodeId sender, NodeId receiver, PacketPtr packet, double at) override;
    TimerId set_timer(NodeId node, double duration, std::uint64_t tag) override;
    void cancel_timer(TimerId id) override;
    double uniform(double lo, double hi) override;
    void note(NodeId node, const std::string& what) override;

    void schedule(double at, std::function<void()> action, std::string label = {});

    // Processes every event with time <= t_end.
    void run_until(double t_end);
    // Drains the queue.
    void run();
    bool idle() const { return queue_.empty(); }

    std::mt19937_64& rng() { return rng_; }
    TrafficCounters& counters() { return counters_; }
    const TrafficCounters& counters() const { return counters_; }
    const EngineStats& stats() const { return stats_; }

private:
    enum class Kind : std::uint8_t { transmit_broadcast, transmit_unicast, deliver, timer, action };

    struct Event {
        double time;
        std::uint64_t seq;
        Kind kind;
        NodeId node;
        NodeId peer;
        std::uint64_t tag;
        PacketPtr packet;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };

    void build_neighborhoods();
    std::uint64_t push(double time, Kind kind, NodeId node, NodeId peer, std::uint64_t tag, PacketPtr packet);
    void dispatch(Event& ev);
    bool draw(double p);
    void log_line(const Event& ev, const char* kind, const std::string& details);

    ChannelConfig channel_;
    std::vector<Point> positions_;
    std::vector<std::vector<Neighbor>> neighbors_;
    std::mt19937_64 rng_;
    TrafficCounters counters_;
    EngineStats stats_;
    PacketHandler* handler_ = nullptr;
    DropFilter drop_filter_;
    std::ostream* log_ = nullptr;

    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::uint64_t next_seq_ = 0;
    double now_ = 0;
    std::unordered_set<TimerId> pending_timers_;
    std::unordered_map<std::uint64_t, std::pair<std::function<void()>, std::string>> actions_;
};

}  // namespace meshbridge::netsim
