#pragma once

#include <array>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "meshbridge/graph.hpp"
#include "meshbridge/ids.hpp"
#include "meshbridge/netsim.hpp"
#include "meshbridge/voting.hpp"

namespace meshbridge::dibadawn {

struct ProtocolConfig {
    int initial_ttl = 10;
    double max_traversal_time = 0.056;
    double jitter_divisor = 4.0;
    double max_tx_time = 0.002;
    int unicast_attempts = 7;
    // Defaults to jitter_max + (unicast_attempts + 1) * max_tx_time.
    std::optional<double> backward_slot_time;
    // Drop cross edges whose endpoints' hop distances differ by more than one.
    bool asymmetry_guard = true;
    bool backward_jitter = true;
    std::size_t history_window = 5;
    bool record_trace = false;

    double jitter_max() const { return max_traversal_time / jitter_divisor; }
    double slot_time() const;
    void validate() const;
};

// Table lookup; hops < 1 is a domain error.
double competence(int hops);

struct ForwardDelay {
    double min_delay = 0;
    double own_jitter = 0;
    bool clamped = false;
};
ForwardDelay compute_forward_delay(double forwarder_jitter, const ProtocolConfig& cfg, double own_jitter);
double compute_timeout(int hop_distance, int initial_ttl, const ProtocolConfig& cfg);

struct CycleId {
    std::array<std::uint64_t, 3> values{};
    static CycleId make(const ExplorerId& search, NodeId a, NodeId b);
    auto operator<=>(const CycleId&) const = default;
};

struct ForwardMessage : netsim::Packet {
    ExplorerId explorer;
    int ttl = 0;
    NodeId forwarded_by = 0;
    std::optional<NodeId> tree_parent;
    int hops_traveled = 0;
    double forwarder_jitter = 0;

    std::string describe() const override;
};

struct CycleItem {
    CycleId cycle;
    int hops = 1;
};

struct BackwardMessage : netsim::Packet {
    ExplorerId search;
    NodeId sender = 0;
    bool bridge_marker = false;
    std::vector<CycleItem> items;

    std::string describe() const override;
};

enum class Verdict { bridge, no_bridge };

struct EdgeMarking {
    double time = 0;
    ExplorerId search;
    Verdict verdict = Verdict::no_bridge;
    Edge edge;
    double competence = 1.0;
};

// What a node keeps about one search it takes part in.
struct SearchState {
    ExplorerId search;
    bool visited = false;
    std::optional<NodeId> parent;
    int hop_distance = 0;
    int my_ttl = 0;

    struct CrossEdge {
        NodeId neighbor;
        CycleId cycle;
        int neighbor_hops;
    };
    std::vector<CrossEdge> cross_edges;

    struct Buffered {
        CycleId cycle;
        int hops_received;  // 0 for items this node detected itself
        NodeId from;
    };
    std::vector<Buffered> out_buffer;

    struct Token {
        bool bridge;
        std::array<std::uint64_t, 3> value;
        auto operator<=>(const Token&) const = default;
    };
    std::map<NodeId, std::set<Token>> neighbor_log;

    std::map<Edge, EdgeMarking> markings;
    netsim::TimerId timer = 0;
};

// Rule applied when publishing verdicts; an empty rule publishes the last search's raw result.
struct PublishRule {
    std::optional<voting::RuleConfig> bridges;
    std::optional<voting::RuleConfig> articulation;
    std::string label = "none";
};

struct Published {
    std::set<Edge> bridges;
    bool is_articulation = false;
};

struct NetworkView {
    std::set<Edge> bridges;
    std::set<NodeId> articulation_points;
};

struct StatementRecord {
    std::uint64_t round = 0;  // per-node completion counter
    std::size_t epoch = 0;    // snapshots taken before this completion
    double time = 0;
    NodeId node = 0;
    ExplorerId search;
    std::optional<Edge> edge;  // empty = the node itself
    voting::Statement statement;
    bool implicit = false;
};

// Per-edge and self ring buffers of the last k statements.
class StatementStore {
public:
    explicit StatementStore(std::size_t capacity = 5) : capacity_(capacity) {}

    void push(const std::optional<Edge>& subject, const voting::Statement& s);
    const std::map<Edge, std::deque<voting::Statement>>& edges() const { return edges_; }
    const std::deque<voting::Statement>& self() const { return self_; }
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    std::map<Edge, std::deque<voting::Statement>> edges_;
    std::deque<voting::Statement> self_;
};

Published publish(const StatementStore& store, const std::set<Edge>& last_bridges, bool last_articulation,
                  bool any_search, const PublishRule& rule);

struct ProtocolStats {
    std::uint64_t searches_started = 0;
    std::uint64_t searches_completed = 0;
    std::uint64_t asymmetric_cross_edges = 0;
    std::uint64_t stale_backward = 0;
    std::uint64_t clamped_delays = 0;
    std::uint64_t dropped_at_root = 0;
};

struct Trace {
    struct Visit {
        ExplorerId search;
        NodeId node;
        std::optional<NodeId> parent;
        int hop;
        double time;
    };
    struct Flush {
        ExplorerId search;
        NodeId node;
        int hop;
        double time;
    };
    struct ItemMove {
        ExplorerId search;
        NodeId node;
        CycleId cycle;
    };
    std::vector<Visit> visits;
    std::vector<Flush> flushes;
    std::vector<ItemMove> eliminated;
    std::vector<ItemMove> sent_up;
    std::vector<ItemMove> detected;
};

class Node {
public:
    Node(NodeId id, netsim::Transport& transport, const ProtocolConfig& cfg, ProtocolStats& stats,
         Trace* trace = nullptr);

    NodeId id() const { return id_; }
    ExplorerId start_search();
    void on_forward(const ForwardMessage& msg);
    void on_backward(const BackwardMessage& msg);
    void on_timeout(const ExplorerId& search);

    Published query_results(const PublishRule& rule = {}) const;
    const StatementStore& statements() const { return store_; }
    const std::vector<EdgeMarking>& last_markings() const { return last_markings_; }
    bool last_articulation() const { return last_articulation_; }
    std::size_t completed_searches() const { return round_; }
    const SearchState* active(const ExplorerId& search) const;

    void set_statement_sink(std::function<void(const StatementRecord&)>* sink) { sink_ = sink; }
    void set_epoch(std::size_t epoch) { epoch_ = epoch; }

private:
    void mark(SearchState& st, Verdict verdict, NodeId neighbor, double comp);
    void log_token(SearchState& st, NodeId neighbor, const SearchState::Token& t);
    void detect_cycles(SearchState& st);
    void flush(SearchState& st);
    bool detect_articulation(const SearchState& st) const;
    void forget_stale_and_store(const SearchState& st, bool is_articulation);

    NodeId id_;
    netsim::Transport& net_;
    const ProtocolConfig& cfg_;
    ProtocolStats& stats_;
    Trace* trace_;
    std::function<void(const StatementRecord&)>* sink_ = nullptr;

    std::uint32_t next_sequence_ = 0;
    std::unordered_map<std::uint64_t, SearchState> active_;
    std::unordered_set<std::uint64_t> finished_;

    StatementStore store_;
    std::vector<EdgeMarking> last_markings_;
    std::set<Edge> last_bridges_;
    bool last_articulation_ = false;
    std::uint64_t round_ = 0;
    std::size_t epoch_ = 0;
};

// All nodes of one network, wired to an engine.
class Protocol : public netsim::PacketHandler {
public:
    Protocol(netsim::Engine& engine, ProtocolConfig cfg);

    ExplorerId start_search(NodeId node) { return nodes_.at(node).start_search(); }
    Node& node(NodeId n) { return nodes_.at(n); }
    const Node& node(NodeId n) const { return nodes_.at(n); }
    std::size_t size() const { return nodes_.size(); }
    const ProtocolConfig& config() const { return cfg_; }
    const ProtocolStats& stats() const { return stats_; }
    const Trace& trace() const { return trace_; }

    // Union of every node's published verdicts.
    NetworkView network_view(const PublishRule& rule = {}) const;

    void set_statement_sink(std::function<void(const StatementRecord&)> sink);
    void set_epoch(std::size_t epoch);

    void on_receive(NodeId node, NodeId from, const netsim::PacketPtr& packet) override;
    void on_timer(NodeId node, std::uint64_t tag) override;

private:
    ProtocolConfig cfg_;
    ProtocolStats stats_;
    Trace trace_;
    std::function<void(const StatementRecord&)> sink_;
    std::vector<Node> nodes_;
};

}  // namespace meshbridge::dibadawn
