#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "meshbridge/dibadawn.hpp"
#include "meshbridge/graph.hpp"
#include "meshbridge/netsim.hpp"
#include "meshbridge/radio.hpp"

namespace meshbridge::scenarios {

struct Topology {
    std::string kind;
    netsim::NodePlacement placement;
    // Explicit link graph (lossless over its edges); overrides the geometric channel when set.
    std::optional<Graph> graph;
    // Evaluation mask: edges whose endpoints share a group >= 0 are not evaluated.
    std::vector<int> groups;

    std::size_t size() const { return graph ? graph->node_count() : placement.size(); }
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Graph unit_disk_graph(const netsim::NodePlacement& placement, double range);

struct RandomGeometricParams {
    std::size_t nodes = 175;
    double width = 3000;
    double height = 3000;
    double comm_range = 400;
    int max_retries = 1000;
};
Topology random_geometric(const RandomGeometricParams& p, std::uint64_t seed);

struct TwoClusterParams {
    double bridge_length = 250;
    std::size_t count_left = 10;
    std::size_t count_right = 10;
    double radius = 230;
    double guard = 170;
    double vertical_extent = 300;
};
// Hub A is node 0 at the origin, hub B is node 1 at (bridge_length, 0).
Topology two_cluster_bridge(const TwoClusterParams& p, std::uint64_t seed);

Topology ring(std::size_t n, double spacing);
Topology line(std::size_t n, double spacing);
Topology from_graph(Graph g);

struct ScheduleConfig {
    double warmup = 200;
    double eval_duration = 300;
    double period = 30;
    double start_probability = 0.8;
    double initial_delay_max = 20;
    double snapshot_period = 30;

    void validate() const;
};

struct SnapshotEntry {
    std::size_t seq = 0;
    NodeId node = 0;
    bool is_articulation = false;
    std::vector<Edge> bridges;

    bool operator==(const SnapshotEntry&) const = default;
};
using SnapshotLog = std::vector<SnapshotEntry>;

void write_snapshots(std::ostream& out, const SnapshotLog& log);
SnapshotLog read_snapshots(std::istream& in);

struct RunStats {
    netsim::EngineStats engine;
    dibadawn::ProtocolStats protocol;
    std::size_t snapshots = 0;
    double end_time = 0;
};

struct RunArtifacts {
    std::size_t node_count = 0;
    TrafficCounters counters;
    // One log per publish rule, in the order requested.
    std::vector<SnapshotLog> snapshots;
    std::vector<std::string> labels;
    RunStats stats;
};

struct RunOptions {
    std::vector<dibadawn::PublishRule> publish{dibadawn::PublishRule{}};
    std::ostream* event_log = nullptr;
    std::function<void(const dibadawn::StatementRecord&)> statement_sink;
};

netsim::Engine make_engine(const Topology& topo, const netsim::ChannelConfig& channel, std::uint64_t seed);

RunArtifacts run_schedule(const Topology& topo, const netsim::ChannelConfig& channel, const ScheduleConfig& schedule,
                          dibadawn::ProtocolConfig protocol, std::uint64_t seed, const RunOptions& options = {});

// One articulation-only snapshot from the reliable-channel baseline rooted at node 0.
RunArtifacts run_baseline_snapshot(const Topology& topo, const netsim::ChannelConfig& channel, std::uint64_t seed);

}  // namespace meshbridge::scenarios
