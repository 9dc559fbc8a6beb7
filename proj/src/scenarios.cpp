#include "meshbridge/scenarios.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "meshbridge/chaudhuri.hpp"

namespace meshbridge::scenarios {

namespace {

double unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

Graph unit_disk_graph(const netsim::NodePlacement& placement, double range) {
    Graph g(placement.size());
    for (NodeId a = 0; a < placement.size(); ++a)
        for (NodeId b = a + 1; b < placement.size(); ++b)
            if (netsim::distance(placement.positions[a], placement.positions[b]) <= range)
                g.add_edge(a, b);
    return g;
}

Topology random_geometric(const RandomGeometricParams& p, std::uint64_t seed) {
    if (p.nodes < 1)
        throw std::invalid_argument("random geometric topology needs at least one node");
    if (!(p.width > 0) || !(p.height > 0) || !(p.comm_range > 0))
        throw std::invalid_argument("random geometric area and range must be positive");
    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt <= p.max_retries; ++attempt) {
        Topology topo;
        topo.kind = "random_geometric";
        for (std::size_t i = 0; i < p.nodes; ++i)
            topo.placement.positions.push_back({unit(rng) * p.width, unit(rng) * p.height});
        if (component_count(unit_disk_graph(topo.placement, p.comm_range)) == 1) {
            topo.groups.assign(p.nodes, -1);
            return topo;
        }
    }
    throw GenerationError("no connected placement within the retry budget");
}

Topology two_cluster_bridge(const TwoClusterParams& p, std::uint64_t seed) {
    if (p.count_left < 1 || p.count_right < 1)
        throw std::invalid_argument("cluster counts must be at least 1");
    if (!(p.bridge_length > 0) || !(p.radius > 0) || !(p.guard >= 0) || !(p.vertical_extent >= 0))
        throw std::invalid_argument("two-cluster distances out of range");
    if (p.guard >= p.radius)
        throw GenerationError("guard distance must be smaller than the cluster radius");
    const double y_max = std::min(p.vertical_extent / 2, std::sqrt(p.radius * p.radius - p.guard * p.guard));

    std::mt19937_64 rng(seed);
    Topology topo;
    topo.kind = "two_cluster";
    topo.placement.positions = {{0, 0}, {p.bridge_length, 0}};
    topo.groups = {0, 1};
    auto place = [&](std::size_t count, double hub_x, double side, int group) {
        for (std::size_t i = 1; i < count; ++i) {
            double y = (2 * unit(rng) - 1) * y_max;
            double x = hub_x + side * std::sqrt(p.radius * p.radius - y * y);
            topo.placement.positions.push_back({x, y});
            topo.groups.push_back(group);
        }
    };
    place(p.count_left, 0, -1, 0);
    place(p.count_right, p.bridge_length, +1, 1);
    return topo;
}

Topology ring(std::size_t n, double spacing) {
    if (n < 3)
        throw std::invalid_argument("ring needs at least 3 nodes");
    Topology topo;
    topo.kind = "ring";
    const double radius = spacing / (2 * std::sin(std::numbers::pi / static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
        double angle = 2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
        topo.placement.positions.push_back({radius * std::cos(angle), radius * std::sin(angle)});
    }
    topo.groups.assign(n, -1);
    return topo;
}

Topology line(std::size_t n, double spacing) {
    Topology topo;
    topo.kind = "line";
    for (std::size_t i = 0; i < n; ++i)
        topo.placement.positions.push_back({spacing * static_cast<double>(i), 0});
    topo.groups.assign(n, -1);
    return topo;
}

Topology from_graph(Graph g) {
    Topology topo;
    topo.kind = "graph";
    topo.placement.positions.assign(g.node_count(), {});
    topo.groups.assign(g.node_count(), -1);
    topo.graph = std::move(g);
    return topo;
}

void ScheduleConfig::validate() const {
    if (!(warmup >= 0) || !(eval_duration >= 0) || !(period > 0) || !(initial_delay_max >= 0) ||
        !(snapshot_period > 0))
        throw std::invalid_argument("schedule durations out of range");
    if (!(start_probability >= 0 && start_probability <= 1))
        throw std::invalid_argument("start probability outside [0,1]");
}

void write_snapshots(std::ostream& out, const SnapshotLog& log) {
    out << "seq,node,is_articulation,bridge_edge_list\n";
    for (const SnapshotEntry& e : log) {
        out << e.seq << ',' << e.node << ',' << (e.is_articulation ? 1 : 0) << ',';
        for (std::size_t i = 0; i < e.bridges.size(); ++i)
            out << (i ? " " : "") << to_string(e.bridges[i]);
        out << '\n';
    }
}

SnapshotLog read_snapshots(std::istream& in) {
    SnapshotLog log;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#' || line.rfind("seq", 0) == 0)
            continue;
        std::istringstream row(line);
        std::string seq, node, art, edges;
        if (!std::getline(row, seq, ',') || !std::getline(row, node, ',') || !std::getline(row, art, ','))
            throw ParseError(line_no, "expected seq,node,is_articulation,bridge_edge_list");
        std::getline(row, edges);
        SnapshotEntry e;
        try {
            e.seq = std::stoul(seq);
            e.node = static_cast<NodeId>(std::stoul(node));
        } catch (const std::exception&) {
            throw ParseError(line_no, "bad number");
        }
        if (art != "0" && art != "1")
            throw ParseError(line_no, "is_articulation must be 0 or 1");
        e.is_articulation = art == "1";
        std::istringstream list(edges);
        std::string token;
        while (list >> token) {
            auto dash = token.find('-');
            if (dash == std::string::npos)
                throw ParseError(line_no, "bad edge '" + token + "'");
            try {
                e.bridges.emplace_back(static_cast<NodeId>(std::stoul(token.substr(0, dash))),
                                       static_cast<NodeId>(std::stoul(token.substr(dash + 1))));
            } catch (const std::exception&) {
                throw ParseError(line_no, "bad edge '" + token + "'");
            }
        }
        log.push_back(std::move(e));
    }
    return log;
}

netsim::Engine make_engine(const Topology& topo, const netsim::ChannelConfig& channel, std::uint64_t seed) {
    if (topo.graph) {
        return netsim::Engine(netsim::LossTable::from_graph(*topo.graph, 1.0), channel, seed);
    }
    return netsim::Engine(topo.placement, channel, seed);
}

RunArtifacts run_schedule(const Topology& topo, const netsim::ChannelConfig& channel, const ScheduleConfig& schedule,
                          dibadawn::ProtocolConfig protocol, std::uint64_t seed, const RunOptions& options) {
    schedule.validate();
    if (options.publish.empty())
        throw std::invalid_argument("at least one publish rule is needed");
    protocol.max_tx_time = channel.max_tx_time;
    protocol.unicast_attempts = channel.unicast_attempts;

    netsim::Engine engine = make_engine(topo, channel, seed);
    engine.set_event_log(options.event_log);
    dibadawn::Protocol proto(engine, protocol);
    if (options.statement_sink)
        proto.set_statement_sink(options.statement_sink);

    const auto n = static_cast<NodeId>(engine.node_count());
    const double stop_starts = schedule.warmup + schedule.eval_duration;

    RunArtifacts art;
    art.node_count = n;
    art.snapshots.resize(options.publish.size());
    for (const auto& rule : options.publish)
        art.labels.push_back(rule.label);

    std::function<void(NodeId, double)> slot = [&](NodeId node, double t) {
        if (engine.uniform(0, 1) < schedule.start_probability)
            proto.start_search(node);
        double next = t + schedule.period;
        if (next < stop_starts)
            engine.schedule(next, [&slot, node, next] { slot(node, next); }, "slot node=" + std::to_string(node));
    };
    for (NodeId node = 0; node < n; ++node) {
        double first = engine.uniform(0, schedule.initial_delay_max);
        if (first < stop_starts)
            engine.schedule(first, [&slot, node, first] { slot(node, first); }, "slot node=" + std::to_string(node));
    }

    std::size_t seq = 0;
    auto take_snapshot = [&] {
        for (std::size_t r = 0; r < options.publish.size(); ++r)
            for (NodeId node = 0; node < n; ++node) {
                dibadawn::Published p = proto.node(node).query_results(options.publish[r]);
                art.snapshots[r].push_back({seq, node, p.is_articulation, {p.bridges.begin(), p.bridges.end()}});
            }
        ++seq;
        proto.set_epoch(seq);
    };
    for (double t = schedule.warmup; t < stop_starts; t += schedule.snapshot_period)
        engine.schedule(t, take_snapshot, "snapshot");

    engine.run();
    take_snapshot();

    art.counters = engine.counters();
    art.stats.engine = engine.stats();
    art.stats.protocol = proto.stats();
    art.stats.snapshots = seq;
    art.stats.end_time = engine.now();
    return art;
}

RunArtifacts run_baseline_snapshot(const Topology& topo, const netsim::ChannelConfig& channel, std::uint64_t seed) {
    if (!topo.graph && channel.mode != netsim::ChannelMode::lossless)
        throw std::invalid_argument("baseline needs a lossless channel");
    Graph links = topo.graph ? *topo.graph : unit_disk_graph(topo.placement, channel.lossless_range);
    netsim::ChannelConfig reliable = channel;
    reliable.unicast_attempts = 1;
    netsim::Engine engine = make_engine(topo, reliable, seed);
    chaudhuri::Protocol proto(engine, links);
    RunArtifacts art;
    art.node_count = links.node_count();
    art.labels = {"none"};
    art.snapshots.resize(1);
    if (links.node_count() > 0) {
        proto.start(0);
        engine.run();
    }
    for (NodeId node = 0; node < links.node_count(); ++node)
        art.snapshots[0].push_back({0, node, proto.state(node).is_articulation, {}});
    art.counters = engine.counters();
    art.stats.engine = engine.stats();
    art.stats.snapshots = 1;
    art.stats.end_time = engine.now();
    return art;
}

}  // namespace meshbridge::scenarios
