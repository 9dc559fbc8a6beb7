#include "meshbridge/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace meshbridge::runner {

namespace fs = std::filesystem;

namespace {

std::string num(double v, const char* format = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("missing artifact " + path.string());
    return in;
}

}  // namespace

std::string header_line(std::uint64_t seed, std::uint64_t config_hash) {
    return std::string("# meshbridge ") + kToolVersion + " seed=" + std::to_string(seed) +
           " config=" + config::hex(config_hash);
}

scenarios::Topology build_topology(const config::ScenarioConfig& cfg, std::uint64_t seed) {
    const auto& t = cfg.topology;
    if (t.kind == "random_geometric")
        return scenarios::random_geometric(t.random, seed);
    if (t.kind == "two_cluster")
        return scenarios::two_cluster_bridge(t.clusters, seed);
    if (t.kind == "ring")
        return scenarios::ring(t.nodes, t.spacing);
    if (t.kind == "line")
        return scenarios::line(t.nodes, t.spacing);
    return scenarios::from_graph(load_graph(t.graph_file).graph);
}

Priors estimate_priors(const config::ScenarioConfig& cfg, std::uint64_t seed, double etx_threshold) {
    auto pilot = simulate(cfg, seed ^ 0x9e3779b97f4a7c15ULL, {std::nullopt});
    auto ref = evaluator::build_reference(pilot.artifacts.counters, etx_threshold);
    Priors p;
    p.bridge = voting::network_prior(ref.truth.bridges.size(), ref.graph.edge_count());
    p.articulation = voting::network_prior(ref.truth.articulation_points.size(), ref.graph.node_count());
    return p;
}

dibadawn::PublishRule make_publish_rule(const config::VotingSpec& spec, std::optional<voting::Rule> rule,
                                        const Priors& priors) {
    dibadawn::PublishRule out;
    if (!rule)
        return out;
    voting::RuleConfig base;
    base.rule = *rule;
    base.window = spec.window;
    base.trust_threshold = spec.trust_threshold;
    out.bridges = base;
    out.articulation = base;
    if (*rule == voting::Rule::weighted) {
        out.bridges->prior = spec.bridge_prior.value_or(priors.bridge);
        out.articulation->prior = spec.articulation_prior.value_or(priors.articulation);
    }
    out.label = std::string(voting::rule_name(*rule));
    return out;
}

SimulationOutput simulate(const config::ScenarioConfig& cfg, std::uint64_t seed,
                          const std::vector<std::optional<voting::Rule>>& rules, std::ostream* event_log,
                          std::function<void(const dibadawn::StatementRecord&)> statement_sink) {
    SimulationOutput out{build_topology(cfg, seed), {}};
    if (cfg.protocol_kind == config::ProtocolKind::chaudhuri) {
        out.artifacts = scenarios::run_baseline_snapshot(out.topology, cfg.channel, seed);
        return out;
    }
    Priors priors;
    bool need_priors = false;
    for (const auto& r : rules)
        if (r == voting::Rule::weighted && (!cfg.voting.bridge_prior || !cfg.voting.articulation_prior))
            need_priors = true;
    if (need_priors)
        priors = estimate_priors(cfg, seed, cfg.etx_thresholds.front());

    scenarios::RunOptions options;
    options.publish.clear();
    for (const auto& r : rules)
        options.publish.push_back(make_publish_rule(cfg.voting, r, priors));
    options.event_log = event_log;
    options.statement_sink = std::move(statement_sink);
    out.artifacts = scenarios::run_schedule(out.topology, cfg.channel, cfg.schedule, cfg.protocol, seed, options);
    return out;
}

void write_statement(std::ostream& out, const dibadawn::StatementRecord& rec) {
    out << rec.round << ',' << rec.epoch << ',' << num(rec.time, "%.9f") << ',' << rec.node << ','
        << to_string(rec.search) << ',' << (rec.edge ? to_string(*rec.edge) : std::string("self")) << ','
        << (rec.statement.positive ? 1 : 0) << ',' << num(rec.statement.competence, "%.7f") << ','
        << (rec.implicit ? 1 : 0) << '\n';
}

std::vector<dibadawn::StatementRecord> read_statements(std::istream& in) {
    std::vector<dibadawn::StatementRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#' || line.rfind("round", 0) == 0)
            continue;
        unsigned long long round, epoch, node, initiator, sequence;
        double time, competence;
        char subject[64];
        int positive, implicit;
        if (std::sscanf(line.c_str(), "%llu,%llu,%lf,%llu,%llu:%llu,%63[^,],%d,%lf,%d", &round, &epoch, &time, &node,
                        &initiator, &sequence, subject, &positive, &competence, &implicit) != 10)
            throw ParseError(line_no, "bad statement row");
        dibadawn::StatementRecord rec;
        rec.round = round;
        rec.epoch = epoch;
        rec.time = time;
        rec.node = static_cast<NodeId>(node);
        rec.search = {static_cast<NodeId>(initiator), static_cast<std::uint32_t>(sequence)};
        std::string subj = subject;
        if (subj != "self") {
            unsigned long a, b;
            if (std::sscanf(subject, "%lu-%lu", &a, &b) != 2)
                throw ParseError(line_no, "bad statement subject");
            rec.edge = Edge(static_cast<NodeId>(a), static_cast<NodeId>(b));
        }
        rec.statement = {positive == 1, competence, rec.search, time};
        rec.implicit = implicit == 1;
        out.push_back(rec);
    }
    return out;
}

scenarios::SnapshotLog replay_statements(const std::vector<dibadawn::StatementRecord>& records,
                                         std::size_t node_count, std::size_t last_seq, std::size_t history_window,
                                         const dibadawn::PublishRule& rule) {
    struct Replay {
        dibadawn::StatementStore store;
        std::set<Edge> last_bridges;
        bool last_articulation = false;
        std::uint64_t round = 0;
    };
    std::vector<Replay> nodes(node_count, Replay{dibadawn::StatementStore(history_window), {}, false, 0});
    scenarios::SnapshotLog log;
    std::size_t next = 0;
    for (std::size_t seq = 0; seq <= last_seq; ++seq) {
        while (next < records.size() && records[next].epoch <= seq) {
            const auto& rec = records[next++];
            if (rec.node >= node_count)
                throw evaluator::DataError("statement references unknown node " + std::to_string(rec.node));
            Replay& r = nodes[rec.node];
            if (rec.round != r.round) {
                r.round = rec.round;
                r.last_bridges.clear();
            }
            r.store.push(rec.edge, rec.statement);
            if (rec.edge && rec.statement.positive && !rec.implicit)
                r.last_bridges.insert(*rec.edge);
            if (!rec.edge)
                r.last_articulation = rec.statement.positive;
        }
        for (NodeId n = 0; n < node_count; ++n) {
            const Replay& r = nodes[n];
            auto p = dibadawn::publish(r.store, r.last_bridges, r.last_articulation, r.round > 0, rule);
            log.push_back({seq, n, p.is_articulation, {p.bridges.begin(), p.bridges.end()}});
        }
    }
    return log;
}

namespace {

void write_placement(std::ostream& out, const scenarios::Topology& topo) {
    out << "node,x,y,group\n";
    for (NodeId n = 0; n < topo.size(); ++n) {
        auto p = n < topo.placement.size() ? topo.placement.positions[n] : netsim::Point{};
        out << n << ',' << num(p.x) << ',' << num(p.y) << ',' << (n < topo.groups.size() ? topo.groups[n] : -1)
            << '\n';
    }
}

std::vector<int> read_groups(std::istream& in) {
    std::vector<int> groups;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#' || line.rfind("node", 0) == 0)
            continue;
        unsigned long node;
        double x, y;
        int group;
        if (std::sscanf(line.c_str(), "%lu,%lf,%lf,%d", &node, &x, &y, &group) != 4 || node != groups.size())
            throw ParseError(line_no, "bad placement row");
        groups.push_back(group);
    }
    return groups;
}

void write_stats(std::ostream& out, const scenarios::RunStats& s) {
    out << "broadcasts " << s.engine.broadcasts << '\n'
        << "unicasts " << s.engine.unicasts << '\n'
        << "unicast_failures " << s.engine.unicast_failures << '\n'
        << "deliveries " << s.engine.deliveries << '\n'
        << "timers_fired " << s.engine.timers_fired << '\n'
        << "searches_started " << s.protocol.searches_started << '\n'
        << "searches_completed " << s.protocol.searches_completed << '\n'
        << "asymmetric_cross_edges " << s.protocol.asymmetric_cross_edges << '\n'
        << "stale_backward " << s.protocol.stale_backward << '\n'
        << "clamped_delays " << s.protocol.clamped_delays << '\n'
        << "dropped_at_root " << s.protocol.dropped_at_root << '\n'
        << "snapshots " << s.snapshots << '\n'
        << "end_time " << num(s.end_time, "%.9f") << '\n';
}

}  // namespace

void simulate_to_dir(const config::ScenarioConfig& cfg, std::uint64_t seed, const fs::path& dir) {
    fs::create_directories(dir);
    const std::string header = header_line(seed, cfg.hash);

    std::ofstream events;
    if (cfg.event_log) {
        events = open_out(dir / "events.log");
        events << header << '\n';
    }
    std::ofstream statements;
    std::function<void(const dibadawn::StatementRecord&)> sink;
    if (cfg.record_statements && cfg.protocol_kind == config::ProtocolKind::dibadawn) {
        statements = open_out(dir / "statements.csv");
        statements << header << '\n' << "round,epoch,time,node,search,subject,verdict,competence,implicit\n";
        sink = [&statements](const dibadawn::StatementRecord& rec) { write_statement(statements, rec); };
    }

    auto out = simulate(cfg, seed, {cfg.voting.rule}, cfg.event_log ? &events : nullptr, sink);

    auto conf = open_out(dir / "run.conf");
    conf << header << '\n';
    for (const auto& [key, value] : cfg.source)
        conf << key << " = " << value << '\n';
    auto placement = open_out(dir / "placement.csv");
    placement << header << '\n';
    write_placement(placement, out.topology);
    auto counters = open_out(dir / "counters.csv");
    counters << header << '\n';
    out.artifacts.counters.write_csv(counters);
    auto snapshots = open_out(dir / "snapshots.csv");
    snapshots << header << '\n';
    scenarios::write_snapshots(snapshots, out.artifacts.snapshots.front());
    auto stats = open_out(dir / "stats.txt");
    stats << header << '\n';
    write_stats(stats, out.artifacts.stats);
}

std::vector<EvalRow> evaluate_artifacts(const scenarios::SnapshotLog& snapshots, const TrafficCounters& counters,
                                        const std::vector<int>& groups, const std::vector<double>& thresholds,
                                        bool detected_twice, std::size_t run, std::uint64_t seed) {
    std::vector<EvalRow> rows;
    for (double etx : thresholds) {
        auto ref = evaluator::build_reference(counters, etx);
        auto result = evaluator::classify_run(snapshots, ref, {detected_twice, groups});
        for (auto [scope, sr] : {std::pair{"bridge", result.bridges}, std::pair{"articulation", result.articulation}})
            rows.push_back({run, seed, etx, scope, sr.cm, sr.excluded, evaluator::sample(sr.cm)});
    }
    return rows;
}

void write_eval_csv(std::ostream& out, const std::vector<EvalRow>& rows) {
    out << "run,seed,etx,scope,tp,fp,tn,fn,excluded,precision,recall,f1\n";
    auto metric = [](const evaluator::Metric& m) { return num(m.value) + (m.degenerate ? "*" : ""); };
    for (const auto& r : rows)
        out << r.run << ',' << r.seed << ',' << num(r.etx, "%g") << ',' << r.scope << ',' << r.cm.tp << ','
            << r.cm.fp << ',' << r.cm.tn << ',' << r.cm.fn << ',' << r.excluded << ',' << metric(r.metrics.precision)
            << ',' << metric(r.metrics.recall) << ',' << metric(r.metrics.f1) << '\n';
}

std::vector<EvalRow> evaluate_run_dir(const fs::path& dir, const std::vector<double>& thresholds,
                                      const std::string& rule) {
    auto conf_in = open_in(dir / "run.conf");
    auto cfg = config::build_scenario(config::parse_key_values(conf_in));
    std::uint64_t seed = 0;
    {
        auto in = open_in(dir / "run.conf");
        std::string first;
        std::getline(in, first);
        if (auto pos = first.find("seed="); pos != std::string::npos)
            seed = std::stoull(first.substr(pos + 5));
    }
    auto placement_in = open_in(dir / "placement.csv");
    auto groups = read_groups(placement_in);
    auto counters_in = open_in(dir / "counters.csv");
    auto counters = TrafficCounters::read_csv(counters_in, groups.size());
    auto snapshots_in = open_in(dir / "snapshots.csv");
    auto snapshots = scenarios::read_snapshots(snapshots_in);

    std::string live = cfg.voting.rule ? std::string(voting::rule_name(*cfg.voting.rule)) : "none";
    if (!rule.empty() && rule != live) {
        std::ifstream statements_in(dir / "statements.csv", std::ios::binary);
        if (!statements_in)
            throw std::runtime_error("re-scoring needs statements.csv (set run.record_statements = true)");
        auto records = read_statements(statements_in);
        std::optional<voting::Rule> r;
        if (rule != "none")
            r = voting::parse_rule(rule);
        Priors priors;
        if (r == voting::Rule::weighted && (!cfg.voting.bridge_prior || !cfg.voting.articulation_prior))
            priors = estimate_priors(cfg, seed, thresholds.front());
        std::size_t last_seq = 0;
        for (const auto& e : snapshots)
            last_seq = std::max(last_seq, e.seq);
        snapshots = replay_statements(records, groups.size(), last_seq, cfg.protocol.history_window,
                                      make_publish_rule(cfg.voting, r, priors));
    }
    return evaluate_artifacts(snapshots, counters, groups, thresholds, cfg.detected_twice, 0, seed);
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& task) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    std::atomic<std::size_t> next{0};
    auto loop = [&] {
        for (std::size_t i = next++; i < count; i = next++)
            task(i);
    };
    if (workers == 1) {
        loop();
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back(loop);
    for (auto& t : pool)
        t.join();
}

SweepResult run_sweep(const config::SweepSpec& spec, std::size_t parallelism, const fs::path& out_dir,
                      std::ostream& log) {
    fs::create_directories(out_dir);
    const bool rule_sweep = spec.parameter == "voting.rule";
    const auto& thresholds = spec.base.etx_thresholds;

    struct Task {
        std::size_t value_index;  // ignored for rule sweeps
        std::size_t rep;
    };
    std::vector<Task> tasks;
    for (std::size_t v = 0; v < (rule_sweep ? 1 : spec.values.size()); ++v)
        for (std::size_t r = 0; r < spec.repetitions; ++r)
            tasks.push_back({v, r});

    // samples[value][metric] -> per-run values
    std::vector<std::map<std::string, std::vector<std::pair<std::size_t, double>>>> samples(spec.values.size());
    std::vector<std::vector<EvalRow>> rows_by_value(spec.values.size());
    std::size_t failures = 0;
    std::mutex mu;

    auto record = [&](std::size_t value_index, const std::vector<EvalRow>& rows, std::size_t rep) {
        for (const auto& row : rows) {
            std::string suffix = "@etx" + num(row.etx, "%g");
            samples[value_index][row.scope + "_precision" + suffix].push_back({rep, row.metrics.precision.value});
            samples[value_index][row.scope + "_recall" + suffix].push_back({rep, row.metrics.recall.value});
            samples[value_index][row.scope + "_f1" + suffix].push_back({rep, row.metrics.f1.value});
        }
    };

    parallel_for(tasks.size(), parallelism, [&](std::size_t i) {
        const Task task = tasks[i];
        const std::uint64_t seed = spec.base_seed + task.rep;
        try {
            if (rule_sweep) {
                auto cfg = spec.base;
                std::vector<std::optional<voting::Rule>> rules;
                for (const auto& v : spec.values)
                    rules.push_back(v == "none" ? std::nullopt : std::optional(voting::parse_rule(v)));
                auto out = simulate(cfg, seed, rules);
                std::lock_guard lock(mu);
                for (std::size_t v = 0; v < spec.values.size(); ++v) {
                    auto rows = evaluate_artifacts(out.artifacts.snapshots[v], out.artifacts.counters,
                                                   out.topology.groups, thresholds, cfg.detected_twice, task.rep, seed);
                    record(v, rows, task.rep);
                    rows_by_value[v].insert(rows_by_value[v].end(), rows.begin(), rows.end());
                }
            } else {
                auto entries = spec.base_entries;
                entries[spec.parameter] = spec.values[task.value_index];
                auto cfg = config::build_scenario(entries);
                auto out = simulate(cfg, seed, {cfg.voting.rule});
                auto rows = evaluate_artifacts(out.artifacts.snapshots.front(), out.artifacts.counters,
                                               out.topology.groups, cfg.etx_thresholds, cfg.detected_twice, task.rep,
                                               seed);
                std::lock_guard lock(mu);
                record(task.value_index, rows, task.rep);
                auto& dest = rows_by_value[task.value_index];
                dest.insert(dest.end(), rows.begin(), rows.end());
            }
        } catch (const std::exception& e) {
            std::lock_guard lock(mu);
            ++failures;
            log << "run failed: " << spec.parameter << "="
                << (rule_sweep ? std::string("*") : spec.values[task.value_index]) << " seed=" << seed << ": "
                << e.what() << '\n';
        }
    });

    const std::string header = header_line(spec.base_seed, config::config_hash(spec.base_entries));
    auto summary = open_out(out_dir / "summary.csv");
    summary << header << '\n' << "param_value,metric,mean,ci_halfwidth,n\n";
    std::map<std::string, std::ofstream> plots;
    for (std::size_t v = 0; v < spec.values.size(); ++v) {
        for (auto& [metric, values] : samples[v]) {
            std::sort(values.begin(), values.end());
            std::vector<double> xs;
            for (auto& [rep, x] : values)
                xs.push_back(x);
            evaluator::MeanCi ci{xs.empty() ? 0.0 : xs.front(), 0.0, xs.size()};
            if (xs.size() >= 2)
                ci = evaluator::mean_ci(xs, spec.base.level);
            summary << spec.values[v] << ',' << metric << ',' << num(ci.mean) << ',' << num(ci.halfwidth) << ','
                    << ci.n << '\n';
            std::string name = metric;
            std::replace(name.begin(), name.end(), '@', '_');
            auto& plot = plots[name];
            if (!plot.is_open()) {
                plot = open_out(out_dir / ("plot_" + name + ".dat"));
                plot << header << '\n' << "# " << spec.parameter << " mean ci_halfwidth n\n";
            }
            plot << spec.values[v] << ' ' << num(ci.mean) << ' ' << num(ci.halfwidth) << ' ' << ci.n << '\n';
        }
    }
    for (std::size_t v = 0; v < spec.values.size(); ++v) {
        auto& rows = rows_by_value[v];
        std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
            return std::tie(a.run, a.etx, a.scope) < std::tie(b.run, b.etx, b.scope);
        });
        auto runs = open_out(out_dir / ("runs_" + spec.values[v] + ".csv"));
        runs << header << '\n' << "# " << spec.parameter << " = " << spec.values[v] << '\n';
        write_eval_csv(runs, rows);
    }
    return {failures};
}

}  // namespace meshbridge::runner
