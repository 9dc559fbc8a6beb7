#include <CLI11.hpp>

#include <fstream>
#include <thread>
#include <iostream>

#include "meshbridge/config.hpp"
#include "meshbridge/graph.hpp"
#include "meshbridge/runner.hpp"

using namespace meshbridge;

namespace {

int cmd_analyze(const std::string& path, std::optional<double> threshold) {
    ParsedGraph parsed = load_graph(path);
    Graph g = threshold ? apply_etx_cut(parsed, *threshold) : parsed.graph;
    BiconnectivityReport report = tarjan_report(g);
    std::cout << "nodes: " << g.node_count() << "\nedges: " << g.edge_count()
              << "\ncomponents: " << report.components.size() << '\n';
    for (std::size_t i = 0; i < report.components.size(); ++i) {
        std::cout << "component " << i << ':';
        for (NodeId n : report.components[i])
            std::cout << ' ' << n;
        std::cout << '\n';
    }
    std::cout << "bridges:";
    for (const Edge& e : report.bridges)
        std::cout << ' ' << to_string(e);
    std::cout << "\narticulation:";
    for (NodeId n : report.articulation_points)
        std::cout << ' ' << n;
    std::cout << '\n';
    return 0;
}

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_dir) {
    auto cfg = config::build_scenario(config::load_key_values(config_path));
    std::vector<std::uint64_t> seeds = seed ? std::vector<std::uint64_t>{*seed} : cfg.seeds;
    for (std::uint64_t s : seeds) {
        std::filesystem::path dir = seeds.size() == 1 ? std::filesystem::path(out_dir)
                                                      : std::filesystem::path(out_dir) / ("seed_" + std::to_string(s));
        runner::simulate_to_dir(cfg, s, dir);
        std::cerr << "wrote " << dir.string() << '\n';
    }
    return 0;
}

int cmd_evaluate(const std::vector<std::string>& dirs, std::vector<double> thresholds, const std::string& rule,
                 const std::string& output) {
    std::vector<runner::EvalRow> rows;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        std::vector<double> use = thresholds;
        if (use.empty()) {
            auto cfg = config::build_scenario(config::load_key_values((std::filesystem::path(dirs[i]) / "run.conf").string()));
            use = cfg.etx_thresholds;
        }
        auto run_rows = runner::evaluate_run_dir(dirs[i], use, rule);
        for (auto& r : run_rows) {
            r.run = i;
            rows.push_back(r);
        }
    }
    if (output.empty()) {
        runner::write_eval_csv(std::cout, rows);
    } else {
        std::ofstream out(output, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write " + output);
        runner::write_eval_csv(out, rows);
    }
    return 0;
}

int cmd_sweep(const std::string& spec_path, std::size_t parallelism, const std::string& out_dir) {
    auto spec = config::build_sweep(config::load_key_values(spec_path));
    auto result = runner::run_sweep(spec, parallelism, out_dir, std::cerr);
    if (result.failures > 0) {
        std::cerr << result.failures << " run(s) failed\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bridge and articulation point detection in simulated mesh networks"};
    app.require_subcommand(1);

    auto* analyze = app.add_subcommand("analyze", "Report bridges, articulation points and components of a graph file");
    std::string graph_path;
    std::optional<double> analyze_threshold;
    analyze->add_option("graph", graph_path, "Graph file ('nodes N' then 'u v [etx]' lines)")->required();
    analyze->add_option("--etx", analyze_threshold, "Drop annotated edges above this ETX first");

    auto* simulate = app.add_subcommand("simulate", "Run one scenario and write its artifacts");
    std::string sim_config, sim_out;
    std::optional<std::uint64_t> sim_seed;
    simulate->add_option("-c,--config", sim_config, "Scenario config file")->required();
    simulate->add_option("-s,--seed", sim_seed, "Seed (default: run.seeds from the config)");
    simulate->add_option("-o,--out", sim_out, "Output directory")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Score run directories against their ETX reference graphs");
    std::vector<std::string> eval_dirs;
    std::vector<double> eval_thresholds;
    std::string eval_rule, eval_output;
    evaluate->add_option("runs", eval_dirs, "Run directories")->required();
    evaluate->add_option("--etx", eval_thresholds, "ETX thresholds (default: from the run config)")->delimiter(',');
    evaluate->add_option("--rule", eval_rule, "Re-score with this voting rule (needs statements.csv)");
    evaluate->add_option("-o,--output", eval_output, "CSV output file (default: stdout)");

    auto* sweep = app.add_subcommand("sweep", "Repeat a scenario over a parameter range and aggregate");
    std::string sweep_spec, sweep_out;
    std::size_t parallelism = std::max(1u, std::thread::hardware_concurrency());
    sweep->add_option("spec", sweep_spec, "Sweep spec (scenario keys plus sweep.* keys)")->required();
    sweep->add_option("-j,--jobs", parallelism, "Worker threads");
    sweep->add_option("-o,--out", sweep_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*analyze)
            return cmd_analyze(graph_path, analyze_threshold);
        if (*simulate)
            return cmd_simulate(sim_config, sim_seed, sim_out);
        if (*evaluate)
            return cmd_evaluate(eval_dirs, eval_thresholds, eval_rule, eval_output);
        if (*sweep)
            return cmd_sweep(sweep_spec, parallelism, sweep_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
