#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "meshbridge/config.hpp"
#include "meshbridge/evaluator.hpp"
#include "meshbridge/scenarios.hpp"

namespace meshbridge::runner {

inline constexpr const char* kToolVersion = "0.1.0";

std::string header_line(std::uint64_t seed, std::uint64_t config_hash);

scenarios::Topology build_topology(const config::ScenarioConfig& cfg, std::uint64_t seed);

struct Priors {
    double bridge = 0.5;
    double articulation = 0.5;
};
// Pilot run on the same topology with a derived seed; priors read off its reference graph.
Priors estimate_priors(const config::ScenarioConfig& cfg, std::uint64_t seed, double etx_threshold);

dibadawn::PublishRule make_publish_rule(const config::VotingSpec& voting, std::optional<voting::Rule> rule,
                                        const Priors& priors);

struct SimulationOutput {
    scenarios::Topology topology;
    scenarios::RunArtifacts artifacts;
};

SimulationOutput simulate(const config::ScenarioConfig& cfg, std::uint64_t seed,
                          const std::vector<std::optional<voting::Rule>>& rules, std::ostream* event_log = nullptr,
                          std::function<void(const dibadawn::StatementRecord&)> statement_sink = {});

// Writes placement.csv, counters.csv, snapshots.csv, stats.txt, run.conf and, when enabled,
// statements.csv and events.log.
void simulate_to_dir(const config::ScenarioConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir);

void write_statement(std::ostream& out, const dibadawn::StatementRecord& rec);
std::vector<dibadawn::StatementRecord> read_statements(std::istream& in);

// Rebuilds the snapshot log a run would have published under the given rule.
scenarios::SnapshotLog replay_statements(const std::vector<dibadawn::StatementRecord>& records,
                                         std::size_t node_count, std::size_t last_seq, std::size_t history_window,
                                         const dibadawn::PublishRule& rule);

struct EvalRow {
    std::size_t run = 0;
    std::uint64_t seed = 0;
    double etx = 0;
    std::string scope;
    evaluator::ConfusionMatrix cm;
    std::uint64_t excluded = 0;
    evaluator::MetricSample metrics;
};

std::vector<EvalRow> evaluate_artifacts(const scenarios::SnapshotLog& snapshots, const TrafficCounters& counters,
                                        const std::vector<int>& groups, const std::vector<double>& thresholds,
                                        bool detected_twice, std::size_t run, std::uint64_t seed);

void write_eval_csv(std::ostream& out, const std::vector<EvalRow>& rows);

// Evaluates a simulate output directory; rule re-scores from statements.csv.
std::vector<EvalRow> evaluate_run_dir(const std::filesystem::path& dir, const std::vector<double>& thresholds,
                                      const std::string& rule);

struct SweepResult {
    std::size_t failures = 0;
};
SweepResult run_sweep(const config::SweepSpec& spec, std::size_t parallelism, const std::filesystem::path& out_dir,
                      std::ostream& log);

// Runs tasks 0..count-1 on a bounded worker pool.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& task);

}  // namespace meshbridge::runner
