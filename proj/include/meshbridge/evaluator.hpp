#pragma once

#include <span>
#include <string>
#include <vector>

#include "meshbridge/graph.hpp"
#include "meshbridge/radio.hpp"
#include "meshbridge/scenarios.hpp"

namespace meshbridge::evaluator {

struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    ConfusionMatrix& operator+=(const ConfusionMatrix& o);
    bool operator==(const ConfusionMatrix&) const = default;
};

struct ScopeResult {
    ConfusionMatrix cm;
    // Claimed decisions on edges outside the evaluable set.
    std::uint64_t excluded = 0;
};

struct Reference {
    Graph graph;
    BiconnectivityReport truth;
};

Reference build_reference(const TrafficCounters& counters, double etx_threshold);

struct ClassifyOptions {
    bool detected_twice = true;
    // Edges whose endpoints share a group >= 0 are masked.
    std::vector<int> groups;
};

struct RunClassification {
    ScopeResult bridges;
    ScopeResult articulation;
    std::size_t snapshots = 0;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Sums the per-snapshot confusion matrices of one run.
RunClassification classify_run(const scenarios::SnapshotLog& snapshots, const Reference& reference,
                               const ClassifyOptions& options = {});

struct Metric {
    double value = 0;
    bool degenerate = false;
};

Metric precision(const ConfusionMatrix& cm);
Metric recall(const ConfusionMatrix& cm);
Metric f1(const ConfusionMatrix& cm);

struct MetricSample {
    Metric precision;
    Metric recall;
    Metric f1;
};
MetricSample sample(const ConfusionMatrix& cm);

struct MeanCi {
    double mean = 0;
    double halfwidth = 0;
    std::size_t n = 0;
};

// Sample mean and two-sided Student-t halfwidth; needs n >= 2.
MeanCi mean_ci(std::span<const double> samples, double level = 0.95);
std::string format_ci(const MeanCi& ci, double level = 0.95, int digits = 3);
bool ci_disjoint(const MeanCi& a, const MeanCi& b);

}  // namespace meshbridge::evaluator
