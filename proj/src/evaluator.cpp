#include "meshbridge/evaluator.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <iomanip>

namespace meshbridge::evaluator {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
}

Reference build_reference(const TrafficCounters& counters, double etx_threshold) {
    Reference ref{etx_reference_graph(counters, etx_threshold), {}};
    ref.truth = tarjan_report(ref.graph);
    return ref;
}

namespace {

bool masked(const Edge& e, const std::vector<int>& groups) {
    if (e.u >= groups.size() || e.v >= groups.size())
        return false;
    return groups[e.u] >= 0 && groups[e.u] == groups[e.v];
}

void count(ConfusionMatrix& cm, bool claimed, bool truth) {
    if (claimed && truth)
        ++cm.tp;
    else if (claimed)
        ++cm.fp;
    else if (truth)
        ++cm.fn;
    else
        ++cm.tn;
}

}  // namespace

RunClassification classify_run(const scenarios::SnapshotLog& snapshots, const Reference& reference,
                               const ClassifyOptions& options) {
    const std::size_t n = reference.graph.node_count();
    std::map<std::size_t, std::vector<const scenarios::SnapshotEntry*>> by_seq;
    for (const auto& entry : snapshots) {
        if (entry.node >= n)
            throw DataError("snapshot references unknown node " + std::to_string(entry.node));
        for (const Edge& e : entry.bridges)
            if (e.u >= n || e.v >= n)
                throw DataError("snapshot references unknown node in edge " + to_string(e));
        by_seq[entry.seq].push_back(&entry);
    }

    RunClassification out;
    for (const auto& [seq, entries] : by_seq) {
        ++out.snapshots;
        std::map<Edge, int> votes;
        std::set<NodeId> claimed_nodes;
        for (const auto* entry : entries) {
            if (entry->is_articulation)
                claimed_nodes.insert(entry->node);
            for (const Edge& e : entry->bridges)
                if (e.u == entry->node || e.v == entry->node)
                    ++votes[e];
        }
        std::set<Edge> claimed;
        for (const auto& [edge, count] : votes)
            if (count >= (options.detected_twice ? 2 : 1))
                claimed.insert(edge);

        for (const Edge& e : claimed)
            if (!reference.graph.has_edge(e.u, e.v) || masked(e, options.groups))
                ++out.bridges.excluded;
        for (const Edge& e : reference.graph.edges()) {
            if (masked(e, options.groups))
                continue;
            count(out.bridges.cm, claimed.count(e) > 0, reference.truth.bridges.count(e) > 0);
        }
        for (NodeId v = 0; v < n; ++v)
            count(out.articulation.cm, claimed_nodes.count(v) > 0, reference.truth.articulation_points.count(v) > 0);
    }
    return out;
}

Metric precision(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fp == 0)
        return {0.0, true};
    return {static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp), false};
}

Metric recall(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fn == 0)
        return {0.0, true};
    return {static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn), false};
}

Metric f1(const ConfusionMatrix& cm) {
    Metric p = precision(cm), r = recall(cm);
    if (p.value + r.value == 0)
        return {0.0, true};
    return {2 * p.value * r.value / (p.value + r.value), p.degenerate || r.degenerate};
}

MetricSample sample(const ConfusionMatrix& cm) {
    return {precision(cm), recall(cm), f1(cm)};
}

MeanCi mean_ci(std::span<const double> samples, double level) {
    if (samples.size() < 2)
        throw std::invalid_argument("confidence interval needs at least two samples");
    if (!(level > 0 && level < 1))
        throw std::invalid_argument("confidence level outside (0,1)");
    const double n = static_cast<double>(samples.size());
    double mean = 0;
    for (double s : samples)
        mean += s;
    mean /= n;
    double ss = 0;
    for (double s : samples)
        ss += (s - mean) * (s - mean);
    const double sd = std::sqrt(ss / (n - 1));
    boost::math::students_t dist(n - 1);
    const double t = boost::math::quantile(boost::math::complement(dist, (1 - level) / 2));
    return {mean, t * sd / std::sqrt(n), samples.size()};
}

std::string format_ci(const MeanCi& ci, double level, int digits) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << ci.mean << " +/- " << ci.halfwidth << " ("
        << std::setprecision(0) << level * 100 << "% C.I., n=" << ci.n << ")";
    return out.str();
}

bool ci_disjoint(const MeanCi& a, const MeanCi& b) {
    return a.mean + a.halfwidth < b.mean - b.halfwidth || b.mean + b.halfwidth < a.mean - a.halfwidth;
}

}  // namespace meshbridge::evaluator
