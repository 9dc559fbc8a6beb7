#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "meshbridge/graph.hpp"

namespace meshbridge {

inline constexpr double kInfiniteEtx = std::numeric_limits<double>::infinity();

// Gaussian-in-dB reception margin over log-distance path loss.
struct ShadowingParams {
    double pathloss_exp = 2.0;
    double std_db = 2.0;
    double dist0 = 1.0;
    double margin_db = 0.0;

    // Carried for config fidelity only; the curve is pinned by margin_db.
    std::optional<double> tx_power;
    std::optional<double> rx_threshold;
    std::optional<double> cs_threshold;

    // margin_db chosen so reception_probability(distance) == probability.
    static ShadowingParams calibrated(double distance = 370.0, double probability = 0.1,
                                      double std_db = 2.0, double pathloss_exp = 2.0,
                                      double dist0 = 1.0);
    void validate() const;
};

double reception_probability(double distance, const ShadowingParams& p);
double normal_cdf(double x);
double normal_quantile(double p);

double etx_from_probabilities(double forward, double reverse);

class UndefinedLinkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrafficCounters {
public:
    TrafficCounters() : TrafficCounters(0) {}
    explicit TrafficCounters(std::size_t node_count);

    std::size_t node_count() const { return tx_.size(); }
    void record_tx(NodeId sender) { ++tx_.at(sender); }
    void record_rx(NodeId sender, NodeId receiver) { ++rx_.at(index(sender, receiver)); }
    std::uint64_t tx(NodeId sender) const { return tx_.at(sender); }
    std::uint64_t rx(NodeId sender, NodeId receiver) const { return rx_.at(index(sender, receiver)); }

    void set_tx(NodeId sender, std::uint64_t count) { tx_.at(sender) = count; }
    void set_rx(NodeId sender, NodeId receiver, std::uint64_t count) { rx_.at(index(sender, receiver)) = count; }

    bool operator==(const TrafficCounters&) const = default;

    // Rows "sender,receiver,tx,rx". A row with sender == receiver carries the tx count only.
    void write_csv(std::ostream& out) const;
    static TrafficCounters read_csv(std::istream& in, std::size_t node_count);

private:
    std::size_t index(NodeId s, NodeId r) const;

    std::vector<std::uint64_t> tx_;
    std::vector<std::uint64_t> rx_;
};

double etx_from_counters(const TrafficCounters& c, NodeId a, NodeId b);

// Edge {a,b} iff ETX(a,b) is finite and at most the threshold. Links with an idle endpoint are left out.
Graph etx_reference_graph(const TrafficCounters& c, double threshold);

}  // namespace meshbridge
