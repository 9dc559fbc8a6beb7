#include "meshbridge/radio.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace meshbridge {

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

ShadowingParams ShadowingParams::calibrated(double distance, double probability, double std_db,
                                            double pathloss_exp, double dist0) {
    ShadowingParams p;
    p.std_db = std_db;
    p.pathloss_exp = pathloss_exp;
    p.dist0 = dist0;
    p.margin_db = 10.0 * pathloss_exp * std::log10(distance / dist0) + std_db * normal_quantile(probability);
    p.validate();
    return p;
}

void ShadowingParams::validate() const {
    if (!(std_db > 0) || !(pathloss_exp > 0) || !(dist0 > 0) || !std::isfinite(margin_db))
        throw std::invalid_argument("shadowing parameters out of range");
}

double reception_probability(double distance, const ShadowingParams& p) {
    if (!(distance > 0))
        throw std::domain_error("distance must be positive");
    double loss = 10.0 * p.pathloss_exp * std::log10(distance / p.dist0);
    return normal_cdf((p.margin_db - loss) / p.std_db);
}

double etx_from_probabilities(double forward, double reverse) {
    if (forward < 0 || forward > 1 || reverse < 0 || reverse > 1)
        throw std::domain_error("delivery ratio outside [0,1]");
    if (forward == 0 || reverse == 0)
        return kInfiniteEtx;
    return 1.0 / (forward * reverse);
}

TrafficCounters::TrafficCounters(std::size_t node_count)
    : tx_(node_count, 0), rx_(node_count * node_count, 0) {}

std::size_t TrafficCounters::index(NodeId s, NodeId r) const {
    if (s >= tx_.size() || r >= tx_.size())
        throw std::out_of_range("counter node out of range");
    return static_cast<std::size_t>(s) * tx_.size() + r;
}

void TrafficCounters::write_csv(std::ostream& out) const {
    out << "sender,receiver,tx,rx\n";
    const auto n = static_cast<NodeId>(node_count());
    for (NodeId s = 0; s < n; ++s) {
        out << s << ',' << s << ',' << tx_[s] << ",0\n";
        for (NodeId r = 0; r < n; ++r)
            if (r != s && rx(s, r) > 0)
                out << s << ',' << r << ',' << tx_[s] << ',' << rx(s, r) << '\n';
    }
}

TrafficCounters TrafficCounters::read_csv(std::istream& in, std::size_t node_count) {
    TrafficCounters c(node_count);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#' || line.rfind("sender", 0) == 0)
            continue;
        std::istringstream row(line);
        unsigned long long s, r, tx, rx;
        char c1, c2, c3;
        if (!(row >> s >> c1 >> r >> c2 >> tx >> c3 >> rx) || c1 != ',' || c2 != ',' || c3 != ',')
            throw ParseError(line_no, "expected sender,receiver,tx,rx");
        if (s >= node_count || r >= node_count)
            throw ParseError(line_no, "node id out of range");
        c.set_tx(static_cast<NodeId>(s), tx);
        if (s != r)
            c.set_rx(static_cast<NodeId>(s), static_cast<NodeId>(r), rx);
    }
    return c;
}

double etx_from_counters(const TrafficCounters& c, NodeId a, NodeId b) {
    if (c.tx(a) == 0 || c.tx(b) == 0)
        throw UndefinedLinkError("no broadcasts recorded for link " + to_string(Edge(a, b)));
    double forward = static_cast<double>(c.rx(a, b)) / static_cast<double>(c.tx(a));
    double reverse = static_cast<double>(c.rx(b, a)) / static_cast<double>(c.tx(b));
    return etx_from_probabilities(forward, reverse);
}

Graph etx_reference_graph(const TrafficCounters& c, double threshold) {
    if (!(threshold > 0))
        throw std::invalid_argument("ETX threshold must be positive");
    const auto n = static_cast<NodeId>(c.node_count());
    Graph g(n);
    for (NodeId a = 0; a < n; ++a) {
        if (c.tx(a) == 0)
            continue;
        for (NodeId b = a + 1; b < n; ++b) {
            if (c.tx(b) == 0 || c.rx(a, b) == 0 || c.rx(b, a) == 0)
                continue;
            if (etx_from_counters(c, a, b) <= threshold)
                g.add_edge(a, b);
        }
    }
    return g;
}

}  // namespace meshbridge
