#include <doctest.h>

#include <random>

#include "meshbridge/chaudhuri.hpp"
#include "../support/generators.hpp"

using namespace meshbridge;

namespace {

std::set<NodeId> articulation_of(const chaudhuri::BaselineResult& r) {
    std::set<NodeId> out;
    for (auto [node, yes] : r.is_articulation)
        if (yes)
            out.insert(node);
    return out;
}

}  // namespace

TEST_CASE("baseline on a path") {
    Graph path(3);
    path.add_edge(0, 1);
    path.add_edge(1, 2);
    CHECK(articulation_of(chaudhuri::run_baseline(path, 0)) == std::set<NodeId>{1});
    CHECK(articulation_of(chaudhuri::run_baseline(path, 1)) == std::set<NodeId>{1});
}

TEST_CASE("baseline on a four-cycle") {
    Graph cycle(4);
    for (NodeId i = 0; i < 4; ++i)
        cycle.add_edge(i, (i + 1) % 4);
    for (NodeId root = 0; root < 4; ++root)
        CHECK(articulation_of(chaudhuri::run_baseline(cycle, root)).empty());
}

TEST_CASE("root with two subtrees is an articulation point") {
    Graph g(5);
    g.add_edge(0, 1);
    g.add_edge(1, 2);
    g.add_edge(2, 0);
    g.add_edge(0, 3);
    g.add_edge(3, 4);
    g.add_edge(4, 0);
    CHECK(articulation_of(chaudhuri::run_baseline(g, 0)) == std::set<NodeId>{0});
    CHECK(articulation_of(chaudhuri::run_baseline(g, 2)) == std::set<NodeId>{0});
}

TEST_CASE("baseline agrees with tarjan and uses linear messages") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 1 + rng() % 15;
        Graph g = testing::random_connected_graph(rng, n, rng() % (2 * n));
        const NodeId root = static_cast<NodeId>(rng() % n);
        auto result = chaudhuri::run_baseline(g, root, rng());
        CHECK(articulation_of(result) == tarjan_report(g).articulation_points);
        CHECK(result.counts.search == 2 * (n - 1));
        CHECK(result.counts.terminate == n - 1);
        CHECK(result.counts.nontree == n - 1);
    }
}

TEST_CASE("baseline refuses a lossy channel") {
    Graph g(2);
    g.add_edge(0, 1);
    netsim::LossTable lossy(2);
    lossy.set_symmetric(0, 1, 0.9);
    netsim::Engine engine(lossy, netsim::ChannelConfig{}, 1);
    CHECK_THROWS_AS(chaudhuri::Protocol(engine, g), std::invalid_argument);

    netsim::NodePlacement placement;
    placement.positions = {{0, 0}, {10, 0}};
    netsim::Engine shadowed(placement, netsim::ChannelConfig{}, 1);
    CHECK_THROWS_AS(chaudhuri::Protocol(shadowed, g), std::invalid_argument);
}
