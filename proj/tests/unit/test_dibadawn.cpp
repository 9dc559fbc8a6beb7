#include <doctest.h>

#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "meshbridge/dibadawn.hpp"
#include "../support/generators.hpp"
#include "../support/harness.hpp"

using namespace meshbridge;
using namespace meshbridge::dibadawn;
using testing::Harness;
using testing::make_graph;

namespace {

// Names used in the small worked examples.
constexpr NodeId I = 0, A = 1, B = 2, C = 3;

Graph fig43() {
    return make_graph(4, {{I, A}, {A, B}, {A, C}, {B, C}});
}

}  // namespace

TEST_CASE("competence table") {
    CHECK(competence(1) == 0.95);
    CHECK(competence(2) == 0.90);
    CHECK(competence(13) == 0.9666267);
    CHECK(competence(20) == 0.8646647);
    CHECK(competence(21) == 0.85);
    CHECK(competence(500) == 0.85);
    CHECK_THROWS_AS(competence(0), std::domain_error);
}

TEST_CASE("forward delay arithmetic") {
    ProtocolConfig cfg;
    CHECK(cfg.jitter_max() == doctest::Approx(0.014));
    auto d = compute_forward_delay(0.0, cfg, 0.003);
    CHECK(d.min_delay == doctest::Approx(0.054));
    CHECK(d.own_jitter == 0.003);
    CHECK_FALSE(d.clamped);
    CHECK(compute_forward_delay(cfg.jitter_max(), cfg, 0).min_delay == doctest::Approx(0.040));

    ProtocolConfig tight = cfg;
    tight.max_traversal_time = 0.001;
    auto clamped = compute_forward_delay(0.0005, tight, 0);
    CHECK(clamped.min_delay == 0);
    CHECK(clamped.clamped);
}

TEST_CASE("timeout shrinks with hop distance") {
    ProtocolConfig cfg;
    CHECK(cfg.slot_time() == doctest::Approx(0.014 + 8 * 0.002));
    CHECK(compute_timeout(10, 10, cfg) == 0);
    CHECK(compute_timeout(0, 10, cfg) == doctest::Approx(10 * (0.056 + 0.030)));
    for (int h = 1; h <= 10; ++h)
        CHECK(compute_timeout(h, 10, cfg) < compute_timeout(h - 1, 10, cfg));
    CHECK_THROWS(compute_timeout(11, 10, cfg));
    cfg.backward_slot_time = 0.014;
    CHECK(compute_timeout(9, 10, cfg) == doctest::Approx(0.070));
}

TEST_CASE("cycle ids do not depend on endpoint order") {
    ExplorerId s{4, 2};
    CHECK(CycleId::make(s, 1, 9) == CycleId::make(s, 9, 1));
    CHECK_FALSE(CycleId::make(s, 1, 9) == CycleId::make(s, 1, 8));
    CHECK_FALSE(CycleId::make(s, 1, 9) == CycleId::make({4, 3}, 1, 9));
}

TEST_CASE("isolated initiator finds nothing") {
    Harness h(Graph(1));
    h.search_from(0);
    CHECK(h.bridges_at(0).empty());
    CHECK_FALSE(h.articulation_at(0));
    CHECK(h.protocol.node(0).completed_searches() == 1);
}

TEST_CASE("no search yet publishes nothing") {
    Harness h(make_graph(2, {{0, 1}}));
    CHECK(h.bridges_at(0).empty());
    PublishRule unanimity;
    unanimity.bridges = voting::RuleConfig{voting::Rule::unanimity};
    unanimity.articulation = voting::RuleConfig{voting::Rule::unanimity};
    CHECK(h.protocol.node(0).query_results(unanimity).bridges.empty());
    CHECK_FALSE(h.protocol.node(0).query_results(unanimity).is_articulation);
}

TEST_CASE("triangle trace") {
    Harness h(make_graph(3, {{I, A}, {I, B}, {A, B}}));
    ExplorerId s = h.search_from(I);
    const auto& trace = h.protocol.trace();
    std::map<NodeId, int> hop;
    for (const auto& v : trace.visits)
        hop[v.node] = v.hop;
    CHECK(hop[A] == 1);
    CHECK(hop[B] == 1);
    // Both endpoints detect the cross edge; the items meet at the initiator.
    REQUIRE(trace.detected.size() == 2);
    CHECK(trace.detected[0].cycle == CycleId::make(s, A, B));
    CHECK(trace.detected[1].cycle == CycleId::make(s, A, B));
    REQUIRE(trace.eliminated.size() == 1);
    CHECK(trace.eliminated[0].node == I);
    for (NodeId n : {I, A, B}) {
        CHECK(h.bridges_at(n).empty());
        CHECK_FALSE(h.articulation_at(n));
    }
    for (const auto& m : h.protocol.node(I).last_markings()) {
        CHECK(m.verdict == Verdict::no_bridge);
        CHECK(m.competence == competence(1));
    }
}

TEST_CASE("leaf with a single link reports the bridge") {
    // I - A: A hears nothing else, its buffer stays empty.
    Harness h(make_graph(2, {{I, A}}));
    h.search_from(I);
    CHECK(h.bridges_at(A) == std::set<Edge>{Edge(I, A)});
    CHECK(h.bridges_at(I) == std::set<Edge>{Edge(I, A)});
    CHECK_FALSE(h.articulation_at(A));
    CHECK_FALSE(h.articulation_at(I));
}

TEST_CASE("eliminated cycle items empty the buffer") {
    Harness h(fig43());
    h.search_from(I);
    const auto& trace = h.protocol.trace();
    REQUIRE(trace.eliminated.size() == 1);
    CHECK(trace.eliminated[0].node == A);
    CHECK(h.bridges_at(A) == std::set<Edge>{Edge(I, A)});
    CHECK(h.bridges_at(I) == std::set<Edge>{Edge(I, A)});
    CHECK(h.bridges_at(B).empty());
    CHECK(h.bridges_at(C).empty());
    CHECK(h.articulation_at(A));
    CHECK_FALSE(h.articulation_at(B));
    CHECK_FALSE(h.articulation_at(I));
}

TEST_CASE("bridges from the children do not travel up") {
    Harness h(make_graph(4, {{I, A}, {A, B}, {A, C}}));
    h.search_from(I);
    CHECK(h.bridges_at(A) == std::set<Edge>{Edge(I, A), Edge(A, B), Edge(A, C)});
    CHECK(h.bridges_at(I) == std::set<Edge>{Edge(I, A)});
    CHECK(h.articulation_at(A));
    CHECK(h.protocol.trace().sent_up.empty());
}

TEST_CASE("lost explorer from A to C with the hop guard off") {
    ProtocolConfig cfg;
    cfg.asymmetry_guard = false;
    Harness h(fig43(), cfg);
    h.lose_explorers({{A, C}});
    h.search_from(I);
    std::map<NodeId, std::optional<NodeId>> parent;
    for (const auto& v : h.protocol.trace().visits)
        parent[v.node] = v.parent;
    CHECK(parent[C] == B);
    // C reports BC, B reports AB, A forwards the AC cycle item so AI goes unnoticed.
    CHECK(h.bridges_at(C) == std::set<Edge>{Edge(B, C)});
    CHECK(h.bridges_at(B) == std::set<Edge>{Edge(A, B), Edge(B, C)});
    CHECK(h.bridges_at(A) == std::set<Edge>{Edge(A, B)});
    CHECK(h.bridges_at(I).empty());
    CHECK(h.articulation_at(A));
    CHECK(h.protocol.stats().dropped_at_root == 1);
}

TEST_CASE("lost explorer from A to C with the hop guard on") {
    Harness h(fig43());
    h.lose_explorers({{A, C}});
    h.search_from(I);
    CHECK(h.protocol.stats().asymmetric_cross_edges == 1);
    // A ignores the skewed cross edge, so every tree edge looks like a bridge.
    CHECK(h.bridges_at(A) == std::set<Edge>{Edge(I, A), Edge(A, B)});
    CHECK(h.bridges_at(I) == std::set<Edge>{Edge(I, A)});
    CHECK(h.protocol.stats().dropped_at_root == 0);
}

TEST_CASE("lost explorers from A to B and C") {
    Harness h(fig43());
    h.lose_explorers({{A, B}, {A, C}});
    h.search_from(I);
    CHECK(h.bridges_at(A) == std::set<Edge>{Edge(I, A)});
    CHECK(h.bridges_at(I) == std::set<Edge>{Edge(I, A)});
    CHECK_FALSE(h.articulation_at(A));
    CHECK(h.protocol.node(B).completed_searches() == 0);
    CHECK(h.protocol.node(C).completed_searches() == 0);
}

TEST_CASE("mesh with a departed participant, every initiator") {
    // A=0 B=1 D=2 E=3 F=4 G=5 H=6
    Graph g = make_graph(7, {{0, 1}, {1, 4}, {4, 2}, {2, 1}, {2, 3}, {3, 5}, {5, 6}, {6, 3}});
    for (NodeId initiator = 0; initiator < 7; ++initiator) {
        Harness h(g);
        h.search_from(initiator);
        auto view = h.protocol.network_view();
        CHECK(view.bridges == std::set<Edge>{Edge(0, 1), Edge(2, 3)});
        CHECK(view.articulation_points == std::set<NodeId>{1, 2, 3});
    }
}

TEST_CASE("lossless search matches tarjan and spends 2n-1 transmissions") {
    std::mt19937_64 rng(2024);
    int checked = 0;
    while (checked < 40) {
        const std::size_t n = 2 + rng() % 14;
        Graph g = testing::random_connected_graph(rng, n, rng() % (n + 2));
        const NodeId initiator = static_cast<NodeId>(rng() % n);
        if (testing::eccentricity(g, initiator) > 9)
            continue;
        ++checked;
        Harness h(g, {}, rng());
        h.search_from(initiator);
        auto truth = tarjan_report(g);
        auto view = h.protocol.network_view();
        CHECK(view.bridges == truth.bridges);
        CHECK(view.articulation_points == truth.articulation_points);
        CHECK(h.engine.stats().broadcasts + h.engine.stats().unicasts == 2 * n - 1);
        CHECK(h.engine.stats().unicast_failures == 0);
    }
}

TEST_CASE("cycle items are eliminated at the lowest common ancestor") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 3 + rng() % 12;
        Graph g = testing::random_connected_graph(rng, n, 1 + rng() % n);
        Harness h(g, {}, rng());
        ExplorerId s = h.search_from(0);
        const auto& trace = h.protocol.trace();

        std::map<NodeId, std::optional<NodeId>> parent;
        std::map<NodeId, int> hop;
        for (const auto& v : trace.visits) {
            parent[v.node] = v.parent;
            hop[v.node] = v.hop;
        }
        auto ancestors = [&](NodeId x) {
            std::vector<NodeId> chain{x};
            while (parent[x]) {
                x = *parent[x];
                chain.push_back(x);
            }
            return chain;
        };
        auto lca = [&](NodeId a, NodeId b) {
            auto up = ancestors(a);
            std::set<NodeId> seen(up.begin(), up.end());
            for (NodeId x : ancestors(b))
                if (seen.count(x))
                    return x;
            return NodeId(0);
        };

        std::map<CycleId, std::pair<NodeId, NodeId>> endpoints;
        for (const Edge& e : g.edges())
            endpoints[CycleId::make(s, e.u, e.v)] = {e.u, e.v};

        std::map<CycleId, NodeId> eliminated_at;
        for (const auto& move : trace.eliminated) {
            CHECK(eliminated_at.count(move.cycle) == 0);
            eliminated_at[move.cycle] = move.node;
        }
        std::set<CycleId> detected;
        for (const auto& d : trace.detected)
            detected.insert(d.cycle);
        for (const CycleId& c : detected) {
            REQUIRE(endpoints.count(c));
            auto [a, b] = endpoints[c];
            const NodeId meet = lca(a, b);
            REQUIRE(eliminated_at.count(c));
            CHECK(eliminated_at[c] == meet);
            for (const auto& up : trace.sent_up)
                if (up.cycle == c)
                    CHECK(hop[up.node] > hop[meet]);
        }
    }
}

TEST_CASE("children flush before their parents") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + rng() % 15;
        Graph g = testing::random_connected_graph(rng, n, rng() % n);
        Harness h(g, {}, rng());
        h.search_from(static_cast<NodeId>(rng() % n));
        const auto& trace = h.protocol.trace();
        std::map<NodeId, double> flushed;
        for (const auto& f : trace.flushes)
            flushed[f.node] = f.time;
        double root_time = 0;
        for (const auto& v : trace.visits) {
            if (!v.parent) {
                root_time = flushed.at(v.node);
                continue;
            }
            CHECK(flushed.at(v.node) < flushed.at(*v.parent));
        }
        for (const auto& [node, time] : flushed)
            CHECK(time <= root_time);
    }
}

TEST_CASE("a lower hop group re-broadcasts first on a chain") {
    Graph chain(8);
    for (NodeId i = 0; i + 1 < 8; ++i)
        chain.add_edge(i, i + 1);
    Harness h(chain);
    std::ostringstream log;
    h.engine.set_event_log(&log);
    h.search_from(0);
    std::istringstream lines(log.str());
    std::string line;
    std::vector<NodeId> order;
    while (std::getline(lines, line)) {
        std::istringstream parts(line);
        std::string time, kind;
        NodeId node;
        parts >> time >> kind >> node;
        if (kind == "tx-bcast")
            order.push_back(node);
    }
    CHECK(order == std::vector<NodeId>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("a tree marks every incident edge") {
    Graph star = make_graph(5, {{0, 1}, {0, 2}, {0, 3}, {3, 4}});
    Harness h(star);
    h.search_from(4);
    CHECK(h.bridges_at(0) == std::set<Edge>{Edge(0, 1), Edge(0, 2), Edge(0, 3)});
    CHECK(h.bridges_at(3) == std::set<Edge>{Edge(0, 3), Edge(3, 4)});
    for (const auto& m : h.protocol.node(0).last_markings())
        CHECK(m.competence == 1.0);
}

TEST_CASE("a vanished link fades out of the voted view") {
    Harness h(make_graph(2, {{0, 1}}));
    h.search_from(0);
    PublishRule majority;
    majority.bridges = voting::RuleConfig{voting::Rule::simple_majority};
    CHECK(h.protocol.node(0).query_results(majority).bridges.size() == 1);

    h.engine.set_drop_filter([](const netsim::Reception&) { return true; });
    std::vector<std::size_t> published;
    for (int k = 0; k < 5; ++k) {
        h.search_from(0);
        published.push_back(h.protocol.node(0).query_results(majority).bridges.size());
    }
    // One positive against a growing run of implicit negatives.
    CHECK(published == std::vector<std::size_t>{0, 0, 0, 0, 0});
    const auto& ring = h.protocol.node(0).statements().edges().at(Edge(0, 1));
    CHECK(ring.size() == 5);
    for (const auto& s : ring) {
        CHECK_FALSE(s.positive);
        CHECK(s.competence == 1.0);
    }
    // The raw view follows the last search.
    CHECK(h.bridges_at(0).empty());
}

TEST_CASE("statement store keeps the last k entries per subject") {
    StatementStore store(3);
    for (int i = 0; i < 5; ++i)
        store.push(Edge(1, 2), {i % 2 == 0, 1.0, {0, static_cast<std::uint32_t>(i)}, 0});
    store.push(std::nullopt, {true, 1.0, {}, 0});
    const auto& ring = store.edges().at(Edge(1, 2));
    REQUIRE(ring.size() == 3);
    CHECK(ring.front().search.sequence == 2);
    CHECK(ring.back().search.sequence == 4);
    CHECK(store.self().size() == 1);

    PublishRule unanimity;
    unanimity.bridges = voting::RuleConfig{voting::Rule::unanimity};
    unanimity.articulation = voting::RuleConfig{voting::Rule::unanimity};
    auto voted = publish(store, {}, false, true, unanimity);
    CHECK(voted.bridges.empty());
    CHECK(voted.is_articulation);
    auto raw = publish(store, {Edge(1, 2)}, false, true, {});
    CHECK(raw.bridges == std::set<Edge>{Edge(1, 2)});
    CHECK_FALSE(raw.is_articulation);
}

TEST_CASE("statements reach the sink with search and round") {
    Harness h(fig43());
    std::vector<StatementRecord> records;
    h.protocol.set_statement_sink([&](const StatementRecord& r) { records.push_back(r); });
    h.protocol.set_epoch(3);
    ExplorerId s = h.search_from(I);
    std::size_t self = 0;
    for (const auto& r : records) {
        CHECK(r.search == s);
        CHECK(r.epoch == 3);
        CHECK(r.round == 1);
        if (!r.edge)
            ++self;
    }
    CHECK(self == 4);
    // Marked edges: I {IA}, A {IA, AB, AC}, B {BC}, C {BC}; plus one self record each.
    CHECK(records.size() == 6 + 4);
}

TEST_CASE("backward message for a finished search is dropped") {
    Harness h(make_graph(2, {{0, 1}}));
    ExplorerId s = h.search_from(0);
    BackwardMessage late;
    late.search = s;
    late.sender = 1;
    late.bridge_marker = true;
    h.protocol.node(0).on_backward(late);
    CHECK(h.protocol.stats().stale_backward == 1);
}

TEST_CASE("protocol config validation") {
    ProtocolConfig cfg;
    cfg.initial_ttl = 0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.history_window = 0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.backward_slot_time = -1;
    CHECK_THROWS(cfg.validate());
}
