#include <doctest.h>

#include <cmath>
#include <sstream>

#include "meshbridge/netsim.hpp"

using namespace meshbridge;
using namespace meshbridge::netsim;

namespace {

struct Ping : Packet {
    int value = 0;
    explicit Ping(int v) : value(v) {}
    std::string describe() const override { return "ping(" + std::to_string(value) + ")"; }
};

struct Recorder : PacketHandler {
    struct Arrival {
        double time;
        NodeId node;
        NodeId from;
        int value;
    };
    Engine* engine = nullptr;
    std::vector<Arrival> arrivals;
    std::vector<std::pair<double, std::uint64_t>> timers;

    void on_receive(NodeId node, NodeId from, const PacketPtr& packet) override {
        arrivals.push_back({engine->now(), node, from, static_cast<const Ping&>(*packet).value});
    }
    void on_timer(NodeId, std::uint64_t tag) override { timers.push_back({engine->now(), tag}); }
};

NodePlacement row(std::size_t n, double spacing) {
    NodePlacement p;
    for (std::size_t i = 0; i < n; ++i)
        p.positions.push_back({spacing * static_cast<double>(i), 0});
    return p;
}

ChannelConfig lossless(double range) {
    ChannelConfig c;
    c.mode = ChannelMode::lossless;
    c.lossless_range = range;
    return c;
}

}  // namespace

TEST_CASE("lossless broadcast reaches exactly the nodes in range") {
    Engine engine(row(5, 100), lossless(250), 1);
    Recorder rec;
    rec.engine = &engine;
    engine.set_handler(&rec);
    engine.broadcast(2, std::make_shared<Ping>(1), 0.5);
    engine.run();
    REQUIRE(rec.arrivals.size() == 4);
    for (const auto& a : rec.arrivals) {
        CHECK(a.from == 2);
        CHECK(a.time == doctest::Approx(0.502));
    }
    CHECK(engine.counters().tx(2) == 1);
    CHECK(engine.counters().rx(2, 0) == 1);
    CHECK(engine.counters().rx(2, 4) == 1);
    CHECK(engine.counters().rx(0, 2) == 0);

    Engine edge(row(3, 250), lossless(250), 1);
    CHECK(edge.neighborhood(0).size() == 1);
    CHECK(edge.neighborhood(1).size() == 2);
}

TEST_CASE("lossless unicast succeeds on the first attempt") {
    Engine engine(row(2, 10), lossless(250), 1);
    Recorder rec;
    rec.engine = &engine;
    engine.set_handler(&rec);
    engine.unicast(0, 1, std::make_shared<Ping>(3), 1.0);
    engine.run();
    REQUIRE(rec.arrivals.size() == 1);
    CHECK(rec.arrivals[0].time == doctest::Approx(1.002));
    CHECK(engine.stats().unicast_failures == 0);
}

TEST_CASE("unicast over a dead link fails after every attempt") {
    LossTable table(2);
    Engine engine(table, ChannelConfig{}, 1);
    Recorder rec;
    rec.engine = &engine;
    engine.set_handler(&rec);
    std::ostringstream log;
    engine.set_event_log(&log);
    engine.unicast(0, 1, std::make_shared<Ping>(3), 0);
    engine.run();
    CHECK(rec.arrivals.empty());
    CHECK(engine.stats().unicast_failures == 1);
    CHECK(log.str().find("attempts=7 failed") != std::string::npos);
}

TEST_CASE("unicast with retries on a coin-flip link") {
    LossTable table(2);
    table.set_symmetric(0, 1, 0.5);
    Engine engine(table, ChannelConfig{}, 42);
    Recorder rec;
    rec.engine = &engine;
    engine.set_handler(&rec);
    const int trials = 10000;
    for (int i = 0; i < trials; ++i)
        engine.unicast(0, 1, std::make_shared<Ping>(i), i * 1.0);
    engine.run();
    const double rate = static_cast<double>(rec.arrivals.size()) / trials;
    CHECK(rate == doctest::Approx(1.0 - std::pow(0.5, 7)).epsilon(0.01));
    // Arrivals land after a whole number of attempt slots.
    for (const auto& a : rec.arrivals) {
        double slots = (a.time - a.value) / 0.002;
        CHECK(slots == doctest::Approx(std::round(slots)));
        CHECK(slots >= 1 - 1e-9);
        CHECK(slots <= 7 + 1e-9);
    }
}

TEST_CASE("shadowing broadcast rarely crosses a long gap") {
    ChannelConfig c;
    Engine engine(row(2, 900), c, 3);
    CHECK(engine.link_probability(0, 1) < 1e-5);
    Recorder rec;
    rec.engine = &engine;
    engine.set_handler(&rec);
    for (int i = 0; i < 1000; ++i)
        engine.broadcast(0, std::make_shared<Ping>(i), i);
    engine.run();
    CHECK(rec.arrivals.size() <= 1);
    CHECK(engine.counters().tx(0) == 1000);
}

TEST_CASE("timers fire in time then set order, cancel is honored") {
    Engine engine(row(1, 0), lossless(1), 1);
    Recorder rec;
    rec.engine = &engine;
    engine.set_handler(&rec);
    engine.set_timer(0, 2.0, 1);
    engine.set_timer(0, 1.0, 2);
    engine.set_timer(0, 1.0, 3);
    TimerId doomed = engine.set_timer(0, 0.5, 4);
    engine.cancel_timer(doomed);
    engine.cancel_timer(9999);
    engine.run();
    REQUIRE(rec.timers.size() == 3);
    CHECK(rec.timers[0].second == 2);
    CHECK(rec.timers[1].second == 3);
    CHECK(rec.timers[2].second == 1);
    CHECK_THROWS(engine.set_timer(0, -1, 0));
}

TEST_CASE("restarting a timer fires once") {
    Engine engine(row(1, 0), lossless(1), 1);
    Recorder rec;
    rec.engine = &engine;
    engine.set_handler(&rec);
    TimerId first = engine.set_timer(0, 1.0, 7);
    engine.cancel_timer(first);
    engine.set_timer(0, 1.5, 7);
    engine.run();
    REQUIRE(rec.timers.size() == 1);
    CHECK(rec.timers[0].first == doctest::Approx(1.5));
}

TEST_CASE("zero-duration timer precedes later events") {
    Engine engine(row(1, 0), lossless(1), 1);
    Recorder rec;
    rec.engine = &engine;
    engine.set_handler(&rec);
    std::vector<std::string> order;
    engine.schedule(1.0, [&] {
        engine.set_timer(0, 0.0, 5);
        order.push_back("action");
    });
    engine.schedule(1.0 + 1e-9, [&] { order.push_back("later"); });
    engine.run();
    REQUIRE(rec.timers.size() == 1);
    CHECK(rec.timers[0].first == 1.0);
    CHECK(order == std::vector<std::string>{"action", "later"});
}

TEST_CASE("events inserted during processing keep time order") {
    Engine engine(row(1, 0), lossless(1), 1);
    std::vector<double> seen;
    engine.schedule(5.0, [&] { seen.push_back(engine.now()); });
    engine.schedule(1.0, [&] {
        seen.push_back(engine.now());
        engine.schedule(3.0, [&] { seen.push_back(engine.now()); });
    });
    engine.run_until(4.0);
    CHECK(seen == std::vector<double>{1.0, 3.0});
    CHECK(engine.now() == 4.0);
    engine.run_until(5.0);
    CHECK(seen.size() == 3);
    CHECK(engine.idle());

    Engine empty(row(1, 0), lossless(1), 1);
    empty.run_until(10);
    CHECK(empty.idle());
}

TEST_CASE("drop filter suppresses chosen receptions") {
    Engine engine(row(3, 10), lossless(250), 1);
    Recorder rec;
    rec.engine = &engine;
    engine.set_handler(&rec);
    engine.set_drop_filter([](const Reception& r) { return r.is_broadcast && r.receiver == 2; });
    engine.broadcast(0, std::make_shared<Ping>(1), 0);
    engine.run();
    REQUIRE(rec.arrivals.size() == 1);
    CHECK(rec.arrivals[0].node == 1);
    CHECK(engine.counters().rx(0, 2) == 0);
}

namespace {

std::string traffic_log(std::uint64_t seed) {
    Engine engine(row(6, 150), ChannelConfig{}, seed);
    Recorder rec;
    rec.engine = &engine;
    engine.set_handler(&rec);
    std::ostringstream log;
    engine.set_event_log(&log);
    for (int i = 0; i < 200; ++i) {
        engine.broadcast(static_cast<NodeId>(i % 6), std::make_shared<Ping>(i), i * 0.01);
        engine.unicast(static_cast<NodeId>(i % 6), static_cast<NodeId>((i + 2) % 6), std::make_shared<Ping>(-i),
                       i * 0.01);
    }
    engine.run();
    return log.str();
}

}  // namespace

TEST_CASE("same seed gives a byte-identical event log") {
    const std::string a = traffic_log(17);
    CHECK(a == traffic_log(17));
    CHECK(a != traffic_log(18));
    CHECK(a.rfind("0.000000000 tx-bcast 0 ping(0)", 0) == 0);
}

TEST_CASE("broadcast conservation") {
    ChannelConfig c;
    Engine engine(row(8, 90), c, 2);
    for (int i = 0; i < 500; ++i)
        engine.broadcast(static_cast<NodeId>(i % 8), std::make_shared<Ping>(i), i * 0.01);
    engine.run();
    for (NodeId s = 0; s < 8; ++s) {
        std::uint64_t received = 0;
        for (NodeId r = 0; r < 8; ++r)
            if (r != s) {
                CHECK(engine.counters().rx(s, r) <= engine.counters().tx(s));
                received += engine.counters().rx(s, r);
            }
        CHECK(received <= 7 * engine.counters().tx(s));
        CHECK(engine.counters().tx(s) == 500 / 8 + (s < 500 % 8 ? 1 : 0));
    }
}

TEST_CASE("channel validation") {
    ChannelConfig c;
    c.unicast_attempts = 0;
    CHECK_THROWS(Engine(row(2, 1), c, 1));
    NodePlacement bad;
    bad.positions.push_back({std::nan(""), 0});
    CHECK_THROWS(Engine(bad, ChannelConfig{}, 1));
    LossTable t(2);
    CHECK_THROWS(t.set(0, 1, 1.5));
    CHECK_THROWS(t.set(0, 0, 1.0));
}
