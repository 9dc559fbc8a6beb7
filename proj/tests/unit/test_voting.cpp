#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "meshbridge/voting.hpp"

using namespace meshbridge;
using namespace meshbridge::voting;

namespace {

Statement positive(double c = 1.0) {
    return {true, c, {}, 0};
}
Statement negative(double c = 1.0) {
    return {false, c, {}, 0};
}

bool decide(Rule rule, const std::vector<Statement>& window, std::optional<double> prior = std::nullopt) {
    RuleConfig cfg;
    cfg.rule = rule;
    cfg.prior = prior;
    return vote(window, cfg);
}

}  // namespace

TEST_CASE("logit weight") {
    CHECK(weight(0.5) == 0.0);
    CHECK(weight(0.9) == doctest::Approx(std::log(9.0)).epsilon(1e-12));
    CHECK(weight(0.9) == doctest::Approx(2.1972).epsilon(1e-4));
    for (double p : {0.01, 0.2, 0.37, 0.66, 0.999})
        CHECK(std::abs(weight(1 - p) + weight(p)) < 1e-12);
    CHECK_THROWS_AS(weight(0), std::domain_error);
    CHECK_THROWS_AS(weight(1), std::domain_error);
}

TEST_CASE("rule examples") {
    std::vector<Statement> all_yes(5, positive());
    CHECK(decide(Rule::unanimity, all_yes));

    std::vector<Statement> one_no{positive(), positive(), negative(), positive(), positive()};
    CHECK_FALSE(decide(Rule::unanimity, one_no));
    CHECK(decide(Rule::simple_majority, one_no));
    CHECK(decide(Rule::one_vote, one_no));

    std::vector<Statement> contested{positive(0.95), negative(0.95)};
    CHECK_FALSE(decide(Rule::competent_cycle, contested));
    CHECK_FALSE(decide(Rule::simple_majority, contested));

    std::vector<Statement> weak_no{positive(), positive(), negative(0.85)};
    CHECK(decide(Rule::competent_cycle, weak_no));
    CHECK(decide(Rule::intelligent_majority, weak_no));
    std::vector<Statement> strong_no{positive(), positive(), negative(0.9)};
    CHECK_FALSE(decide(Rule::intelligent_majority, strong_no));
}

TEST_CASE("empty window") {
    std::vector<Statement> none;
    CHECK(decide(Rule::unanimity, none));
    CHECK(decide(Rule::competent_cycle, none));
    CHECK_FALSE(decide(Rule::simple_majority, none));
    CHECK_FALSE(decide(Rule::one_vote, none));
    CHECK_FALSE(decide(Rule::intelligent_majority, none));
    CHECK_FALSE(decide(Rule::weighted, none, 0.5));
}

TEST_CASE("only the last window entries count") {
    std::vector<Statement> history{negative(), negative(), positive(), positive(), positive(), positive(), positive()};
    CHECK(decide(Rule::unanimity, history));
    RuleConfig wide;
    wide.rule = Rule::unanimity;
    wide.window = 7;
    CHECK_FALSE(vote(history, wide));
}

TEST_CASE("weighted rule") {
    // 2 positives at 0.9 against 1 negative at 0.9: net ln 9 > 0.
    CHECK(decide(Rule::weighted, {positive(0.9), positive(0.9), negative(0.9)}, 0.5));
    // A low prior lowers the bar.
    CHECK(decide(Rule::weighted, {positive(0.9), negative(0.9)}, 0.1));
    CHECK_FALSE(decide(Rule::weighted, {positive(0.9), negative(0.9)}, 0.5));
    CHECK_THROWS(decide(Rule::weighted, {positive()}));
    CHECK_THROWS(decide(Rule::weighted, {positive()}, 1.0));
    // Certain statements are clamped instead of producing infinite weight.
    CHECK(decide(Rule::weighted, {positive(1.0)}, 0.5));
}

TEST_CASE("weighted with equal competences and an even prior is a strict majority") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 2000; ++trial) {
        const double c = 0.5 + 0.5 * static_cast<double>(rng() % 1000 + 1) / 1001.0;
        const std::size_t len = 1 + rng() % 5;
        std::vector<Statement> w;
        int balance = 0;
        for (std::size_t i = 0; i < len; ++i) {
            bool yes = rng() & 1u;
            balance += yes ? 1 : -1;
            w.push_back(yes ? positive(c) : negative(c));
        }
        CHECK(decide(Rule::weighted, w, 0.5) == (balance > 0));
        CHECK(decide(Rule::weighted, w, 0.5) == decide(Rule::simple_majority, w));
    }
}

TEST_CASE("implication chain over random windows") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 3000; ++trial) {
        const std::size_t len = rng() % 6;
        std::vector<Statement> w;
        for (std::size_t i = 0; i < len; ++i)
            w.push_back({(rng() & 1u) != 0, 0.8 + 0.2 * static_cast<double>(rng() % 100) / 100.0, {}, 0});
        const bool unanimity = decide(Rule::unanimity, w);
        const bool majority = decide(Rule::simple_majority, w);
        const bool one = decide(Rule::one_vote, w);
        const bool intelligent = decide(Rule::intelligent_majority, w);
        const bool cycle = decide(Rule::competent_cycle, w);
        if (!w.empty()) {
            CHECK((!unanimity || majority));
            CHECK((!majority || one));
        }
        CHECK((!intelligent || (majority && cycle)));
    }
}

TEST_CASE("unanimity stays negative for a full window after one negative") {
    RuleConfig cfg;
    cfg.rule = Rule::unanimity;
    for (std::size_t k = 1; k <= 7; ++k) {
        cfg.window = k;
        std::vector<Statement> history(k, positive());
        history.push_back(negative());
        std::size_t negatives = 0;
        for (std::size_t step = 0; step < k; ++step) {
            if (!vote(history, cfg))
                ++negatives;
            history.push_back(positive());
        }
        CHECK(negatives == k);
        CHECK(vote(history, cfg));
    }
}

TEST_CASE("network prior and rule names") {
    CHECK(network_prior(10, 100) == doctest::Approx(0.1));
    CHECK(weight(network_prior(1, 2)) == 0.0);
    CHECK_THROWS(network_prior(0, 10));
    CHECK_THROWS(network_prior(10, 10));
    for (Rule r : {Rule::unanimity, Rule::simple_majority, Rule::one_vote, Rule::intelligent_majority,
                   Rule::competent_cycle, Rule::weighted})
        CHECK(parse_rule(rule_name(r)) == r);
    CHECK_THROWS(parse_rule("plurality"));
    RuleConfig zero;
    zero.window = 0;
    CHECK_THROWS(zero.validate());
}
