#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "meshbridge/ids.hpp"

namespace meshbridge::voting {

enum class Rule { unanimity, simple_majority, one_vote, intelligent_majority, competent_cycle, weighted };

struct Statement {
    bool positive = false;
    double competence = 1.0;
    ExplorerId search;
    double time = 0;
};

struct RuleConfig {
    Rule rule = Rule::simple_majority;
    std::size_t window = 5;
    double trust_threshold = 0.9;
    std::optional<double> prior;

    void validate() const;
};

// ln(p / (1 - p)).
double weight(double p);

// Votes over the last cfg.window entries of history (oldest first).
bool vote(std::span<const Statement> history, const RuleConfig& cfg);

double network_prior(std::size_t positives, std::size_t total);

std::string_view rule_name(Rule rule);
Rule parse_rule(std::string_view name);

}  // namespace meshbridge::voting
