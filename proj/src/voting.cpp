#include "meshbridge/voting.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace meshbridge::voting {

void RuleConfig::validate() const {
    if (window < 1)
        throw std::invalid_argument("voting window must be at least 1");
    if (rule == Rule::weighted) {
        if (!prior)
            throw std::invalid_argument("weighted rule needs a prior");
        if (!(*prior > 0 && *prior < 1))
            throw std::invalid_argument("weighted prior must lie strictly between 0 and 1");
    }
}

double weight(double p) {
    if (!(p > 0 && p < 1))
        throw std::domain_error("weight needs 0 < p < 1");
    return std::log(p / (1.0 - p));
}

bool vote(std::span<const Statement> history, const RuleConfig& cfg) {
    cfg.validate();
    if (history.size() > cfg.window)
        history = history.last(cfg.window);

    std::size_t positives = 0;
    bool trusted_negative = false;
    for (const Statement& s : history) {
        if (s.positive)
            ++positives;
        else if (s.competence >= cfg.trust_threshold)
            trusted_negative = true;
    }
    const std::size_t total = history.size();
    const bool majority = 2 * positives > total;

    switch (cfg.rule) {
    case Rule::unanimity:
        return positives == total;
    case Rule::simple_majority:
        return majority;
    case Rule::one_vote:
        return positives > 0;
    case Rule::intelligent_majority:
        return majority && !trusted_negative;
    case Rule::competent_cycle:
        return !trusted_negative;
    case Rule::weighted: {
        if (total == 0)
            return false;
        double sum = 0;
        for (const Statement& s : history) {
            // Certain statements would have infinite weight.
            double w = weight(std::clamp(s.competence, 0.01, 0.99));
            sum += s.positive ? w : -w;
        }
        return sum > weight(*cfg.prior);
    }
    }
    return false;
}

double network_prior(std::size_t positives, std::size_t total) {
    if (positives == 0 || positives >= total)
        throw std::invalid_argument("prior needs 0 < positives < total");
    return static_cast<double>(positives) / static_cast<double>(total);
}

namespace {
constexpr std::array<std::pair<Rule, std::string_view>, 6> kNames{{
    {Rule::unanimity, "unanimity"},
    {Rule::simple_majority, "simple-majority"},
    {Rule::one_vote, "one-vote"},
    {Rule::intelligent_majority, "intelligent-majority"},
    {Rule::competent_cycle, "competent-cycle"},
    {Rule::weighted, "weighted"},
}};
}

std::string_view rule_name(Rule rule) {
    for (auto& [r, name] : kNames)
        if (r == rule)
            return name;
    return "?";
}

Rule parse_rule(std::string_view name) {
    for (auto& [r, n] : kNames)
        if (n == name)
            return r;
    throw std::invalid_argument("unknown voting rule '" + std::string(name) + "'");
}

}  // namespace meshbridge::voting
