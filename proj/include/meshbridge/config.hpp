#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "meshbridge/dibadawn.hpp"
#include "meshbridge/netsim.hpp"
#include "meshbridge/scenarios.hpp"

namespace meshbridge::config {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Ordered "key = value" entries; '#' starts a comment.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::string& path);

enum class ProtocolKind { dibadawn, chaudhuri };

struct TopologySpec {
    std::string kind = "random_geometric";
    scenarios::RandomGeometricParams random;
    scenarios::TwoClusterParams clusters;
    std::size_t nodes = 21;  // ring and line
    double spacing = 200;
    std::string graph_file;
};

struct VotingSpec {
    std::optional<voting::Rule> rule;  // empty = raw last-search results
    std::size_t window = 5;
    double trust_threshold = 0.9;
    std::optional<double> bridge_prior;  // empty = estimate with a pilot run
    std::optional<double> articulation_prior;
};

struct ScenarioConfig {
    TopologySpec topology;
    netsim::ChannelConfig channel;
    scenarios::ScheduleConfig schedule;
    ProtocolKind protocol_kind = ProtocolKind::dibadawn;
    dibadawn::ProtocolConfig protocol;
    VotingSpec voting;
    std::vector<double> etx_thresholds{10, 100};
    bool detected_twice = true;
    double level = 0.95;
    std::vector<std::uint64_t> seeds{1};
    bool record_statements = false;
    bool event_log = false;

    KeyValues source;
    std::uint64_t hash = 0;
};

// Unknown keys and malformed values raise ConfigError listing every problem found.
ScenarioConfig build_scenario(const KeyValues& kv);

struct SweepSpec {
    ScenarioConfig base;
    KeyValues base_entries;
    std::string parameter;
    std::vector<std::string> values;
    std::size_t repetitions = 30;
    std::uint64_t base_seed = 1;
};
SweepSpec build_sweep(const KeyValues& kv);

std::uint64_t fnv1a(const std::string& text);
std::uint64_t config_hash(const KeyValues& kv);
std::string hex(std::uint64_t value);

// The documented keys and their defaults.
const KeyValues& defaults();

}  // namespace meshbridge::config
