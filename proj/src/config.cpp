#include "meshbridge/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace meshbridge::config {

namespace {

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos)
        return {};
    auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (auto t = trim(item); !t.empty())
            out.push_back(t);
    return out;
}

// Collects all conversion problems before failing.
class Reader {
public:
    explicit Reader(const KeyValues& kv) : kv_(kv) {}

    const std::string& raw(const std::string& key) { return kv_.at(key); }

    double real(const std::string& key) {
        const std::string& v = raw(key);
        double out = 0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || ptr != v.data() + v.size())
            problem(key, "expected a number, got '" + v + "'");
        return out;
    }

    long long integer(const std::string& key) {
        const std::string& v = raw(key);
        long long out = 0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || ptr != v.data() + v.size())
            problem(key, "expected an integer, got '" + v + "'");
        return out;
    }

    std::size_t count(const std::string& key) {
        long long v = integer(key);
        if (v < 0)
            problem(key, "must not be negative");
        return static_cast<std::size_t>(v < 0 ? 0 : v);
    }

    bool flag(const std::string& key) {
        const std::string& v = raw(key);
        if (v == "true" || v == "1" || v == "yes")
            return true;
        if (v == "false" || v == "0" || v == "no")
            return false;
        problem(key, "expected true or false, got '" + v + "'");
        return false;
    }

    std::optional<double> optional_real(const std::string& key, const std::string& empty_word) {
        if (raw(key) == empty_word)
            return std::nullopt;
        return real(key);
    }

    std::vector<double> reals(const std::string& key) {
        std::vector<double> out;
        for (const auto& item : split_list(raw(key))) {
            double v = 0;
            auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
            if (ec != std::errc() || ptr != item.data() + item.size())
                problem(key, "bad list entry '" + item + "'");
            out.push_back(v);
        }
        return out;
    }

    std::vector<std::uint64_t> seeds(const std::string& key) {
        std::vector<std::uint64_t> out;
        for (const auto& item : split_list(raw(key))) {
            std::uint64_t v = 0;
            auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
            if (ec != std::errc() || ptr != item.data() + item.size())
                problem(key, "bad seed '" + item + "'");
            out.push_back(v);
        }
        if (out.empty())
            problem(key, "needs at least one seed");
        return out;
    }

    void problem(const std::string& key, const std::string& what) { problems_.push_back(key + ": " + what); }

    void check(bool ok, const std::string& key, const std::string& what) {
        if (!ok)
            problem(key, what);
    }

    void finish() const {
        if (problems_.empty())
            return;
        std::string all = "invalid configuration";
        for (const auto& p : problems_)
            all += "\n  " + p;
        throw ConfigError(all);
    }

private:
    const KeyValues& kv_;
    std::vector<std::string> problems_;
};

const std::vector<std::string>& sweep_keys() {
    static const std::vector<std::string> keys{"sweep.parameter", "sweep.values", "sweep.repetitions",
                                               "sweep.base_seed"};
    return keys;
}

bool is_sweep_key(const std::string& key) {
    for (const auto& k : sweep_keys())
        if (k == key)
            return true;
    return false;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
    KeyValues kv;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        std::string line = trim(raw);
        if (line.empty())
            continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    return kv;
}

KeyValues load_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open " + path);
    return parse_key_values(in);
}

const KeyValues& defaults() {
    static const KeyValues d{
        {"topology.kind", "random_geometric"},
        {"topology.nodes", "175"},
        {"topology.width", "3000"},
        {"topology.height", "3000"},
        {"topology.comm_range", "400"},
        {"topology.max_retries", "1000"},
        {"topology.bridge_length", "250"},
        {"topology.clusters", "10x10"},
        {"topology.radius", "230"},
        {"topology.guard", "170"},
        {"topology.vertical_extent", "300"},
        {"topology.spacing", "200"},
        {"topology.graph_file", ""},
        {"channel.mode", "shadowing"},
        {"channel.range", "250"},
        {"channel.std_db", "2"},
        {"channel.pathloss_exp", "2"},
        {"channel.dist0", "1"},
        {"channel.calibration_distance", "370"},
        {"channel.calibration_probability", "0.1"},
        {"channel.margin_db", "auto"},
        {"channel.max_tx_time", "0.002"},
        {"channel.unicast_attempts", "7"},
        {"schedule.warmup", "200"},
        {"schedule.eval_duration", "300"},
        {"schedule.period", "30"},
        {"schedule.start_probability", "0.8"},
        {"schedule.initial_delay", "20"},
        {"schedule.snapshot_period", "30"},
        {"protocol.kind", "dibadawn"},
        {"protocol.ttl", "10"},
        {"protocol.max_traversal_time", "0.056"},
        {"protocol.jitter_divisor", "4"},
        {"protocol.backward_slot_time", "auto"},
        {"protocol.asymmetry_guard", "true"},
        {"protocol.backward_jitter", "true"},
        {"protocol.history_window", "5"},
        {"voting.rule", "none"},
        {"voting.window", "5"},
        {"voting.trust_threshold", "0.9"},
        {"voting.bridge_prior", "auto"},
        {"voting.articulation_prior", "auto"},
        {"evaluation.etx_thresholds", "10,100"},
        {"evaluation.detected_twice", "true"},
        {"evaluation.level", "0.95"},
        {"run.seeds", "1"},
        {"run.record_statements", "false"},
        {"run.event_log", "false"},
    };
    return d;
}

ScenarioConfig build_scenario(const KeyValues& given) {
    KeyValues kv = defaults();
    std::vector<std::string> unknown;
    for (const auto& [key, value] : given) {
        if (is_sweep_key(key))
            continue;
        if (!kv.count(key)) {
            unknown.push_back(key);
            continue;
        }
        kv[key] = value;
    }
    Reader r(kv);
    for (const auto& key : unknown)
        r.problem(key, "unknown key");

    ScenarioConfig cfg;
    cfg.source = given;
    cfg.hash = config_hash(given);

    auto& topo = cfg.topology;
    topo.kind = r.raw("topology.kind");
    r.check(topo.kind == "random_geometric" || topo.kind == "two_cluster" || topo.kind == "ring" ||
                topo.kind == "line" || topo.kind == "graph",
            "topology.kind", "expected random_geometric, two_cluster, ring, line or graph");
    topo.random.nodes = r.count("topology.nodes");
    topo.nodes = topo.random.nodes;
    topo.random.width = r.real("topology.width");
    topo.random.height = r.real("topology.height");
    topo.random.comm_range = r.real("topology.comm_range");
    topo.random.max_retries = static_cast<int>(r.integer("topology.max_retries"));
    topo.clusters.bridge_length = r.real("topology.bridge_length");
    {
        const std::string& c = r.raw("topology.clusters");
        unsigned long left = 0, right = 0;
        char x = 0, extra = 0;
        if (std::sscanf(c.c_str(), "%lu%c%lu%c", &left, &x, &right, &extra) != 3 || x != 'x')
            r.problem("topology.clusters", "expected LEFTxRIGHT, got '" + c + "'");
        topo.clusters.count_left = left;
        topo.clusters.count_right = right;
    }
    topo.clusters.radius = r.real("topology.radius");
    topo.clusters.guard = r.real("topology.guard");
    topo.clusters.vertical_extent = r.real("topology.vertical_extent");
    topo.spacing = r.real("topology.spacing");
    topo.graph_file = r.raw("topology.graph_file");
    r.check(topo.kind != "graph" || !topo.graph_file.empty(), "topology.graph_file", "required for graph topologies");

    auto& ch = cfg.channel;
    const std::string& mode = r.raw("channel.mode");
    if (mode == "shadowing")
        ch.mode = netsim::ChannelMode::shadowing;
    else if (mode == "lossless")
        ch.mode = netsim::ChannelMode::lossless;
    else
        r.problem("channel.mode", "expected shadowing or lossless");
    ch.lossless_range = r.real("channel.range");
    {
        double std_db = r.real("channel.std_db"), exp = r.real("channel.pathloss_exp"), d0 = r.real("channel.dist0");
        double cal_d = r.real("channel.calibration_distance"), cal_p = r.real("channel.calibration_probability");
        auto margin = r.optional_real("channel.margin_db", "auto");
        if (std_db > 0 && exp > 0 && d0 > 0 && cal_d > 0 && cal_p > 0 && cal_p < 1) {
            ch.shadowing = ShadowingParams::calibrated(cal_d, cal_p, std_db, exp, d0);
            if (margin)
                ch.shadowing.margin_db = *margin;
        } else {
            r.problem("channel", "shadowing parameters out of range");
        }
    }
    ch.max_tx_time = r.real("channel.max_tx_time");
    ch.unicast_attempts = static_cast<int>(r.integer("channel.unicast_attempts"));
    r.check(ch.unicast_attempts >= 1, "channel.unicast_attempts", "must be at least 1");
    r.check(ch.max_tx_time >= 0, "channel.max_tx_time", "must not be negative");

    auto& sc = cfg.schedule;
    sc.warmup = r.real("schedule.warmup");
    sc.eval_duration = r.real("schedule.eval_duration");
    sc.period = r.real("schedule.period");
    sc.start_probability = r.real("schedule.start_probability");
    sc.initial_delay_max = r.real("schedule.initial_delay");
    sc.snapshot_period = r.real("schedule.snapshot_period");
    r.check(sc.start_probability >= 0 && sc.start_probability <= 1, "schedule.start_probability", "outside [0,1]");
    r.check(sc.period > 0 && sc.snapshot_period > 0, "schedule", "periods must be positive");
    r.check(sc.warmup >= 0 && sc.eval_duration >= 0 && sc.initial_delay_max >= 0, "schedule",
            "durations must not be negative");

    const std::string& kind = r.raw("protocol.kind");
    if (kind == "dibadawn")
        cfg.protocol_kind = ProtocolKind::dibadawn;
    else if (kind == "chaudhuri")
        cfg.protocol_kind = ProtocolKind::chaudhuri;
    else
        r.problem("protocol.kind", "expected dibadawn or chaudhuri");
    r.check(cfg.protocol_kind != ProtocolKind::chaudhuri || mode == "lossless" || topo.kind == "graph",
            "protocol.kind", "chaudhuri needs a lossless channel");
    auto& pr = cfg.protocol;
    pr.initial_ttl = static_cast<int>(r.integer("protocol.ttl"));
    pr.max_traversal_time = r.real("protocol.max_traversal_time");
    pr.jitter_divisor = r.real("protocol.jitter_divisor");
    pr.backward_slot_time = r.optional_real("protocol.backward_slot_time", "auto");
    pr.asymmetry_guard = r.flag("protocol.asymmetry_guard");
    pr.backward_jitter = r.flag("protocol.backward_jitter");
    pr.history_window = r.count("protocol.history_window");
    pr.max_tx_time = ch.max_tx_time;
    pr.unicast_attempts = ch.unicast_attempts;
    r.check(pr.initial_ttl >= 1, "protocol.ttl", "must be at least 1");
    r.check(pr.max_traversal_time > 0, "protocol.max_traversal_time", "must be positive");
    r.check(pr.jitter_divisor > 0, "protocol.jitter_divisor", "must be positive");
    r.check(pr.history_window >= 1, "protocol.history_window", "must be at least 1");

    auto& vo = cfg.voting;
    const std::string& rule = r.raw("voting.rule");
    if (rule != "none") {
        try {
            vo.rule = voting::parse_rule(rule);
        } catch (const std::invalid_argument& e) {
            r.problem("voting.rule", e.what());
        }
    }
    vo.window = r.count("voting.window");
    vo.trust_threshold = r.real("voting.trust_threshold");
    vo.bridge_prior = r.optional_real("voting.bridge_prior", "auto");
    vo.articulation_prior = r.optional_real("voting.articulation_prior", "auto");
    r.check(vo.window >= 1 && vo.window <= pr.history_window, "voting.window",
            "must lie between 1 and protocol.history_window");
    for (auto* prior : {&vo.bridge_prior, &vo.articulation_prior})
        r.check(!*prior || (**prior > 0 && **prior < 1), "voting", "priors must lie strictly between 0 and 1");

    cfg.etx_thresholds = r.reals("evaluation.etx_thresholds");
    r.check(!cfg.etx_thresholds.empty(), "evaluation.etx_thresholds", "needs at least one threshold");
    for (double t : cfg.etx_thresholds)
        r.check(t > 0, "evaluation.etx_thresholds", "thresholds must be positive");
    cfg.detected_twice = r.flag("evaluation.detected_twice");
    cfg.level = r.real("evaluation.level");
    r.check(cfg.level > 0 && cfg.level < 1, "evaluation.level", "outside (0,1)");
    cfg.seeds = r.seeds("run.seeds");
    cfg.record_statements = r.flag("run.record_statements");
    cfg.event_log = r.flag("run.event_log");

    r.finish();
    return cfg;
}

SweepSpec build_sweep(const KeyValues& kv) {
    SweepSpec spec;
    spec.base = build_scenario(kv);
    for (const auto& [key, value] : kv)
        if (!is_sweep_key(key))
            spec.base_entries[key] = value;

    Reader r(kv);
    if (!kv.count("sweep.parameter") || !kv.count("sweep.values"))
        throw ConfigError("sweep needs sweep.parameter and sweep.values");
    spec.parameter = kv.at("sweep.parameter");
    spec.values = split_list(kv.at("sweep.values"));
    if (!defaults().count(spec.parameter))
        r.problem("sweep.parameter", "unknown parameter '" + spec.parameter + "'");
    if (spec.values.empty())
        r.problem("sweep.values", "needs at least one value");
    if (kv.count("sweep.repetitions"))
        spec.repetitions = r.count("sweep.repetitions");
    if (kv.count("sweep.base_seed"))
        spec.base_seed = static_cast<std::uint64_t>(r.integer("sweep.base_seed"));
    r.check(spec.repetitions >= 2, "sweep.repetitions", "needs at least 2 for confidence intervals");
    r.finish();
    for (const auto& value : spec.values) {
        KeyValues trial = spec.base_entries;
        trial[spec.parameter] = value;
        build_scenario(trial);
    }
    return spec;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t config_hash(const KeyValues& kv) {
    std::string canonical;
    for (const auto& [key, value] : kv)
        canonical += key + "=" + value + "\n";
    return fnv1a(canonical);
}

std::string hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace meshbridge::config
