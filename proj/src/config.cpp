#include "gfflab/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "gfflab/errors.hpp"
#include "gfflab/lattice.hpp"

namespace gfflab {

const char* quantity_tag(Quantity q) {
    switch (q) {
        case Quantity::OneArm: return "one-arm";
        case Quantity::Crossing: return "crossing";
        case Quantity::TwoPoint: return "two-point";
        case Quantity::QVariance: return "q-variance";
        case Quantity::Martingale: return "martingale";
        case Quantity::Isomorphism: return "isomorphism";
        case Quantity::OracleBridge: return "oracle-bridge";
    }
    throw ValidationError("unknown quantity enum value");
}

Quantity quantity_from_tag(const std::string& tag) {
    for (const Quantity q : {Quantity::OneArm, Quantity::Crossing, Quantity::TwoPoint,
                             Quantity::QVariance, Quantity::Martingale, Quantity::Isomorphism,
                             Quantity::OracleBridge}) {
        if (tag == quantity_tag(q)) return q;
    }
    throw ValidationError("unknown quantity: " + tag);
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) +
                                  " is not key = value: " + t);
        const std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (key.empty()) throw ValidationError("empty config key");
        if (out.count(key))
            throw ValidationError("duplicate config key: " + key);
        out[key] = value;
    }
    return out;
}

std::vector<std::int64_t> parse_int_list(const std::string& text) {
    std::vector<std::int64_t> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) throw ValidationError("empty entry in integer list: " + text);
        std::size_t used = 0;
        const long long v = std::stoll(t, &used);
        if (used != t.size()) throw ValidationError("bad integer in list: " + t);
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError("empty integer list");
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) throw ValidationError("empty entry in list: " + text);
        std::size_t used = 0;
        const double v = std::stod(t, &used);
        if (used != t.size()) throw ValidationError("bad number in list: " + t);
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError("empty number list");
    return out;
}

std::vector<std::pair<std::int64_t, std::int64_t>> parse_pair_list(const std::string& text) {
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const std::string t = trim(item);
        const auto colon = t.find(':');
        if (colon == std::string::npos)
            throw ValidationError("pair list entries are inner:outer, got: " + t);
        out.emplace_back(std::stoll(trim(t.substr(0, colon))),
                         std::stoll(trim(t.substr(colon + 1))));
    }
    if (out.empty()) throw ValidationError("empty pair list");
    return out;
}

void ExperimentConfig::apply(const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        if (key == "quantity") quantity = quantity_from_tag(value);
        else if (key == "d") d = std::stoi(value);
        else if (key == "ladder") ladder = parse_int_list(value);
        else if (key == "pairs") pairs = parse_pair_list(value);
        else if (key == "trials") trials = std::stoull(value);
        else if (key == "margin") margin = std::stod(value);
        else if (key == "margins") margins = parse_double_list(value);
        else if (key == "seed") seed = std::stoull(value);
        else if (key == "workers") workers = std::stoi(value);
        else if (key == "output") output = value;
        else if (key == "frac") frac = std::stod(value);
        else if (key == "steps") steps = std::stoull(value);
        else if (key == "reps") reps = std::stoull(value);
        else throw ValidationError("unknown config key: " + key);
    }
}

void ExperimentConfig::validate() const {
    if (d < 3 || d > kMaxDim - 1)
        throw ValidationError("dimension must be in [3, " + std::to_string(kMaxDim - 1) + "]");
    if (trials < 1) throw ValidationError("trials must be >= 1");
    if (margin < 1.0) throw ValidationError("outer margin must be >= 1");
    if (workers < 0) throw ValidationError("workers must be >= 0");
    if (!(frac > 0.0 && frac <= 1.0)) throw ValidationError("frac must lie in (0, 1]");
    const bool needs_ladder = quantity == Quantity::OneArm || quantity == Quantity::TwoPoint ||
                              quantity == Quantity::QVariance;
    if (needs_ladder) {
        if (ladder.empty()) throw ValidationError("this quantity needs a ladder");
        for (std::size_t i = 0; i < ladder.size(); ++i) {
            if (ladder[i] < (quantity == Quantity::OneArm ? 0 : 1))
                throw ValidationError("ladder entries must be positive");
            if (i > 0 && ladder[i] <= ladder[i - 1])
                throw ValidationError("ladder must be strictly increasing");
        }
    }
    if (quantity == Quantity::Crossing) {
        if (pairs.empty()) throw ValidationError("crossing needs a pairs list (inner:outer)");
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            if (pairs[i].first < 1 || pairs[i].second < pairs[i].first)
                throw ValidationError("crossing pairs need 1 <= inner <= outer");
            if (i > 0 && !(pairs[i].second > pairs[i - 1].second ||
                           (pairs[i].second == pairs[i - 1].second &&
                            pairs[i].first > pairs[i - 1].first)))
                throw ValidationError("crossing pairs must be strictly increasing");
        }
    }
    if (quantity == Quantity::OracleBridge) {
        if (steps < 256) throw ValidationError("bridge oracle needs steps >= 256");
        if (reps < 1000) throw ValidationError("bridge oracle needs reps >= 1000");
    }
}

int ExperimentConfig::resolved_workers() const {
    if (workers > 0) return workers;
    if (const char* env = std::getenv("GFFLAB_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return 1;
}

} // namespace gfflab
