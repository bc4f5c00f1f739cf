#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gfflab {

enum class Quantity {
    OneArm,
    Crossing,
    TwoPoint,
    QVariance,
    Martingale,
    Isomorphism,
    OracleBridge,
};

const char* quantity_tag(Quantity q);
Quantity quantity_from_tag(const std::string& tag);

// Flat key = value configuration (hash comments, one key per line).
std::map<std::string, std::string> parse_config_text(const std::string& text);

struct ExperimentConfig {
    Quantity quantity = Quantity::OneArm;
    int d = 3;
    std::vector<std::int64_t> ladder;                 // N list or |x| list
    std::vector<std::pair<std::int64_t, std::int64_t>> pairs; // (n, N) for crossing
    std::uint64_t trials = 1000;
    double margin = 2.0;
    std::vector<double> margins; // bias harness only
    std::uint64_t seed = 1;
    int workers = 0; // 0: resolve from GFFLAB_THREADS, else 1
    std::string output; // path prefix; empty = no files
    double frac = 0.5;  // blocking cut fraction (martingale diagnostics)
    std::uint64_t steps = 4096; // bridge oracle
    std::uint64_t reps = 100000;

    // Merge parsed keys over the current values; unknown keys are an error.
    void apply(const std::map<std::string, std::string>& kv);
    // Enforce the invariants (d >= 3, strictly increasing ladders, trials >= 1).
    void validate() const;
    // Resolved worker count (>= 1), honoring GFFLAB_THREADS when workers == 0.
    int resolved_workers() const;
};

std::vector<std::int64_t> parse_int_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);
std::vector<std::pair<std::int64_t, std::int64_t>> parse_pair_list(const std::string& text);

} // namespace gfflab
