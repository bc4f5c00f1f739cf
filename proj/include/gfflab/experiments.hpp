#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gfflab/bridge.hpp"
#include "gfflab/config.hpp"
#include "gfflab/fit.hpp"
#include "gfflab/lattice.hpp"
#include "gfflab/records.hpp"
#include "gfflab/stats.hpp"

namespace gfflab {

// Smallest box radius M >= margin * n_max such that M+1 is 13-smooth, which
// keeps the type-I sine transform (logical size 2(M+1) per axis) on fast
// code paths. Rounding only ever enlarges the box.
int smooth_box_radius(double margin, std::int64_t n_max);

// Deterministic striped scheduler: trial t runs on worker t mod workers.
// The factory builds one trial body per worker (owning its scratch buffers);
// bodies write results into per-trial slots, so the output is identical for
// every worker count. The first trial failure is rethrown with its index.
void run_striped_trials(std::uint64_t trials, int workers,
                        const std::function<std::function<void(std::uint64_t)>(int)>& factory);

// One-arm and annulus-crossing estimates from shared field samples: each
// trial samples one field on the margin box and reports reach indicators for
// every ladder entry. Trials are seeded as (seed, "level-set", trial), so a
// ladder point's record is reproducible regardless of which ladder it was
// part of.
struct LevelSetResult {
    Box box;
    std::vector<EstimateRecord> records; // one-arm rows then crossing rows
    std::vector<std::vector<std::uint8_t>> one_arm_bits;
    std::vector<std::vector<std::uint8_t>> crossing_bits;
    double wall_s = 0.0;
};
LevelSetResult run_level_set_trials(
    int d, double margin, const std::vector<std::int64_t>& one_arm_ns,
    const std::vector<std::pair<std::int64_t, std::int64_t>>& crossing_pairs,
    std::uint64_t trials, std::uint64_t seed, int workers);

// P(0 <-> x) along the first axis at the given distances.
struct TwoPointResult {
    Box box;
    std::vector<EstimateRecord> records;
    std::vector<std::vector<std::uint8_t>> bits;
    double wall_s = 0.0;
};
TwoPointResult run_two_point_trials(int d, double margin,
                                    const std::vector<std::int64_t>& distances,
                                    std::uint64_t trials, std::uint64_t seed, int workers);

// Boundary-average observable: per-trial Q_N for each ladder N, empirical
// variance records (p_hat column reused for the variance), and the
// linear-solve variance for comparison.
struct QVarianceResult {
    Box box;
    std::vector<EstimateRecord> records;
    std::vector<MomentSummary> q_summary; // per ladder N
    std::vector<double> solver_sigma2;    // per ladder N
    double wall_s = 0.0;
};
QVarianceResult run_q_variance_trials(int d, double margin,
                                      const std::vector<std::int64_t>& ns,
                                      std::uint64_t trials, std::uint64_t seed, int workers);

// Exploration-martingale diagnostics around a Euclidean ball boundary.
struct MartingaleResult {
    Box box;
    Ball ball;
    double frac = 0.5;
    double g_a_xx = 0.0; // bracket at time zero reference
    std::vector<double> m0, endpoint, h_star, qv;
    std::vector<std::uint8_t> absorbed;
    double max_qv_err = 0.0;
    double absorbed_fraction = 0.0;
    double drift_mean = 0.0; // mean(endpoint - m0), optional-stopping check
    double drift_se = 0.0;
    struct TailLine {
        double t = 0.0, cap = 0.0;      // threshold and bracket cap
        double frequency = 0.0;          // P(endpoint - m0 >= t, qv <= cap)
        double bound = 0.0;              // Gaussian tail at t/sqrt(cap)
        double se = 0.0;                 // binomial SE at the bound
    };
    std::vector<TailLine> tails;
    double wall_s = 0.0;
};
MartingaleResult run_martingale_trials(int d, int ball_radius, double margin, double frac,
                                       std::uint64_t trials, std::uint64_t seed, int workers);
std::string martingale_report_json(const MartingaleResult& r);

// One-arm estimates across outer margins at fixed (d, N), with a disagreement
// flag when adjacent margins differ beyond their joint 95% interval.
struct BiasHarnessResult {
    std::vector<EstimateRecord> records; // one per margin, ascending
    bool flagged = false;
    std::string notes;
};
BiasHarnessResult run_bias_harness(int d, std::int64_t n, const std::vector<double>& margins,
                                   std::uint64_t trials, std::uint64_t seed, int workers);
std::string bias_harness_json(const BiasHarnessResult& r);

// Brownian-bridge oracle over an endpoint-value grid, with step-doubling
// convergence estimates per pair.
struct BridgeGridResult {
    std::vector<EstimateRecord> records; // param1/param2 = endpoint values in thousandths
    struct PairDetail {
        double a = 0.0, b = 0.0;
        double formula = 0.0;
        BridgeOracleResult main;
        std::vector<BridgeOracleResult> doubling;
    };
    std::vector<PairDetail> details;
    std::vector<std::string> failures;
    double wall_s = 0.0;
};
BridgeGridResult run_bridge_grid(int d, const std::vector<double>& values, std::uint64_t steps,
                                 std::uint64_t reps, std::uint64_t seed, int workers);
std::string bridge_grid_json(const BridgeGridResult& r);

// Config-driven entry point used by the CLI: runs the quantity, writes
// output.csv / output.json (and output.failures.json on partial failure)
// when an output prefix is set, prints the CSV to stdout otherwise.
// Returns a process exit code.
int run_experiment(const ExperimentConfig& config);

} // namespace gfflab
