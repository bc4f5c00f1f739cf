#pragma once

#include <cstdint>
#include <vector>

#include "gfflab/rng.hpp"

namespace gfflab {

// One-dimensional variance-2 Brownian bridge over an interval of length
// `length`, from a to b. Probability that the bridge stays strictly positive:
//   both endpoints > 0:  1 - exp(-2ab / (sigma^2 length)) = 1 - exp(-ab/length)
//   otherwise 0.
double bridge_positive_probability(double a, double b, double length);

struct BridgeOracleResult {
    double p_hat = 0.0;
    double se = 0.0;
    std::uint64_t reps = 0;
    std::uint64_t steps = 0;
};

// Monte Carlo estimate of the same probability by exact sequential
// conditioning: X_{t+dt} | X_t is Gaussian with the bridge mean and variance,
// and each sub-interval is closed out with the exact within-step bridge
// minimum law, so the estimator is unbiased for every step count. `steps`
// only controls the conditioning resolution. Requires steps >= 256 and
// reps >= 1000 (estimates below that are too noisy to be meaningful here).
BridgeOracleResult bridge_crossing_oracle(double a, double b, double length,
                                          std::uint64_t steps, std::uint64_t reps,
                                          const RngStream& stream);

// Convenience: run the oracle at steps, 4*steps, 16*steps (fresh sub-streams)
// to exhibit stability under step refinement.
std::vector<BridgeOracleResult> bridge_oracle_step_doubling(double a, double b, double length,
                                                            std::uint64_t base_steps,
                                                            std::uint64_t reps,
                                                            const RngStream& stream);

} // namespace gfflab
