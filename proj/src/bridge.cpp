#include "gfflab/bridge.hpp"

#include <cmath>

#include "gfflab/errors.hpp"
#include "gfflab/stats.hpp"

namespace gfflab {

double bridge_positive_probability(double a, double b, double length) {
    if (length <= 0.0) throw ValidationError("bridge length must be positive");
    if (a <= 0.0 || b <= 0.0) return 0.0;
    return -std::expm1(-a * b / length);
}

BridgeOracleResult bridge_crossing_oracle(double a, double b, double length,
                                          std::uint64_t steps, std::uint64_t reps,
                                          const RngStream& stream) {
    if (length <= 0.0) throw ValidationError("bridge length must be positive");
    if (steps < 256) throw ValidationError("bridge oracle requires steps >= 256");
    if (reps < 1000) throw ValidationError("bridge oracle requires reps >= 1000");

    BridgeOracleResult res;
    res.reps = reps;
    res.steps = steps;
    if (a <= 0.0 || b <= 0.0) return res;

    const double dt = length / static_cast<double>(steps);
    // u01 is bounded below by 2^-53, so -log(u) never exceeds 53 ln 2; a dip
    // exponent beyond that can never fire and the draw may be skipped (the
    // draws are positional per step, so skipping leaves the stream aligned).
    const double kDipCutoff = 53.0 * 0.6931471805599453 + 0.001;
    std::uint64_t survived = 0;
    for (std::uint64_t r = 0; r < reps; ++r) {
        const RngStream rs = stream.derive(r);
        // Separate streams for the increments and the dip tests: the normal
        // lanes and the raw uniform words of one stream share counter space.
        const RngStream rs_step = rs.derive("bridge-step");
        const RngStream rs_dip = rs.derive("bridge-dip");
        double x = a;
        double remain = length;
        bool alive = true;
        for (std::uint64_t i = 0; i + 1 <= steps && alive; ++i) {
            const bool last = (i + 1 == steps);
            double xn;
            if (last) {
                xn = b;
            } else {
                const double mean = x + dt * (b - x) / remain;
                const double var = 2.0 * dt * (remain - dt) / remain;
                // One uniform word per step through the inverse CDF: cheaper
                // than a Box-Muller block in this loop, and the per-step
                // positional indexing is untouched.
                xn = mean + std::sqrt(var) * inv_normal_cdf(rs_step.u01(i));
            }
            if (xn <= 0.0) {
                alive = false;
                break;
            }
            // Exact within-step minimum: conditionally the step is a
            // variance-2 bridge of length dt from x to xn, which dips below
            // zero with probability exp(-x*xn/dt). With E ~ Exp(1) that event
            // is {E >= x*xn/dt}, so no discretization bias is left at any
            // step count.
            const double c = x * xn / dt;
            if (c < kDipCutoff && -std::log(rs_dip.u01(i)) >= c) alive = false;
            x = xn;
            remain -= dt;
        }
        if (alive) ++survived;
    }
    const double n = static_cast<double>(reps);
    res.p_hat = static_cast<double>(survived) / n;
    res.se = std::sqrt(res.p_hat * (1.0 - res.p_hat) / n);
    return res;
}

std::vector<BridgeOracleResult> bridge_oracle_step_doubling(double a, double b, double length,
                                                            std::uint64_t base_steps,
                                                            std::uint64_t reps,
                                                            const RngStream& stream) {
    std::vector<BridgeOracleResult> out;
    std::uint64_t s = base_steps;
    for (int level = 0; level < 3; ++level) {
        out.push_back(bridge_crossing_oracle(a, b, length, s, reps, stream.derive(1000 + level)));
        s *= 2;
    }
    return out;
}

} // namespace gfflab
