#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gfflab/records.hpp"

namespace gfflab {

// One ladder point of a power-law fit: value ~ C * param^slope.
struct FitPoint {
    double param = 0.0;
    double value = 0.0;
    double se = 0.0; // standard error of value
    std::uint64_t trials = 0;
    std::uint64_t successes = 0;
};

struct FitReport {
    struct PointLine {
        double log_param = 0.0;
        double log_value = 0.0;
        double ci_low = 0.0; // on the value scale
        double ci_high = 0.0;
    };
    std::vector<PointLine> points;
    double slope = 0.0;
    double intercept = 0.0;
    double slope_ci_low = 0.0;
    double slope_ci_high = 0.0;
    double r2 = 0.0;
    std::uint64_t bootstrap_rounds = 0;
    std::string provenance; // how the inputs were produced (seed, quantity)
};

// Weighted least squares on (log param, log value), weights 1/Var(log value)
// by the delta method. Throws if fewer than 3 points or any value <= 0 (for
// Bernoulli points: zero successes means the ladder needs more trials).
FitReport fit_exponent(const std::vector<FitPoint>& points, std::uint64_t bootstrap_rounds,
                       std::uint64_t bootstrap_seed,
                       const std::vector<std::vector<std::uint8_t>>* bitmaps = nullptr);

// Bernoulli ladder points from estimate records (value = p_hat,
// se = sqrt(p(1-p)/n)).
std::vector<FitPoint> fit_points_from_records(const std::vector<EstimateRecord>& records);

std::string fit_report_json(const FitReport& report);

} // namespace gfflab
