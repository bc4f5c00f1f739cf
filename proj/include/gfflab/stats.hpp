#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace gfflab {

struct ConfidenceInterval {
    double low = 0.0;
    double high = 0.0;
};

// Wilson score interval for a binomial proportion (default 95%).
ConfidenceInterval wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                   double z = 1.959963984540054);

double normal_cdf(double x);
double normal_tail(double x); // 1 - Phi(x)

// Inverse of the standard normal CDF on the open interval (0,1), by Wichura's
// rational approximations (absolute error below 1e-15 across the range a
// 53-bit uniform can reach). One call consumes exactly one uniform, which is
// what the counter-indexed simulation streams need.
double inv_normal_cdf(double p);

struct MomentSummary {
    std::uint64_t n = 0;
    double mean = 0.0;
    double variance = 0.0; // unbiased
    double se_mean = 0.0;
    double se_variance = 0.0; // Gaussian approx: var * sqrt(2/(n-1))
};

MomentSummary summarize(const std::vector<double>& xs);

// Sample covariance of paired samples, with a plug-in standard error
// SE^2 = Var[(X - mX)(Y - mY)] / n.
struct CovSummary {
    std::uint64_t n = 0;
    double cov = 0.0;
    double se = 0.0;
};

CovSummary sample_covariance(const std::vector<double>& xs, const std::vector<double>& ys);

// Two-sample Kolmogorov-Smirnov test. Returns (D, p) where p uses the
// asymptotic Kolmogorov distribution with the small-sample effective-size
// correction lambda = D (sqrt(ne) + 0.12 + 0.11/sqrt(ne)).
std::pair<double, double> ks_two_sample(std::vector<double> a, std::vector<double> b);

} // namespace gfflab
