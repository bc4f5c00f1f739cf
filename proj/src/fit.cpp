#include "gfflab/fit.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "gfflab/errors.hpp"
#include "gfflab/rng.hpp"

namespace gfflab {

namespace {

struct WlsResult {
    double slope, intercept, r2;
};

WlsResult wls_loglog(const std::vector<double>& params, const std::vector<double>& values,
                     const std::vector<double>& weights) {
    const std::size_t n = params.size();
    double sw = 0, sx = 0, sy = 0;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        lx[i] = std::log(params[i]);
        ly[i] = std::log(values[i]);
        sw += weights[i];
        sx += weights[i] * lx[i];
        sy += weights[i] * ly[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = lx[i] - mx, dy = ly[i] - my;
        sxx += weights[i] * dx * dx;
        sxy += weights[i] * dx * dy;
        syy += weights[i] * dy * dy;
    }
    if (sxx <= 0.0) throw ValidationError("fit needs at least two distinct ladder params");
    WlsResult r;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    double ssres = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = ly[i] - (r.intercept + r.slope * lx[i]);
        ssres += weights[i] * e * e;
    }
    r.r2 = syy > 0.0 ? 1.0 - ssres / syy : 1.0;
    return r;
}

} // namespace

FitReport fit_exponent(const std::vector<FitPoint>& points, std::uint64_t bootstrap_rounds,
                       std::uint64_t bootstrap_seed,
                       const std::vector<std::vector<std::uint8_t>>* bitmaps) {
    const std::size_t n = points.size();
    if (n < 3) throw ValidationError("fit_exponent needs at least 3 ladder points");
    for (const auto& p : points) {
        if (p.param <= 0.0) throw ValidationError("ladder params must be positive");
        if (p.trials > 0 && p.successes == 0)
            throw ValidationError(
                "a ladder point has zero successes; increase trials before fitting");
        if (!(p.value > 0.0)) throw ValidationError("fit values must be positive");
        if (!(p.se > 0.0)) throw ValidationError("fit values need positive standard errors");
    }
    if (bitmaps) {
        if (bitmaps->size() != n) throw ValidationError("one bitmap per ladder point required");
        for (std::size_t i = 1; i < n; ++i)
            if ((*bitmaps)[i].size() != (*bitmaps)[0].size())
                throw ValidationError("bitmaps must share one trial axis for block bootstrap");
        if ((*bitmaps)[0].empty()) throw ValidationError("empty bitmaps");
    }

    std::vector<double> params(n), values(n), weights(n);
    for (std::size_t i = 0; i < n; ++i) {
        params[i] = points[i].param;
        values[i] = points[i].value;
        const double rel = points[i].se / points[i].value;
        weights[i] = 1.0 / (rel * rel); // Var(log v) ~ (se/v)^2
    }
    const WlsResult base = wls_loglog(params, values, weights);

    FitReport rep;
    rep.slope = base.slope;
    rep.intercept = base.intercept;
    rep.r2 = base.r2;
    rep.bootstrap_rounds = bootstrap_rounds;
    for (std::size_t i = 0; i < n; ++i) {
        FitReport::PointLine line;
        line.log_param = std::log(points[i].param);
        line.log_value = std::log(points[i].value);
        line.ci_low = points[i].value - 1.959963984540054 * points[i].se;
        line.ci_high = points[i].value + 1.959963984540054 * points[i].se;
        rep.points.push_back(line);
    }

    if (bootstrap_rounds == 0) {
        rep.slope_ci_low = rep.slope_ci_high = base.slope;
        return rep;
    }

    // Slope CI by bootstrap percentiles. With bitmaps, resample whole trials
    // (one field sample is one block, so nested ladder reuse is honored);
    // otherwise perturb each point independently on the log scale by its
    // delta-method standard error.
    const RngStream root = RngStream::from_master_seed(bootstrap_seed).derive("bootstrap");
    std::vector<double> slopes;
    slopes.reserve(bootstrap_rounds);
    std::vector<double> vstar(n);
    for (std::uint64_t b = 0; b < bootstrap_rounds; ++b) {
        const RngStream s = root.derive(b);
        if (bitmaps) {
            const std::size_t trials = (*bitmaps)[0].size();
            std::vector<std::uint64_t> counts(n, 0);
            for (std::size_t t = 0; t < trials; ++t) {
                const auto idx = static_cast<std::size_t>(
                    s.u01(static_cast<std::uint64_t>(t)) * static_cast<double>(trials));
                const std::size_t j = std::min(idx, trials - 1);
                for (std::size_t i = 0; i < n; ++i) counts[i] += (*bitmaps)[i][j];
            }
            for (std::size_t i = 0; i < n; ++i) {
                // Continuity floor keeps the log finite on a zero resample.
                const double c = std::max<double>(static_cast<double>(counts[i]), 0.5);
                vstar[i] = c / static_cast<double>(trials);
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                const double rel = points[i].se / points[i].value;
                vstar[i] = points[i].value *
                           std::exp(rel * s.normal(static_cast<std::uint64_t>(i)));
            }
        }
        slopes.push_back(wls_loglog(params, vstar, weights).slope);
    }
    std::sort(slopes.begin(), slopes.end());
    const auto pick = [&](double q) {
        const double pos = q * static_cast<double>(slopes.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, slopes.size() - 1);
        const double f = pos - static_cast<double>(lo);
        return slopes[lo] * (1.0 - f) + slopes[hi] * f;
    };
    rep.slope_ci_low = pick(0.025);
    rep.slope_ci_high = pick(0.975);
    return rep;
}

std::vector<FitPoint> fit_points_from_records(const std::vector<EstimateRecord>& records) {
    std::vector<FitPoint> pts;
    for (const auto& r : records) {
        FitPoint p;
        p.param = static_cast<double>(r.param1);
        p.value = r.p_hat;
        p.trials = r.trials;
        p.successes = r.successes;
        const double n = static_cast<double>(r.trials);
        p.se = n > 0 ? std::sqrt(std::max(r.p_hat * (1.0 - r.p_hat), 1e-300) / n) : 0.0;
        pts.push_back(p);
    }
    return pts;
}

std::string fit_report_json(const FitReport& rep) {
    nlohmann::json j;
    j["slope"] = rep.slope;
    j["intercept"] = rep.intercept;
    j["slope_ci_low"] = rep.slope_ci_low;
    j["slope_ci_high"] = rep.slope_ci_high;
    j["r2"] = rep.r2;
    j["bootstrap_rounds"] = rep.bootstrap_rounds;
    j["provenance"] = rep.provenance;
    j["points"] = nlohmann::json::array();
    for (const auto& p : rep.points) {
        nlohmann::json jp;
        jp["log_param"] = p.log_param;
        jp["log_value"] = p.log_value;
        jp["ci_low"] = p.ci_low;
        jp["ci_high"] = p.ci_high;
        j["points"].push_back(jp);
    }
    return j.dump(2);
}

} // namespace gfflab
