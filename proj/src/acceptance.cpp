#include "gfflab/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <optional>
#include <set>

#include "json.hpp"

#include "gfflab/errors.hpp"
#include "gfflab/experiments.hpp"
#include "gfflab/fit.hpp"
#include "gfflab/gff.hpp"
#include "gfflab/lattice.hpp"
#include "gfflab/levelset.hpp"
#include "gfflab/loopsoup.hpp"
#include "gfflab/network.hpp"
#include "gfflab/rng.hpp"
#include "gfflab/stats.hpp"

namespace gfflab {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string strf(const char* fmt, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, ap);
    va_end(ap);
    return buf;
}

double wilson_se(const EstimateRecord& r) {
    return (r.ci_high - r.ci_low) / (2.0 * 1.959963984540054);
}

// Criteria 4 and 11 read different slices of one shared level-set run, so
// the suite caches it.
struct Context {
    std::uint64_t seed = 0;
    int workers = 1;
    std::optional<LevelSetResult> d3_levelset;
};

const LevelSetResult& shared_d3_run(Context& ctx) {
    if (!ctx.d3_levelset) {
        ctx.d3_levelset = run_level_set_trials(
            3, 1.5, {4, 8, 16, 32, 64}, {{4, 16}, {4, 32}, {4, 64}}, 20000, ctx.seed,
            ctx.workers);
    }
    return *ctx.d3_levelset;
}

// AC-1: the bridge oracle reproduces 1 - exp(-ab/d) on a 4x4 endpoint grid
// within 3 SE at 1e5 reps and 2^12 steps, with step-doubled reruns staying
// consistent, in under two minutes.
CriterionResult ac_1(Context& ctx) {
    CriterionResult c{1, "bridge-opening law", "PASS", "", 0.0};
    const auto t0 = Clock::now();
    const BridgeGridResult g =
        run_bridge_grid(3, {0.25, 0.5, 1.0, 2.0}, 4096, 100000, ctx.seed, ctx.workers);
    c.wall_s = seconds_since(t0);
    if (!g.failures.empty()) {
        c.status = "FAIL";
        c.detail = "oracle failure: " + g.failures.front();
        return c;
    }
    double worst_main = 0.0;
    double worst_doubling = 0.0;
    for (const auto& det : g.details) {
        worst_main = std::max(worst_main, std::fabs(det.main.p_hat - det.formula) /
                                              std::max(det.main.se, 1e-12));
        for (const auto& lvl : det.doubling) {
            worst_doubling = std::max(worst_doubling, std::fabs(lvl.p_hat - det.formula) /
                                                          std::max(lvl.se, 1e-12));
        }
    }
    const bool ok = worst_main <= 3.0 && worst_doubling <= 4.0 && c.wall_s < 120.0;
    c.status = ok ? "PASS" : "FAIL";
    c.detail = strf("max dev %.2f SE (grid), %.2f SE (step-doubled, 4 SE gate); wall %.1fs/120s",
                    worst_main, worst_doubling, c.wall_s);
    return c;
}

// AC-2: the spectral variance formula matches the dense Green diagonal to
// 1e-8 for every box up to radius 6, and empirical covariances on a 5-point
// stencil match the Green function within 4 SE at 1e4 samples.
CriterionResult ac_2(Context& ctx) {
    CriterionResult c{2, "sampler exactness", "PASS", "", 0.0};
    const auto t0 = Clock::now();

    double worst_identity = 0.0;
    for (int radius = 1; radius <= 6; ++radius) {
        const Box box(3, radius);
        const std::vector<double> g = dirichlet_green_matrix_dense(box);
        const std::int64_t vol = box.volume();
        for (std::int64_t i = 0; i < vol; ++i) {
            const Point x = box.point_at(i);
            const double spec = spectral_covariance(box, x, x);
            worst_identity = std::max(worst_identity, std::fabs(spec - g[i * vol + i]));
        }
    }

    const Box box(3, 6);
    const std::vector<double> green = dirichlet_green_matrix_dense(box);
    const std::int64_t vol = box.volume();
    const std::int64_t center = box.linear_index(box.center);
    std::vector<Point> stencil;
    {
        Point p = box.center;
        stencil.push_back(p);
        p = box.center;
        p.c[0] += 1;
        stencil.push_back(p);
        p = box.center;
        p.c[0] -= 1;
        stencil.push_back(p);
        p = box.center;
        p.c[1] += 1;
        stencil.push_back(p);
        p = box.center;
        p.c[2] += 1;
        stencil.push_back(p);
    }
    const std::uint64_t samples = 10000;
    const DirichletSampler sampler(box);
    auto ws = sampler.make_workspace();
    std::vector<std::vector<double>> vals(stencil.size(), std::vector<double>(samples));
    std::vector<std::int64_t> idx;
    for (const auto& p : stencil) idx.push_back(box.linear_index(p));
    for (std::uint64_t t = 0; t < samples; ++t) {
        const RngStream ts = trial_stream(ctx.seed, "sampler-check", t);
        sampler.sample(purpose_stream(ts, StreamPurpose::FieldNoise), *ws);
        for (std::size_t j = 0; j < idx.size(); ++j) vals[j][t] = ws->data()[idx[j]];
    }
    double worst_cov = 0.0;
    for (std::size_t j = 0; j < stencil.size(); ++j) {
        const CovSummary cs = sample_covariance(vals[0], vals[j]);
        const double expect = green[center * vol + idx[j]];
        worst_cov = std::max(worst_cov, std::fabs(cs.cov - expect) / std::max(cs.se, 1e-12));
    }

    c.wall_s = seconds_since(t0);
    const bool ok = worst_identity <= 1e-8 && worst_cov <= 4.0 && c.wall_s < 120.0;
    c.status = ok ? "PASS" : "FAIL";
    c.detail = strf("spectral identity max err %.2e (1e-8 gate); stencil cov max dev "
                    "%.2f SE; wall %.1fs/120s",
                    worst_identity, worst_cov, c.wall_s);
    return c;
}

// AC-3: two-point log-log slope at d=3 over |x| in {4,6,8,12,16} inside a
// radius-64 box is -1.0 +/- 0.15 at 1e4 samples in under 30 minutes.
CriterionResult ac_3(Context& ctx) {
    CriterionResult c{3, "two-point exponent d=3", "PASS", "", 0.0};
    const auto t0 = Clock::now();
    const TwoPointResult res =
        run_two_point_trials(3, 4.0, {4, 6, 8, 12, 16}, 10000, ctx.seed, ctx.workers);
    const std::vector<FitPoint> points = fit_points_from_records(res.records);
    const FitReport fit = fit_exponent(points, 1000, ctx.seed, &res.bits);
    c.wall_s = seconds_since(t0);
    const bool ok = std::fabs(fit.slope + 1.0) <= 0.15 && c.wall_s < 1800.0;
    c.status = ok ? "PASS" : "FAIL";
    c.detail = strf("slope %.3f (target -1.0 +/- 0.15), bootstrap CI [%.3f, %.3f]; "
                    "wall %.0fs/1800s",
                    fit.slope, fit.slope_ci_low, fit.slope_ci_high, c.wall_s);
    return c;
}

// AC-4: one-arm d=3 slope over N in {8,...,64} is -0.5 +/- 0.1 and the
// 64/32 ratio sits in [0.62, 0.80]; 2e4 nested samples.
CriterionResult ac_4(Context& ctx) {
    CriterionResult c{4, "one-arm exponent d=3", "PASS", "", 0.0};
    const auto t0 = Clock::now();
    const LevelSetResult& res = shared_d3_run(ctx);
    const std::vector<EstimateRecord> rows(res.records.begin() + 1, res.records.begin() + 5);
    const std::vector<std::vector<std::uint8_t>> bits(res.one_arm_bits.begin() + 1,
                                                      res.one_arm_bits.begin() + 5);
    const FitReport fit = fit_exponent(fit_points_from_records(rows), 1000, ctx.seed, &bits);
    const double ratio = res.records[4].p_hat / res.records[3].p_hat;
    c.wall_s = seconds_since(t0);
    const bool ok = std::fabs(fit.slope + 0.5) <= 0.1 && ratio >= 0.62 && ratio <= 0.80;
    c.status = ok ? "PASS" : "FAIL";
    c.detail = strf("slope %.3f (target -0.5 +/- 0.1), CI [%.3f, %.3f]; ratio(64/32) %.3f "
                    "(gate [0.62, 0.80]); run wall %.0fs",
                    fit.slope, fit.slope_ci_low, fit.slope_ci_high, ratio, res.wall_s);
    return c;
}

// AC-5: one-arm d=4 slope over N in {4,8,16} is -1.0 +/- 0.2.
CriterionResult ac_5(Context& ctx) {
    CriterionResult c{5, "one-arm exponent d=4", "PASS", "", 0.0};
    const auto t0 = Clock::now();
    const LevelSetResult res =
        run_level_set_trials(4, 1.5, {4, 8, 16}, {}, 6000, ctx.seed, ctx.workers);
    const FitReport fit =
        fit_exponent(fit_points_from_records(res.records), 1000, ctx.seed, &res.one_arm_bits);
    c.wall_s = seconds_since(t0);
    const bool ok = std::fabs(fit.slope + 1.0) <= 0.2;
    c.status = ok ? "PASS" : "FAIL";
    c.detail = strf("slope %.3f (target -1.0 +/- 0.2), CI [%.3f, %.3f]; wall %.0fs", fit.slope,
                    fit.slope_ci_low, fit.slope_ci_high, c.wall_s);
    return c;
}

// AC-6: soft high-dimension checks. d=5: theta(8)/theta(4) in [0.20, 0.50].
// d=6: theta strictly decreasing over {1,2,4} beyond twice the joint SE
// (the N^{-2+o(1)} rate itself is out of desk scale).
CriterionResult ac_6(Context& ctx) {
    CriterionResult c{6, "one-arm d=5/d=6 (soft)", "PASS", "", 0.0};
    const auto t0 = Clock::now();
    const LevelSetResult d5 =
        run_level_set_trials(5, 1.5, {4, 8}, {}, 3000, ctx.seed, ctx.workers);
    const double ratio = d5.records[1].p_hat / d5.records[0].p_hat;

    const LevelSetResult d6 =
        run_level_set_trials(6, 1.5, {1, 2, 4}, {}, 1500, ctx.seed, ctx.workers);
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < d6.records.size(); ++i) {
        const EstimateRecord& hi = d6.records[i];
        const EstimateRecord& lo = d6.records[i + 1];
        const double gap = hi.p_hat - lo.p_hat;
        const double joint = std::hypot(wilson_se(hi), wilson_se(lo));
        if (gap <= 2.0 * joint) monotone = false;
    }
    c.wall_s = seconds_since(t0);
    const bool ok = ratio >= 0.20 && ratio <= 0.50 && monotone;
    c.status = ok ? "PASS" : "FAIL";
    c.detail = strf("d=5 ratio(8/4) %.3f (gate [0.20, 0.50], point prediction 0.354); d=6 "
                    "theta %.3f > %.3f > %.3f %s; wall %.0fs",
                    ratio, d6.records[0].p_hat, d6.records[1].p_hat, d6.records[2].p_hat,
                    monotone ? "strictly decreasing" : "NOT clearly decreasing", c.wall_s);
    return c;
}

// AC-7: the d >= 7 mean-field regime needs boxes beyond desk memory at any
// informative N, so it is documented rather than simulated.
CriterionResult ac_7(Context&) {
    CriterionResult c{7, "mean-field regime d>=7", "DOCUMENTED", "", 0.0};
    c.detail =
        "out of desk scale by design: informative boxes at d>=7 exceed memory; "
        "expected rates (two-point |x|^{2-d}, one-arm N^{-d/2+1}, crossing "
        "(n/N)^{d/2-1}) are recorded in the README";
    return c;
}

// AC-8: both evaluations of the exploration variance agree to 1e-8 on 100
// random blocked configurations in B(8), d=3, within a minute.
CriterionResult ac_8(Context& ctx) {
    CriterionResult c{8, "quadratic-variation identity", "PASS", "", 0.0};
    const auto t0 = Clock::now();
    const Box box(3, 8);
    const DirichletSampler sampler(box);
    auto ws = sampler.make_workspace();
    double worst = 0.0;
    const double fracs[4] = {0.25, 0.5, 0.75, 1.0};
    for (int cfg = 0; cfg < 100; ++cfg) {
        const RngStream ts = trial_stream(ctx.seed, "qv-identity", cfg);
        sampler.sample(purpose_stream(ts, StreamPurpose::FieldNoise), *ws);
        const FieldView f(box, ws->data());
        const double radius = 2.0 + cfg % 3;
        const std::vector<Point> seeds = external_boundary(Ball(origin(3), radius));
        const NegativeClusterMask mask =
            negative_cluster(f, purpose_stream(ts, StreamPurpose::EdgeUniforms), seeds);
        const QuadraticVariation qv = quadratic_variation(f, mask, origin(3), fracs[cfg % 4]);
        worst = std::max(worst, std::fabs(qv.direct - qv.sum));
    }
    c.wall_s = seconds_since(t0);
    const bool ok = worst <= 1e-8 && c.wall_s < 60.0;
    c.status = ok ? "PASS" : "FAIL";
    c.detail = strf("max |direct - last-exit| %.2e over 100 configs (1e-8 gate); wall "
                    "%.1fs/60s",
                    worst, c.wall_s);
    return c;
}

// AC-9: stopped-increment tails of the exploration martingale stay below the
// two-sided Gaussian bound plus 3 SE on the (t, T) grid with t/sqrt(T) in
// {0.5, 1, 2}; 1e3 samples, ball radius 8, d=3.
CriterionResult ac_9(Context& ctx) {
    CriterionResult c{9, "martingale tail bound", "PASS", "", 0.0};
    const auto t0 = Clock::now();
    const MartingaleResult res =
        run_martingale_trials(3, 8, 2.0, 0.5, 1000, ctx.seed, ctx.workers);
    double worst = -1e300;
    for (const auto& line : res.tails) {
        worst = std::max(worst, (line.frequency - line.bound) / std::max(line.se, 1e-12));
    }
    c.wall_s = seconds_since(t0);
    const bool ok = worst <= 3.0;
    c.status = ok ? "PASS" : "FAIL";
    c.detail = strf("max (freq - bound)/SE %.2f over %zu grid lines (3 SE gate); absorbed "
                    "fraction %.3f; bracket identity max err %.1e; wall %.0fs",
                    worst, res.tails.size(), res.absorbed_fraction, res.max_qv_err, c.wall_s);
    return c;
}

// AC-10: occupation-field marginal at the center passes a KS test against
// half the squared field (p > 0.01) and the occupation covariance at
// (center, neighbor) matches G(0,x)^2/2 within 4 SE; 1e4 samples each.
CriterionResult ac_10(Context& ctx) {
    CriterionResult c{10, "occupation-field isomorphism", "PASS", "", 0.0};
    const auto t0 = Clock::now();
    const IsomorphismReport rep = isomorphism_check(Box(3, 4), 10000, ctx.seed);
    const double center_p = rep.vertices.empty() ? 0.0 : rep.vertices[0].ks_p;
    const double cov_dev =
        std::fabs(rep.cov_occupation - rep.cov_expected) / std::max(rep.cov_occupation_se, 1e-12);
    c.wall_s = seconds_since(t0);
    const bool ok = center_p > 0.01 && cov_dev <= 4.0;
    c.status = ok ? "PASS" : "FAIL";
    c.detail = strf("center KS p %.4f (> 0.01 gate); cov dev %.2f SE (4 SE gate); "
                    "split-half control p %.4f; wall %.0fs",
                    center_p, cov_dev, rep.null_ks_p, c.wall_s);
    return c;
}

// AC-11: crossing ratio rho(4,16)/rho(4,64) = 2.0 +/- 0.4, and the
// rho/(n^{d-2} theta(n) theta(N/4)) ratio varies by less than 3x between
// adjacent ladder points. Shares the AC-4 run.
CriterionResult ac_11(Context& ctx) {
    CriterionResult c{11, "crossing scaling d=3", "PASS", "", 0.0};
    const auto t0 = Clock::now();
    const LevelSetResult& res = shared_d3_run(ctx);
    // Record layout: one-arm rows 0..4 for N={4,8,16,32,64}, crossing rows
    // 5..7 for (n=4, N={16,32,64}).
    const double rho16 = res.records[5].p_hat;
    const double rho32 = res.records[6].p_hat;
    const double rho64 = res.records[7].p_hat;
    const double th4 = res.records[0].p_hat;
    const double th8 = res.records[1].p_hat;
    const double th16 = res.records[2].p_hat;
    c.wall_s = seconds_since(t0);
    if (rho64 <= 0.0 || th4 <= 0.0 || th8 <= 0.0 || th16 <= 0.0) {
        c.status = "FAIL";
        c.detail = "a ladder point has zero successes; more trials needed";
        return c;
    }
    const double ratio = rho16 / rho64;
    const double prop[3] = {rho16 / (4.0 * th4 * th4), rho32 / (4.0 * th4 * th8),
                            rho64 / (4.0 * th4 * th16)};
    double blowup = 1.0;
    for (int i = 0; i + 1 < 3; ++i) {
        const double hi = std::max(prop[i], prop[i + 1]);
        const double lo = std::min(prop[i], prop[i + 1]);
        blowup = std::max(blowup, hi / lo);
    }
    const bool ok = ratio >= 1.6 && ratio <= 2.4 && blowup <= 3.0;
    c.status = ok ? "PASS" : "FAIL";
    c.detail = strf("rho(4,16)/rho(4,64) %.3f (gate 2.0 +/- 0.4); factorization ratios "
                    "%.2f/%.2f/%.2f, max adjacent factor %.2f (3x gate); run wall %.0fs",
                    ratio, prop[0], prop[1], prop[2], blowup, res.wall_s);
    return c;
}

// AC-12: empirical Var(Q_N) matches the linear-solve variance within 4 SE at
// N in {4,8}, and the variance slope over {4,8,16} is -1.0 +/- 0.3.
CriterionResult ac_12(Context& ctx) {
    CriterionResult c{12, "boundary-average variance", "PASS", "", 0.0};
    const auto t0 = Clock::now();
    const QVarianceResult res =
        run_q_variance_trials(3, 2.0, {4, 8, 16}, 10000, ctx.seed, ctx.workers);
    double worst = 0.0;
    for (int j = 0; j < 2; ++j) {
        const double dev = std::fabs(res.q_summary[j].variance - res.solver_sigma2[j]) /
                           std::max(res.q_summary[j].se_variance, 1e-300);
        worst = std::max(worst, dev);
    }
    std::vector<FitPoint> points;
    for (std::size_t j = 0; j < res.q_summary.size(); ++j) {
        FitPoint p;
        p.param = static_cast<double>(res.records[j].param1);
        p.value = res.q_summary[j].variance;
        p.se = res.q_summary[j].se_variance;
        p.trials = res.q_summary[j].n;
        p.successes = res.q_summary[j].n;
        points.push_back(p);
    }
    const FitReport fit = fit_exponent(points, 1000, ctx.seed, nullptr);
    c.wall_s = seconds_since(t0);
    const bool ok = worst <= 4.0 && std::fabs(fit.slope + 1.0) <= 0.3;
    c.status = ok ? "PASS" : "FAIL";
    c.detail = strf("max solver-vs-empirical dev %.2f SE (4 SE gate, N=4,8); variance slope "
                    "%.3f (target -1.0 +/- 0.3); wall %.0fs",
                    worst, fit.slope, c.wall_s);
    return c;
}

using CriterionFn = CriterionResult (*)(Context&);

CriterionFn criterion_table[12] = {ac_1, ac_2, ac_3, ac_4,  ac_5,  ac_6,
                                   ac_7, ac_8, ac_9, ac_10, ac_11, ac_12};

} // namespace

std::vector<int> acceptance_selection(const std::string& selector) {
    if (selector == "fast") return {1, 2, 8};
    if (selector == "full" || selector.empty()) {
        std::vector<int> ids(12);
        for (int i = 0; i < 12; ++i) ids[i] = i + 1;
        return ids;
    }
    std::set<int> seen;
    std::vector<int> ids;
    std::size_t pos = 0;
    while (pos <= selector.size()) {
        std::size_t comma = selector.find(',', pos);
        if (comma == std::string::npos) comma = selector.size();
        std::string tok = selector.substr(pos, comma - pos);
        pos = comma + 1;
        while (!tok.empty() && tok.front() == ' ') tok.erase(tok.begin());
        while (!tok.empty() && tok.back() == ' ') tok.pop_back();
        if (tok.empty()) continue;
        if (tok.size() > 3 && (tok.rfind("ac-", 0) == 0 || tok.rfind("AC-", 0) == 0))
            tok = tok.substr(3);
        int id = 0;
        try {
            id = std::stoi(tok);
        } catch (...) {
            throw ValidationError("acceptance selector entry is not a criterion id: " + tok);
        }
        if (id < 1 || id > 12) throw ValidationError("criterion ids run from 1 to 12");
        if (seen.insert(id).second) ids.push_back(id);
    }
    if (ids.empty()) throw ValidationError("empty acceptance selector");
    std::sort(ids.begin(), ids.end());
    return ids;
}

AcceptanceReport run_acceptance(const std::vector<int>& ids, std::uint64_t seed, int workers) {
    AcceptanceReport report;
    report.master_seed = seed;
    report.workers = workers;
    Context ctx{seed, workers, std::nullopt};
    const auto t0 = Clock::now();
    for (int id : ids) {
        if (id < 1 || id > 12) throw ValidationError("criterion ids run from 1 to 12");
        CriterionResult r;
        try {
            r = criterion_table[id - 1](ctx);
        } catch (const std::exception& e) {
            r.id = id;
            r.name = "criterion error";
            r.status = "FAIL";
            r.detail = e.what();
        }
        std::printf("AC-%d %s %s (%s)\n", r.id, r.status.c_str(), r.name.c_str(),
                    r.detail.c_str());
        std::fflush(stdout);
        if (r.status == "FAIL") report.all_ok = false;
        report.results.push_back(std::move(r));
    }
    report.wall_s = seconds_since(t0);
    return report;
}

std::string acceptance_report_json(const AcceptanceReport& report) {
    nlohmann::json j;
    j["master_seed"] = report.master_seed;
    j["workers"] = report.workers;
    j["all_ok"] = report.all_ok;
    j["wall_s"] = report.wall_s;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : report.results) {
        arr.push_back({{"id", r.id},
                       {"name", r.name},
                       {"status", r.status},
                       {"detail", r.detail},
                       {"wall_s", r.wall_s}});
    }
    j["criteria"] = arr;
    return j.dump(2);
}

} // namespace gfflab
