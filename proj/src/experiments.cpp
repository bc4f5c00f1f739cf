#include "gfflab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gfflab/errors.hpp"
#include "gfflab/gff.hpp"
#include "gfflab/levelset.hpp"
#include "gfflab/loopsoup.hpp"
#include "gfflab/network.hpp"
#include "gfflab/observables.hpp"
#include "gfflab/rng.hpp"

namespace gfflab {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool is_13_smooth(std::int64_t n) {
    for (int p : {2, 3, 5, 7, 11, 13}) {
        while (n % p == 0) n /= p;
    }
    return n == 1;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Wilson-backed standard error (robust at 0 and n successes, where the Wald
// estimate collapses to zero).
double record_se(const EstimateRecord& r) {
    return (r.ci_high - r.ci_low) / (2.0 * 1.959963984540054);
}

EstimateRecord bernoulli_record(const std::string& quantity, int d, std::int64_t p1,
                                std::int64_t p2, double margin,
                                const std::vector<std::uint8_t>& bits, std::uint64_t seed,
                                double wall_s, std::int64_t box_radius) {
    EstimateRecord r;
    r.quantity = quantity;
    r.d = d;
    r.param1 = p1;
    r.param2 = p2;
    r.margin = margin;
    r.trials = bits.size();
    std::uint64_t s = 0;
    for (std::uint8_t b : bits) s += b;
    r.successes = s;
    r.p_hat = r.trials == 0 ? 0.0 : static_cast<double>(s) / static_cast<double>(r.trials);
    const ConfidenceInterval ci = wilson_interval(s, r.trials);
    r.ci_low = ci.low;
    r.ci_high = ci.high;
    r.master_seed = seed;
    r.wall_time_s = wall_s;
    r.box_radius = box_radius;
    r.bitmap_hex = bitmap_to_hex(bits);
    return r;
}

void require_ascending(const std::vector<std::int64_t>& xs, std::int64_t lo, const char* what) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] < lo) throw ValidationError(std::string(what) + " entries must be >= " +
                                              std::to_string(lo));
        if (i > 0 && xs[i] <= xs[i - 1])
            throw ValidationError(std::string(what) + " must be strictly increasing");
    }
}

} // namespace

int smooth_box_radius(double margin, std::int64_t n_max) {
    if (!(margin >= 1.0)) throw ValidationError("box margin must be >= 1");
    if (n_max < 1) throw ValidationError("box radius target must be >= 1");
    std::int64_t m = static_cast<std::int64_t>(std::ceil(margin * static_cast<double>(n_max) - 1e-9));
    if (m < n_max) m = n_max;
    while (!is_13_smooth(m + 1)) ++m;
    if (m > (std::int64_t{1} << 20)) throw ResourceError("box radius is implausibly large");
    return static_cast<int>(m);
}

void run_striped_trials(std::uint64_t trials, int workers,
                        const std::function<std::function<void(std::uint64_t)>(int)>& factory) {
    if (workers < 1) throw ValidationError("worker count must be >= 1");
    if (trials == 0) return;
    const int w = workers > static_cast<std::int64_t>(trials) ? static_cast<int>(trials) : workers;

    // Build the per-worker bodies on the calling thread: factories typically
    // allocate FFT workspaces, and the planner side of FFTW is not safe to
    // drive from several threads at once.
    std::vector<std::function<void(std::uint64_t)>> bodies;
    bodies.reserve(w);
    for (int wi = 0; wi < w; ++wi) bodies.push_back(factory(wi));

    struct Failure {
        std::uint64_t trial;
        std::string what;
    };
    std::vector<std::optional<Failure>> fails(w);

    auto stripe = [&](int wi) {
        for (std::uint64_t t = wi; t < trials; t += static_cast<std::uint64_t>(w)) {
            try {
                bodies[wi](t);
            } catch (const std::exception& e) {
                fails[wi] = Failure{t, e.what()};
                return;
            }
        }
    };

    if (w == 1) {
        stripe(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(w);
        for (int wi = 0; wi < w; ++wi) pool.emplace_back(stripe, wi);
        for (auto& th : pool) th.join();
    }

    // Each stripe stops at its own first failure, so the minimum over stripes
    // is the first failing trial regardless of the worker count.
    const Failure* first = nullptr;
    for (const auto& f : fails) {
        if (f && (first == nullptr || f->trial < first->trial)) first = &*f;
    }
    if (first != nullptr) {
        throw Error("trial " + std::to_string(first->trial) + " failed: " + first->what);
    }
}

LevelSetResult run_level_set_trials(
    int d, double margin, const std::vector<std::int64_t>& one_arm_ns,
    const std::vector<std::pair<std::int64_t, std::int64_t>>& crossing_pairs,
    std::uint64_t trials, std::uint64_t seed, int workers) {
    if (one_arm_ns.empty() && crossing_pairs.empty())
        throw ValidationError("level-set run needs a one-arm ladder or crossing pairs");
    if (trials == 0) throw ValidationError("trials must be >= 1");
    require_ascending(one_arm_ns, 0, "one-arm ladder");

    std::int64_t n_hi = one_arm_ns.empty() ? 0 : one_arm_ns.back();
    // Distinct inner radii with the largest outer radius each has to reach.
    std::map<std::int64_t, std::int64_t> inner_reach;
    for (const auto& [n, big] : crossing_pairs) {
        if (n < 1 || big < n) throw ValidationError("crossing pairs need 1 <= n <= N");
        n_hi = std::max(n_hi, big);
        auto [it, fresh] = inner_reach.emplace(n, big);
        if (!fresh) it->second = std::max(it->second, big);
    }

    LevelSetResult out;
    const int radius = smooth_box_radius(margin, std::max<std::int64_t>(n_hi, 1));
    out.box = Box(d, radius);
    out.one_arm_bits.assign(one_arm_ns.size(), std::vector<std::uint8_t>(trials, 0));
    out.crossing_bits.assign(crossing_pairs.size(), std::vector<std::uint8_t>(trials, 0));

    const DirichletSampler sampler(out.box);
    const int one_arm_reach = one_arm_ns.empty() ? 0 : static_cast<int>(one_arm_ns.back());

    const auto t0 = Clock::now();
    auto factory = [&](int) -> std::function<void(std::uint64_t)> {
        auto ws = std::shared_ptr<DirichletSampler::Workspace>(sampler.make_workspace());
        auto scratch = std::make_shared<BfsScratch>();
        return [&, ws, scratch](std::uint64_t t) {
            const RngStream ts = trial_stream(seed, "level-set", t);
            sampler.sample(purpose_stream(ts, StreamPurpose::FieldNoise), *ws);
            const FieldView f(out.box, ws->data());
            const EdgeCoin coin{purpose_stream(ts, StreamPurpose::EdgeUniforms), d};
            if (!one_arm_ns.empty()) {
                const int reach =
                    one_arm_max_radius(f, Side::NonNegative, coin, one_arm_reach, *scratch);
                for (std::size_t j = 0; j < one_arm_ns.size(); ++j)
                    out.one_arm_bits[j][t] = reach >= one_arm_ns[j] ? 1 : 0;
            }
            for (const auto& [n, big] : inner_reach) {
                const int reach = crossing_max_radius(f, Side::NonNegative, coin,
                                                      static_cast<int>(n),
                                                      static_cast<int>(big), *scratch);
                for (std::size_t j = 0; j < crossing_pairs.size(); ++j) {
                    if (crossing_pairs[j].first == n)
                        out.crossing_bits[j][t] = reach >= crossing_pairs[j].second ? 1 : 0;
                }
            }
        };
    };
    run_striped_trials(trials, workers, factory);
    out.wall_s = seconds_since(t0);

    for (std::size_t j = 0; j < one_arm_ns.size(); ++j) {
        out.records.push_back(bernoulli_record("one-arm", d, one_arm_ns[j], 0, margin,
                                               out.one_arm_bits[j], seed, out.wall_s, radius));
    }
    for (std::size_t j = 0; j < crossing_pairs.size(); ++j) {
        out.records.push_back(bernoulli_record("crossing", d, crossing_pairs[j].second,
                                               crossing_pairs[j].first, margin,
                                               out.crossing_bits[j], seed, out.wall_s, radius));
    }
    return out;
}

TwoPointResult run_two_point_trials(int d, double margin,
                                    const std::vector<std::int64_t>& distances,
                                    std::uint64_t trials, std::uint64_t seed, int workers) {
    if (distances.empty()) throw ValidationError("two-point run needs a distance ladder");
    if (trials == 0) throw ValidationError("trials must be >= 1");
    require_ascending(distances, 1, "distance ladder");

    TwoPointResult out;
    const int radius = smooth_box_radius(margin, distances.back());
    out.box = Box(d, radius);
    out.bits.assign(distances.size(), std::vector<std::uint8_t>(trials, 0));

    std::vector<std::int64_t> targets;
    targets.reserve(distances.size());
    for (std::int64_t dist : distances) {
        Point p = origin(d);
        p.c[0] = static_cast<int>(dist);
        targets.push_back(out.box.linear_index(p));
    }

    const DirichletSampler sampler(out.box);
    const auto t0 = Clock::now();
    auto factory = [&](int) -> std::function<void(std::uint64_t)> {
        auto ws = std::shared_ptr<DirichletSampler::Workspace>(sampler.make_workspace());
        auto scratch = std::make_shared<BfsScratch>();
        auto hit = std::make_shared<std::vector<std::uint8_t>>();
        return [&, ws, scratch, hit](std::uint64_t t) {
            const RngStream ts = trial_stream(seed, "two-point", t);
            sampler.sample(purpose_stream(ts, StreamPurpose::FieldNoise), *ws);
            const FieldView f(out.box, ws->data());
            const EdgeCoin coin{purpose_stream(ts, StreamPurpose::EdgeUniforms), d};
            center_cluster_targets(f, Side::NonNegative, coin, radius, targets, *hit, *scratch);
            for (std::size_t j = 0; j < targets.size(); ++j) out.bits[j][t] = (*hit)[j];
        };
    };
    run_striped_trials(trials, workers, factory);
    out.wall_s = seconds_since(t0);

    for (std::size_t j = 0; j < distances.size(); ++j) {
        out.records.push_back(bernoulli_record("two-point", d, distances[j], 0, margin,
                                               out.bits[j], seed, out.wall_s, radius));
    }
    return out;
}

QVarianceResult run_q_variance_trials(int d, double margin,
                                      const std::vector<std::int64_t>& ns,
                                      std::uint64_t trials, std::uint64_t seed, int workers) {
    if (ns.empty()) throw ValidationError("boundary-average run needs an N ladder");
    if (trials < 2) throw ValidationError("variance estimates need trials >= 2");
    require_ascending(ns, 1, "N ladder");

    QVarianceResult out;
    const int radius = smooth_box_radius(margin, ns.back());
    out.box = Box(d, radius);

    std::vector<BoundaryWeights> weights;
    weights.reserve(ns.size());
    for (std::int64_t n : ns) {
        weights.push_back(boundary_hitting_weights(out.box, static_cast<int>(n)));
        out.solver_sigma2.push_back(q_variance_solver(weights.back()));
    }

    std::vector<std::vector<double>> qvals(ns.size(), std::vector<double>(trials, 0.0));
    const DirichletSampler sampler(out.box);
    const auto t0 = Clock::now();
    auto factory = [&](int) -> std::function<void(std::uint64_t)> {
        auto ws = std::shared_ptr<DirichletSampler::Workspace>(sampler.make_workspace());
        return [&, ws](std::uint64_t t) {
            const RngStream ts = trial_stream(seed, "q-variance", t);
            sampler.sample(purpose_stream(ts, StreamPurpose::FieldNoise), *ws);
            const FieldView f(out.box, ws->data());
            for (std::size_t j = 0; j < qvals.size(); ++j)
                qvals[j][t] = boundary_average_q(f, weights[j]);
        };
    };
    run_striped_trials(trials, workers, factory);
    out.wall_s = seconds_since(t0);

    for (std::size_t j = 0; j < ns.size(); ++j) {
        const MomentSummary m = summarize(qvals[j]);
        out.q_summary.push_back(m);
        EstimateRecord r;
        r.quantity = "q-variance";
        r.d = d;
        r.param1 = ns[j];
        r.param2 = 0;
        r.margin = margin;
        r.trials = trials;
        r.successes = trials; // every trial yields a value; the estimate is a variance
        r.p_hat = m.variance;
        r.ci_low = std::max(0.0, m.variance - 1.959963984540054 * m.se_variance);
        r.ci_high = m.variance + 1.959963984540054 * m.se_variance;
        r.master_seed = seed;
        r.wall_time_s = out.wall_s;
        r.box_radius = radius;
        out.records.push_back(std::move(r));
    }
    return out;
}

MartingaleResult run_martingale_trials(int d, int ball_radius, double margin, double frac,
                                       std::uint64_t trials, std::uint64_t seed, int workers) {
    if (ball_radius < 1) throw ValidationError("ball radius must be >= 1");
    if (trials == 0) throw ValidationError("trials must be >= 1");
    if (!(frac > 0.0 && frac <= 1.0)) throw ValidationError("cut fraction must lie in (0, 1]");

    MartingaleResult out;
    int radius = smooth_box_radius(margin, ball_radius);
    if (radius < ball_radius + 2) radius = smooth_box_radius(1.0, ball_radius + 2);
    out.box = Box(d, radius);
    out.ball = Ball(origin(d), static_cast<double>(ball_radius));
    out.frac = frac;

    const MartingaleGeometry geo = martingale_geometry(out.box, out.ball, origin(d));
    out.g_a_xx = geo.g_a_xx;

    char tag[160];
    std::snprintf(tag, sizeof(tag), "martingale,d=%d,ball=%d,margin=%.17g,frac=%.17g,seed=%llu",
                  d, ball_radius, margin, frac,
                  static_cast<unsigned long long>(seed));
    const std::uint64_t config_hash = fnv1a(tag);

    out.m0.assign(trials, 0.0);
    out.endpoint.assign(trials, 0.0);
    out.h_star.assign(trials, 0.0);
    out.qv.assign(trials, 0.0);
    out.absorbed.assign(trials, 0);
    std::vector<double> qv_err(trials, 0.0);

    const DirichletSampler sampler(out.box);
    const auto t0 = Clock::now();
    auto factory = [&](int) -> std::function<void(std::uint64_t)> {
        auto ws = std::shared_ptr<DirichletSampler::Workspace>(sampler.make_workspace());
        return [&, ws](std::uint64_t t) {
            const RngStream ts = trial_stream(seed, "martingale", t);
            sampler.sample(purpose_stream(ts, StreamPurpose::FieldNoise), *ws);
            const FieldView f(out.box, ws->data());
            const MartingaleRecord rec = exploration_martingale_record(
                f, purpose_stream(ts, StreamPurpose::EdgeUniforms), geo, frac, config_hash);
            out.m0[t] = rec.m0;
            out.endpoint[t] = rec.endpoint;
            out.h_star[t] = rec.h_star;
            out.qv[t] = rec.qv;
            out.absorbed[t] = rec.absorbed ? 1 : 0;
            qv_err[t] = rec.qv_check_err;
        };
    };
    run_striped_trials(trials, workers, factory);
    out.wall_s = seconds_since(t0);

    std::uint64_t nabs = 0;
    for (std::uint8_t a : out.absorbed) nabs += a;
    out.absorbed_fraction = static_cast<double>(nabs) / static_cast<double>(trials);
    out.max_qv_err = *std::max_element(qv_err.begin(), qv_err.end());

    std::vector<double> drift(trials);
    for (std::uint64_t t = 0; t < trials; ++t) drift[t] = out.endpoint[t] - out.m0[t];
    const MomentSummary ds = summarize(drift);
    out.drift_mean = ds.mean;
    out.drift_se = ds.se_mean;

    // Tail grid: caps are fractions of the time-zero bracket, thresholds are
    // cap-relative so the Gaussian comparison point is the same ratio at
    // every cap. The event is one-sided in the increment but compared to the
    // two-sided normal tail, which is the square-root-trick bound shape.
    for (double cap_frac : {0.5, 0.8}) {
        const double cap = cap_frac * out.g_a_xx;
        for (double ratio : {0.5, 1.0, 2.0}) {
            MartingaleResult::TailLine line;
            line.cap = cap;
            line.t = ratio * std::sqrt(cap);
            std::uint64_t hits = 0;
            for (std::uint64_t t = 0; t < trials; ++t) {
                if (drift[t] >= line.t && out.qv[t] <= cap) ++hits;
            }
            line.frequency = static_cast<double>(hits) / static_cast<double>(trials);
            line.bound = 2.0 * normal_tail(ratio);
            line.se = std::sqrt(line.bound * (1.0 - line.bound) / static_cast<double>(trials));
            out.tails.push_back(line);
        }
    }
    return out;
}

std::string martingale_report_json(const MartingaleResult& r) {
    nlohmann::json j;
    j["quantity"] = "martingale";
    j["d"] = r.box.dim;
    j["box_radius"] = r.box.radius;
    j["ball_radius"] = r.ball.radius;
    j["frac"] = r.frac;
    j["green_at_center"] = r.g_a_xx;
    j["trials"] = r.m0.size();
    j["absorbed_fraction"] = r.absorbed_fraction;
    j["max_qv_identity_err"] = r.max_qv_err;
    j["drift_mean"] = r.drift_mean;
    j["drift_se"] = r.drift_se;
    j["wall_s"] = r.wall_s;
    nlohmann::json tails = nlohmann::json::array();
    for (const auto& line : r.tails) {
        tails.push_back({{"t", line.t},
                         {"cap", line.cap},
                         {"frequency", line.frequency},
                         {"bound", line.bound},
                         {"se", line.se}});
    }
    j["tails"] = tails;
    return j.dump(2);
}

BiasHarnessResult run_bias_harness(int d, std::int64_t n, const std::vector<double>& margins,
                                   std::uint64_t trials, std::uint64_t seed, int workers) {
    if (margins.size() < 2) throw ValidationError("bias harness needs at least two margins");
    for (std::size_t i = 0; i < margins.size(); ++i) {
        if (!(margins[i] >= 1.5)) throw ValidationError("bias harness margins must be >= 1.5");
        if (i > 0 && margins[i] <= margins[i - 1])
            throw ValidationError("bias harness margins must be strictly increasing");
    }
    if (n < 1) throw ValidationError("bias harness needs N >= 1");

    BiasHarnessResult out;
    char line[256];
    std::snprintf(line, sizeof(line), "one-arm bias harness: d=%d N=%lld trials=%llu\n", d,
                  static_cast<long long>(n), static_cast<unsigned long long>(trials));
    out.notes += line;
    for (double m : margins) {
        LevelSetResult res = run_level_set_trials(d, m, {n}, {}, trials, seed, workers);
        out.records.push_back(res.records.at(0));
    }
    for (std::size_t i = 0; i + 1 < out.records.size(); ++i) {
        const EstimateRecord& a = out.records[i];
        const EstimateRecord& b = out.records[i + 1];
        const double diff = std::fabs(a.p_hat - b.p_hat);
        const double joint = 1.959963984540054 * std::hypot(record_se(a), record_se(b));
        const bool flag = diff > joint;
        out.flagged = out.flagged || flag;
        std::snprintf(line, sizeof(line),
                      "margin %.6g vs %.6g: |dp| = %.6g, joint 95%% half-width = %.6g -> %s\n",
                      a.margin, b.margin, diff, joint, flag ? "FLAG" : "ok");
        out.notes += line;
    }
    return out;
}

std::string bias_harness_json(const BiasHarnessResult& r) {
    nlohmann::json j;
    j["quantity"] = "bias-harness";
    j["flagged"] = r.flagged;
    j["notes"] = r.notes;
    j["records"] = nlohmann::json::parse(records_to_json(r.records)).at("records");
    return j.dump(2);
}

BridgeGridResult run_bridge_grid(int d, const std::vector<double>& values, std::uint64_t steps,
                                 std::uint64_t reps, std::uint64_t seed, int workers) {
    if (values.empty()) throw ValidationError("bridge grid needs endpoint values");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0)) throw ValidationError("bridge endpoints must be positive");
        if (i > 0 && values[i] <= values[i - 1])
            throw ValidationError("bridge endpoint grid must be strictly increasing");
    }
    if (steps < 256) throw ValidationError("bridge oracle needs steps >= 256");
    if (reps < 1000) throw ValidationError("bridge oracle needs reps >= 1000");
    if (d < 1) throw ValidationError("dimension must be >= 1");

    BridgeGridResult out;
    const std::size_t nv = values.size();
    const std::uint64_t npairs = static_cast<std::uint64_t>(nv) * nv;
    out.details.resize(npairs);
    std::vector<std::string> fail_slot(npairs);

    const RngStream root = RngStream::from_master_seed(seed).derive("oracle-bridge");
    const double length = static_cast<double>(d);
    const std::uint64_t dreps = std::max<std::uint64_t>(1000, reps / 5);
    const std::uint64_t dbase = std::max<std::uint64_t>(256, steps / 4);

    const auto t0 = Clock::now();
    auto factory = [&](int) -> std::function<void(std::uint64_t)> {
        return [&](std::uint64_t i) {
            auto& det = out.details[i];
            det.a = values[i / nv];
            det.b = values[i % nv];
            const RngStream ps = root.derive(i);
            try {
                det.formula = bridge_positive_probability(det.a, det.b, length);
                det.main = bridge_crossing_oracle(det.a, det.b, length, steps, reps,
                                                  ps.derive("main"));
                det.doubling = bridge_oracle_step_doubling(det.a, det.b, length, dbase, dreps,
                                                           ps.derive("doubling"));
            } catch (const std::exception& e) {
                char msg[256];
                std::snprintf(msg, sizeof(msg), "pair a=%.6g b=%.6g: %s", det.a, det.b, e.what());
                fail_slot[i] = msg;
            }
        };
    };
    run_striped_trials(npairs, workers, factory);
    out.wall_s = seconds_since(t0);

    for (std::uint64_t i = 0; i < npairs; ++i) {
        if (!fail_slot[i].empty()) {
            out.failures.push_back(fail_slot[i]);
            continue;
        }
        const auto& det = out.details[i];
        EstimateRecord r;
        r.quantity = "oracle-bridge";
        r.d = d;
        r.param1 = std::llround(1000.0 * det.a);
        r.param2 = std::llround(1000.0 * det.b);
        r.margin = 0.0;
        r.trials = det.main.reps;
        r.successes = static_cast<std::uint64_t>(std::llround(det.main.p_hat *
                                                              static_cast<double>(det.main.reps)));
        r.p_hat = det.main.p_hat;
        const ConfidenceInterval ci = wilson_interval(r.successes, r.trials);
        r.ci_low = ci.low;
        r.ci_high = ci.high;
        r.master_seed = seed;
        r.wall_time_s = out.wall_s;
        r.box_radius = 0;
        out.records.push_back(std::move(r));
    }
    return out;
}

std::string bridge_grid_json(const BridgeGridResult& r) {
    nlohmann::json j;
    j["quantity"] = "oracle-bridge";
    j["wall_s"] = r.wall_s;
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& det : r.details) {
        nlohmann::json doubling = nlohmann::json::array();
        for (const auto& lvl : det.doubling) {
            doubling.push_back({{"steps", lvl.steps},
                                {"reps", lvl.reps},
                                {"p_hat", lvl.p_hat},
                                {"se", lvl.se}});
        }
        pairs.push_back({{"a", det.a},
                         {"b", det.b},
                         {"formula", det.formula},
                         {"p_hat", det.main.p_hat},
                         {"se", det.main.se},
                         {"steps", det.main.steps},
                         {"reps", det.main.reps},
                         {"doubling", doubling}});
    }
    j["pairs"] = pairs;
    j["failures"] = r.failures;
    return j.dump(2);
}

namespace {

// Fit helper shared by the ladder quantities: returns the fit JSON, or an
// error object when the ladder is too short or has an empty success count.
std::string try_fit_json(const std::vector<EstimateRecord>& records,
                         const std::vector<std::vector<std::uint8_t>>* bitmaps,
                         std::uint64_t seed, const std::string& provenance) {
    if (records.size() < 3) return "";
    try {
        const std::vector<FitPoint> points = fit_points_from_records(records);
        FitReport rep = fit_exponent(points, 1000, seed, bitmaps);
        rep.provenance = provenance;
        return fit_report_json(rep);
    } catch (const std::exception& e) {
        nlohmann::json j;
        j["error"] = e.what();
        return j.dump(2);
    }
}

std::string run_provenance(const ExperimentConfig& c) {
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%s d=%d margin=%.6g trials=%llu seed=%llu",
                  quantity_tag(c.quantity), c.d, c.margin,
                  static_cast<unsigned long long>(c.trials),
                  static_cast<unsigned long long>(c.seed));
    return buf;
}

} // namespace

int run_experiment(const ExperimentConfig& config) {
    config.validate();
    const int workers = config.resolved_workers();

    std::vector<EstimateRecord> records;
    std::string fit_json;
    std::string report_json;
    std::vector<std::string> failures;

    switch (config.quantity) {
        case Quantity::OneArm: {
            LevelSetResult res = run_level_set_trials(config.d, config.margin, config.ladder, {},
                                                      config.trials, config.seed, workers);
            records = std::move(res.records);
            fit_json = try_fit_json(records, &res.one_arm_bits, config.seed,
                                    run_provenance(config));
            break;
        }
        case Quantity::Crossing: {
            LevelSetResult res = run_level_set_trials(config.d, config.margin, {}, config.pairs,
                                                      config.trials, config.seed, workers);
            records = std::move(res.records);
            break;
        }
        case Quantity::TwoPoint: {
            TwoPointResult res = run_two_point_trials(config.d, config.margin, config.ladder,
                                                      config.trials, config.seed, workers);
            records = std::move(res.records);
            fit_json = try_fit_json(records, &res.bits, config.seed, run_provenance(config));
            break;
        }
        case Quantity::QVariance: {
            QVarianceResult res = run_q_variance_trials(config.d, config.margin, config.ladder,
                                                        config.trials, config.seed, workers);
            records = res.records;
            nlohmann::json j;
            j["quantity"] = "q-variance";
            j["ladder"] = config.ladder;
            j["solver_sigma2"] = res.solver_sigma2;
            nlohmann::json emp = nlohmann::json::array();
            for (const auto& m : res.q_summary) {
                emp.push_back({{"mean", m.mean},
                               {"variance", m.variance},
                               {"se_mean", m.se_mean},
                               {"se_variance", m.se_variance}});
            }
            j["empirical"] = emp;
            report_json = j.dump(2);
            if (records.size() >= 3) {
                std::vector<FitPoint> points;
                for (std::size_t i = 0; i < records.size(); ++i) {
                    FitPoint p;
                    p.param = static_cast<double>(records[i].param1);
                    p.value = res.q_summary[i].variance;
                    p.se = res.q_summary[i].se_variance;
                    p.trials = config.trials;
                    p.successes = config.trials;
                    points.push_back(p);
                }
                try {
                    FitReport rep = fit_exponent(points, 1000, config.seed, nullptr);
                    rep.provenance = run_provenance(config);
                    fit_json = fit_report_json(rep);
                } catch (const std::exception& e) {
                    nlohmann::json err;
                    err["error"] = e.what();
                    fit_json = err.dump(2);
                }
            }
            break;
        }
        case Quantity::Martingale: {
            if (config.ladder.size() != 1)
                throw ValidationError(
                    "martingale runs take a single ladder entry (the ball radius)");
            MartingaleResult res = run_martingale_trials(
                config.d, static_cast<int>(config.ladder[0]), config.margin, config.frac,
                config.trials, config.seed, workers);
            report_json = martingale_report_json(res);
            records.push_back(bernoulli_record("martingale", config.d, config.ladder[0], 0,
                                               config.margin, res.absorbed, config.seed,
                                               res.wall_s, res.box.radius));
            break;
        }
        case Quantity::Isomorphism: {
            if (config.ladder.size() != 1)
                throw ValidationError(
                    "isomorphism runs take a single ladder entry (the box radius)");
            const Box box(config.d, static_cast<int>(config.ladder[0]));
            const IsomorphismReport rep =
                isomorphism_check(box, static_cast<std::int64_t>(config.trials), config.seed);
            report_json = isomorphism_report_json(rep);
            break;
        }
        case Quantity::OracleBridge: {
            std::vector<double> grid = config.margins;
            if (grid.empty()) grid = {0.25, 0.5, 1.0, 2.0};
            BridgeGridResult res = run_bridge_grid(config.d, grid, config.steps, config.reps,
                                                   config.seed, workers);
            records = std::move(res.records);
            report_json = bridge_grid_json(res);
            failures = std::move(res.failures);
            break;
        }
    }

    const std::string csv = records_to_csv(records);
    std::string json_text = records_to_json(records, fit_json);
    if (!report_json.empty()) {
        nlohmann::json j = nlohmann::json::parse(json_text);
        j["report"] = nlohmann::json::parse(report_json);
        json_text = j.dump(2);
    }

    if (!config.output.empty()) {
        write_text_file(config.output + ".csv", csv);
        write_text_file(config.output + ".json", json_text);
        if (!failures.empty()) {
            nlohmann::json j;
            j["failures"] = failures;
            write_text_file(config.output + ".failures.json", j.dump(2));
        }
    } else if (config.quantity == Quantity::Martingale ||
               config.quantity == Quantity::Isomorphism) {
        std::fputs(report_json.c_str(), stdout);
        std::fputc('\n', stdout);
    } else {
        std::fputs(csv.c_str(), stdout);
        for (const auto& f : failures) std::fprintf(stderr, "failed: %s\n", f.c_str());
    }
    return failures.empty() ? 0 : 1;
}

} // namespace gfflab
