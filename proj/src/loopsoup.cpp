#include "gfflab/loopsoup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "gfflab/errors.hpp"
#include "gfflab/gff.hpp"
#include "gfflab/stats.hpp"

namespace gfflab {

namespace {

constexpr std::int64_t kTableCap = 10000;

std::int64_t knuth_poisson(double lambda, SequentialRng& rng) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    std::int64_t k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= rng.u01();
    } while (p > limit);
    return k - 1;
}

// Number of root visits of one jump loop: P(k) = R^k / (k ln g), k >= 1.
std::int64_t logseries_visits(double r, double ln_g, SequentialRng& rng) {
    const double u = rng.u01() * ln_g;
    double acc = 0.0;
    double rk = 1.0;
    for (std::int64_t k = 1; k <= 10000000; ++k) {
        rk *= r;
        acc += rk / static_cast<double>(k);
        if (acc >= u) return k;
    }
    throw SolverError("loop visit-count sampler failed to terminate", r);
}

double gamma_shape(double alpha, SequentialRng& rng) {
    if (alpha == 0.5) return rng.gamma_half();
    if (alpha <= 0.0) throw ValidationError("gamma shape must be positive");
    // Marsaglia-Tsang for shape >= 1, with the standard power boost below 1.
    double boost = 1.0;
    double a = alpha;
    if (a < 1.0) {
        boost = std::pow(rng.u01(), 1.0 / a);
        a += 1.0;
    }
    const double d = a - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.u01();
        if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return boost * d * v;
    }
}

} // namespace

void canonicalize_loop(DiscreteLoop& loop) {
    const std::size_t n = loop.visits.size();
    if (n <= 1) return;
    std::size_t best = 0;
    for (std::size_t s = 1; s < n; ++s) {
        for (std::size_t j = 0; j < n; ++j) {
            const std::int64_t a = loop.visits[(s + j) % n];
            const std::int64_t b = loop.visits[(best + j) % n];
            if (a != b) {
                if (a < b) best = s;
                break;
            }
        }
    }
    if (best == 0) return;
    std::rotate(loop.visits.begin(),
                loop.visits.begin() + static_cast<std::ptrdiff_t>(best), loop.visits.end());
    std::rotate(loop.masses.begin(),
                loop.masses.begin() + static_cast<std::ptrdiff_t>(best), loop.masses.end());
}

LoopSoupTables LoopSoupTables::from_box(const Box& box,
                                        const std::vector<std::uint8_t>* active) {
    const std::int64_t vol = box.volume();
    if (active && static_cast<std::int64_t>(active->size()) != vol)
        throw ValidationError("loop soup: active mask size mismatch");
    LoopSoupTables t;
    t.has_box_ = true;
    t.box_ = box;
    t.id_space_ = vol;
    t.position_.assign(static_cast<std::size_t>(vol), -1);
    for (std::int64_t i = 0; i < vol; ++i) {
        if (!active || (*active)[static_cast<std::size_t>(i)]) {
            t.position_[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(t.order_.size());
            t.order_.push_back(i);
        }
    }
    const std::int64_t n = t.n();
    if (n > kTableCap) throw ResourceError("loop soup tables are capped at 10^4 vertices");
    if (n == 0) throw ValidationError("loop soup: empty active set");

    const int d = box.dim;
    const double p = 1.0 / (2.0 * d);
    const auto strides = box.strides();
    t.nbrs_.resize(static_cast<std::size_t>(n));
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (std::int64_t j = 0; j < n; ++j) {
        const std::int64_t v = t.order_[static_cast<std::size_t>(j)];
        const Point pv = box.point_at(v);
        for (int axis = 0; axis < d; ++axis) {
            for (int dir = -1; dir <= 1; dir += 2) {
                const int coord = pv[axis] + dir;
                if (std::abs(coord - box.center[axis]) > box.radius) continue;
                const std::int64_t w = v + dir * strides[static_cast<std::size_t>(axis)];
                const std::int64_t k = t.position_[static_cast<std::size_t>(w)];
                if (k < 0) continue;
                t.nbrs_[static_cast<std::size_t>(j)].push_back(
                    Neighbor{static_cast<std::int32_t>(k), p});
                P(j, k) += p;
            }
        }
    }
    t.build_tables(std::move(P));
    return t;
}

LoopSoupTables LoopSoupTables::from_transition_matrix(const Eigen::MatrixXd& transition) {
    const std::int64_t n = transition.rows();
    if (transition.cols() != n) throw ValidationError("transition matrix must be square");
    if (n == 0) throw ValidationError("transition matrix must be nonempty");
    if (n > kTableCap) throw ResourceError("loop soup tables are capped at 10^4 vertices");
    LoopSoupTables t;
    t.id_space_ = n;
    t.order_.resize(static_cast<std::size_t>(n));
    t.position_.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        t.order_[static_cast<std::size_t>(i)] = i;
        t.position_[static_cast<std::size_t>(i)] = i;
    }
    t.nbrs_.resize(static_cast<std::size_t>(n));
    for (std::int64_t j = 0; j < n; ++j) {
        double row_sum = 0.0;
        for (std::int64_t k = 0; k < n; ++k) {
            const double q = transition(j, k);
            if (q < 0.0) throw ValidationError("transition probabilities must be nonnegative");
            if (q > 0.0)
                t.nbrs_[static_cast<std::size_t>(j)].push_back(
                    Neighbor{static_cast<std::int32_t>(k), q});
            row_sum += q;
        }
        if (row_sum > 1.0 + 1e-12)
            throw ValidationError("transition matrix must be substochastic");
    }
    t.build_tables(transition);
    return t;
}

void LoopSoupTables::build_tables(Eigen::MatrixXd transition) {
    const Eigen::Index n = transition.rows();
    transition = -transition;
    transition.diagonal().array() += 1.0;
    Eigen::MatrixXd G = transition.partialPivLu().solve(
        Eigen::MatrixXd::Identity(n, n));
    if (!G.allFinite())
        throw SolverError("chain Green function is not finite (no killing reachable?)",
                          std::numeric_limits<double>::quiet_NaN());

    g_.resize(static_cast<std::size_t>(n));
    h_off_.resize(static_cast<std::size_t>(n));
    h_data_.reserve(static_cast<std::size_t>(n) * (static_cast<std::size_t>(n) + 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double g = G(i, i);
        if (!std::isfinite(g) || g < 1.0 - 1e-9)
            throw SolverError("eliminated Green diagonal left [1, inf)", g);
        g_[static_cast<std::size_t>(i)] = g;
        h_off_[static_cast<std::size_t>(i)] = h_data_.size();
        for (Eigen::Index j = i; j < n; ++j) h_data_.push_back(G(j, i) / g);
        const Eigen::Index m = n - i - 1;
        if (m > 0) {
            const Eigen::VectorXd col = G.col(i).tail(m);
            const Eigen::RowVectorXd row = G.row(i).tail(m);
            G.bottomRightCorner(m, m).noalias() -= col * row / g;
        }
    }
}

double LoopSoupTables::poisson_parameter(double intensity) const {
    double s = 0.0;
    for (const double g : g_) s += std::log(g);
    return intensity * s;
}

void LoopSoupTables::sample_excursion(std::int64_t level, SequentialRng& rng,
                                      std::vector<std::int64_t>& visits_out,
                                      std::vector<double>& masses_out) const {
    // One excursion of the chain killed below `level`, from the root back to
    // the root, conditioned to return. Appends only the interior visits; the
    // root visits are written by the caller.
    std::int64_t cur = level;
    bool first = true;
    for (;;) {
        // Total conditional weight of the outgoing steps.
        const double total = first
                                 ? (1.0 - 1.0 / g_[static_cast<std::size_t>(level)])
                                 : hval(level, cur);
        const double u = rng.u01() * total;
        double acc = 0.0;
        std::int64_t next = -1;
        const auto& links = nbrs_[static_cast<std::size_t>(cur)];
        for (const auto& l : links) {
            if (l.pos < level) continue; // killed branch, conditioned away
            acc += l.prob * hval(level, l.pos);
            if (acc >= u) {
                next = l.pos;
                break;
            }
        }
        if (next < 0) {
            // Roundoff at the tail of the cumulative scan: take the last
            // admissible branch.
            for (auto it = links.rbegin(); it != links.rend(); ++it) {
                if (it->pos >= level) {
                    next = it->pos;
                    break;
                }
            }
            if (next < 0) throw SolverError("conditioned excursion found no branch", total);
        }
        if (next == level) return; // returned to the root
        visits_out.push_back(order_[static_cast<std::size_t>(next)]);
        masses_out.push_back(rng.exponential());
        cur = next;
        first = false;
    }
}

LoopSoupSample LoopSoupTables::sample(double intensity, const RngStream& master) const {
    if (intensity <= 0.0) throw ValidationError("loop soup intensity must be positive");
    LoopSoupSample s;
    if (has_box_) s.box = box_;
    s.intensity = intensity;
    s.point_mass.assign(static_cast<std::size_t>(id_space_), 0.0);
    SequentialRng rng(master.derive("loopsoup"));

    const std::int64_t n = this->n();
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t vid = order_[static_cast<std::size_t>(i)];
        s.point_mass[static_cast<std::size_t>(vid)] = gamma_shape(intensity, rng);
        const double g = g_[static_cast<std::size_t>(i)];
        const double ln_g = std::log(g);
        if (!(ln_g > 0.0)) continue; // boundary-like vertex: no jump loops rooted here
        const std::int64_t count = knuth_poisson(intensity * ln_g, rng);
        const double r = 1.0 - 1.0 / g;
        for (std::int64_t loop_idx = 0; loop_idx < count; ++loop_idx) {
            const std::int64_t k = logseries_visits(r, ln_g, rng);
            DiscreteLoop loop;
            for (std::int64_t e = 0; e < k; ++e) {
                loop.visits.push_back(vid);
                loop.masses.push_back(rng.exponential());
                sample_excursion(i, rng, loop.visits, loop.masses);
            }
            canonicalize_loop(loop);
            s.loops.push_back(std::move(loop));
        }
    }
    return s;
}

LoopSoupSample sample_loop_soup_half(const Box& box, std::uint64_t seed) {
    const LoopSoupTables tables = LoopSoupTables::from_box(box);
    LoopSoupSample s =
        tables.sample(0.5, RngStream::from_master_seed(seed).derive("loop-soup-half"));
    s.seed = seed;
    return s;
}

OccupationField occupation_field(const LoopSoupSample& sample) {
    OccupationField f;
    f.box = sample.box;
    f.local_time = sample.point_mass;
    const auto n = static_cast<std::int64_t>(f.local_time.size());
    for (const auto& loop : sample.loops) {
        if (loop.visits.size() != loop.masses.size())
            throw ValidationError("loop visit/mass length mismatch");
        for (std::size_t j = 0; j < loop.visits.size(); ++j) {
            const std::int64_t v = loop.visits[j];
            if (v < 0 || v >= n) throw ValidationError("loop visit outside the vertex space");
            f.local_time[static_cast<std::size_t>(v)] += loop.masses[j];
        }
    }
    return f;
}

LoopClassCounts classify_glued_loops(const LoopSoupSample& sample) {
    LoopClassCounts counts;
    std::vector<std::int64_t> scratch;
    for (const auto& loop : sample.loops) {
        if (loop.visits.empty()) throw ValidationError("empty loop");
        scratch = loop.visits;
        std::sort(scratch.begin(), scratch.end());
        const auto distinct =
            std::unique(scratch.begin(), scratch.end()) - scratch.begin();
        if (distinct >= 2)
            ++counts.fundamental;
        else
            ++counts.point;
    }
    return counts;
}

std::int64_t count_loops_avoiding(const LoopSoupSample& sample,
                                  const std::vector<std::uint8_t>& excluded) {
    std::int64_t n = 0;
    for (const auto& loop : sample.loops) {
        bool touches = false;
        for (const std::int64_t v : loop.visits) {
            if (v >= 0 && static_cast<std::size_t>(v) < excluded.size() &&
                excluded[static_cast<std::size_t>(v)]) {
                touches = true;
                break;
            }
        }
        if (!touches) ++n;
    }
    return n;
}

IsomorphismReport isomorphism_check(const Box& box, std::int64_t samples_each,
                                    std::uint64_t seed) {
    if (samples_each < 100)
        throw ValidationError("isomorphism_check needs at least 100 samples per route");
    const LoopSoupTables tables = LoopSoupTables::from_box(box);

    IsomorphismReport rep;
    rep.header =
        "Loop-soup occupation at intensity 1/2 vs half the squared zero-boundary field. "
        "Both routes share one Green function, so the cluster-halving corollary is "
        "exercised only as internal consistency of the samplers, not as an independent "
        "check.";
    rep.box = box;
    rep.samples_each = samples_each;
    rep.seed = seed;

    // Probe vertices along the first axis: center, nearest neighbor, halfway
    // to the wall, and the wall vertex. Deduplicated for small boxes.
    std::vector<Point> probes;
    const auto push_probe = [&](int offset) {
        Point p = box.center;
        p[0] += offset;
        for (const auto& q : probes)
            if (q == p) return;
        probes.push_back(p);
    };
    push_probe(0);
    if (box.radius >= 1) push_probe(1);
    if (box.radius >= 2) push_probe(box.radius / 2 + 1);
    if (box.radius >= 1) push_probe(box.radius);

    const std::size_t np = probes.size();
    std::vector<std::int64_t> probe_idx(np);
    for (std::size_t i = 0; i < np; ++i) probe_idx[i] = box.linear_index(probes[i]);

    const auto s = static_cast<std::size_t>(samples_each);
    std::vector<std::vector<double>> occ(np, std::vector<double>(s));
    std::vector<std::vector<double>> half_sq(np, std::vector<double>(s));

    const RngStream root = RngStream::from_master_seed(seed);
    for (std::size_t t = 0; t < s; ++t) {
        const LoopSoupSample soup =
            tables.sample(0.5, root.derive("soup-trial").derive(static_cast<std::uint64_t>(t)));
        const OccupationField f = occupation_field(soup);
        for (std::size_t i = 0; i < np; ++i)
            occ[i][t] = f.local_time[static_cast<std::size_t>(probe_idx[i])];
    }
    DirichletSampler sampler(box);
    auto ws = sampler.make_workspace();
    for (std::size_t t = 0; t < s; ++t) {
        sampler.sample(root.derive("field-trial").derive(static_cast<std::uint64_t>(t)), *ws);
        for (std::size_t i = 0; i < np; ++i) {
            const double v = ws->data()[probe_idx[i]];
            half_sq[i][t] = 0.5 * v * v;
        }
    }

    for (std::size_t i = 0; i < np; ++i) {
        IsomorphismReport::VertexLine line;
        line.vertex = probes[i];
        const auto [stat, p] = ks_two_sample(occ[i], half_sq[i]);
        line.ks_stat = stat;
        line.ks_p = p;
        line.occupation_mean = summarize(occ[i]).mean;
        line.half_square_mean = summarize(half_sq[i]).mean;
        line.green_half = 0.5 * dirichlet_green(box, probes[i], probes[i]);
        rep.vertices.push_back(line);
    }

    // Null calibration: the field route against itself, split in halves.
    {
        std::vector<double> even, odd;
        even.reserve(s / 2 + 1);
        odd.reserve(s / 2 + 1);
        for (std::size_t t = 0; t < s; ++t)
            (t % 2 == 0 ? even : odd).push_back(half_sq[0][t]);
        const auto [stat, p] = ks_two_sample(even, odd);
        rep.null_ks_stat = stat;
        rep.null_ks_p = p;
    }

    // Wick pair check at (center, neighbor) when the box has one.
    if (np >= 2) {
        const auto cov = sample_covariance(occ[0], occ[1]);
        rep.cov_occupation = cov.cov;
        rep.cov_occupation_se = cov.se;
        const double g01 = dirichlet_green(box, probes[0], probes[1]);
        rep.cov_expected = 0.5 * g01 * g01;
    }
    return rep;
}

std::string isomorphism_report_json(const IsomorphismReport& rep) {
    nlohmann::json j;
    j["header"] = rep.header;
    j["dim"] = rep.box.dim;
    j["box_radius"] = rep.box.radius;
    j["samples_each"] = rep.samples_each;
    j["seed"] = rep.seed;
    j["null_ks_stat"] = rep.null_ks_stat;
    j["null_ks_p"] = rep.null_ks_p;
    j["cov_occupation"] = rep.cov_occupation;
    j["cov_occupation_se"] = rep.cov_occupation_se;
    j["cov_expected"] = rep.cov_expected;
    j["vertices"] = nlohmann::json::array();
    for (const auto& line : rep.vertices) {
        nlohmann::json v;
        std::vector<int> coords;
        for (int i = 0; i < line.vertex.dim; ++i) coords.push_back(line.vertex[i]);
        v["vertex"] = coords;
        v["ks_stat"] = line.ks_stat;
        v["ks_p"] = line.ks_p;
        v["occupation_mean"] = line.occupation_mean;
        v["half_square_mean"] = line.half_square_mean;
        v["green_half"] = line.green_half;
        j["vertices"].push_back(v);
    }
    return j.dump(2);
}

} // namespace gfflab
