#include "gfflab/network.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "gfflab/errors.hpp"

namespace gfflab {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using CgSolver = Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper,
                                          Eigen::DiagonalPreconditioner<double>>;

Eigen::VectorXd checked_cg(const SpMat& A, const Eigen::VectorXd& b, const char* what) {
    CgSolver cg;
    cg.setTolerance(1e-13);
    cg.setMaxIterations(40000);
    cg.compute(A);
    Eigen::VectorXd x = cg.solve(b);
    const double bn = b.norm();
    if (bn > 0.0) {
        const double rel = (A * x - b).norm() / bn;
        if (rel > 1e-10)
            throw SolverError(std::string("network solve did not converge in ") + what, rel);
    }
    return x;
}

} // namespace

struct ResistorNetwork::System {
    SpMat L;
    std::unique_ptr<CgSolver> cg;
    std::unique_ptr<Eigen::LLT<Eigen::MatrixXd>> dense;
};

ResistorNetwork::ResistorNetwork(std::int64_t n_free)
    : diag_(static_cast<std::size_t>(n_free), 0.0),
      adj_(static_cast<std::size_t>(n_free)),
      couplings_(static_cast<std::size_t>(n_free)) {}

void ResistorNetwork::add_edge(std::int64_t u, std::int64_t v, double c) {
    if (u == v) throw ValidationError("network: self edge");
    adj_[static_cast<std::size_t>(u)].push_back(Link{v, c});
    adj_[static_cast<std::size_t>(v)].push_back(Link{u, c});
    diag_[static_cast<std::size_t>(u)] += c;
    diag_[static_cast<std::size_t>(v)] += c;
    sys_.reset();
}

std::int64_t ResistorNetwork::add_absorber(const Absorber& a) {
    absorbers_.push_back(a);
    return static_cast<std::int64_t>(absorbers_.size()) - 1;
}

void ResistorNetwork::add_absorber_link(std::int64_t u, std::int64_t absorber, double c) {
    couplings_[static_cast<std::size_t>(u)].push_back(Link{absorber, c});
    diag_[static_cast<std::size_t>(u)] += c;
    sys_.reset();
}

void ResistorNetwork::add_escape(std::int64_t u, double c) {
    diag_[static_cast<std::size_t>(u)] += c;
    sys_.reset();
}

void ResistorNetwork::ensure_system() const {
    if (sys_) return;
    auto s = std::make_shared<System>();
    const std::int64_t n = n_free();
    std::vector<Eigen::Triplet<double>> trip;
    std::size_t nnz = static_cast<std::size_t>(n);
    for (const auto& a : adj_) nnz += a.size();
    trip.reserve(nnz);
    for (std::int64_t u = 0; u < n; ++u) {
        trip.emplace_back(u, u, diag_[static_cast<std::size_t>(u)]);
        for (const auto& l : adj_[static_cast<std::size_t>(u)])
            trip.emplace_back(u, l.to, -l.c);
    }
    s->L.resize(n, n);
    s->L.setFromTriplets(trip.begin(), trip.end());
    s->cg = std::make_unique<CgSolver>();
    s->cg->setTolerance(1e-13);
    s->cg->setMaxIterations(40000);
    s->cg->compute(s->L);
    sys_ = std::move(s);
}

std::vector<double> ResistorNetwork::solve(const std::vector<double>& rhs,
                                           bool dense_oracle) const {
    const std::int64_t n = n_free();
    if (static_cast<std::int64_t>(rhs.size()) != n)
        throw ValidationError("network solve: rhs size mismatch");
    ensure_system();
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), n);
    Eigen::VectorXd x;
    if (dense_oracle) {
        if (n > 5000) throw ResourceError("dense network oracle limited to 5000 unknowns");
        if (!sys_->dense)
            sys_->dense = std::make_unique<Eigen::LLT<Eigen::MatrixXd>>(
                Eigen::MatrixXd(sys_->L));
        x = sys_->dense->solve(Eigen::VectorXd(b));
    } else {
        x = sys_->cg->solve(b);
        const double bn = b.norm();
        if (bn > 0.0) {
            const double rel = (sys_->L * x - b).norm() / bn;
            if (rel > 1e-10) throw SolverError("network solve did not converge", rel);
        }
    }
    return std::vector<double>(x.data(), x.data() + n);
}

std::vector<double> ResistorNetwork::green_column(std::int64_t v, bool dense_oracle) const {
    std::vector<double> rhs(static_cast<std::size_t>(n_free()), 0.0);
    rhs[static_cast<std::size_t>(v)] = 1.0;
    return solve(rhs, dense_oracle);
}

ResistorNetwork::Hitting ResistorNetwork::hitting_from_column(
    const std::vector<double>& col) const {
    Hitting h;
    h.prob.assign(absorbers_.size(), 0.0);
    for (std::int64_t u = 0; u < n_free(); ++u) {
        const double g = col[static_cast<std::size_t>(u)];
        for (const auto& l : couplings_[static_cast<std::size_t>(u)])
            h.prob[static_cast<std::size_t>(l.to)] += g * l.c;
    }
    double total = 0.0;
    for (auto& p : h.prob) {
        if (p < 0.0) {
            if (p < -1e-9) throw SolverError("hitting probability went negative", -p);
            p = 0.0;
        }
        total += p;
    }
    h.escape = std::max(0.0, 1.0 - total);
    return h;
}

ResistorNetwork::Hitting ResistorNetwork::hitting_from(std::int64_t v, bool dense_oracle) const {
    return hitting_from_column(green_column(v, dense_oracle));
}

std::vector<double> ResistorNetwork::potential(bool dense_oracle) const {
    std::vector<double> rhs(static_cast<std::size_t>(n_free()), 0.0);
    for (std::int64_t u = 0; u < n_free(); ++u)
        for (const auto& l : couplings_[static_cast<std::size_t>(u)])
            rhs[static_cast<std::size_t>(u)] +=
                l.c * absorbers_[static_cast<std::size_t>(l.to)].value;
    return solve(rhs, dense_oracle);
}

namespace {

// Assemble the free-free system with `skip` nodes removed and solve it.
// Returns the solution indexed by original node (skipped/zero elsewhere).
std::vector<double> reduced_solve(const std::vector<double>& diag,
                                  const std::vector<std::vector<std::pair<std::int64_t, double>>>& adj,
                                  const std::vector<std::int64_t>& skip,
                                  const std::vector<double>& rhs_full, const char* what) {
    const std::int64_t n = static_cast<std::int64_t>(diag.size());
    std::vector<std::int64_t> row(static_cast<std::size_t>(n), -1);
    std::vector<std::uint8_t> skipped(static_cast<std::size_t>(n), 0);
    for (auto s : skip) skipped[static_cast<std::size_t>(s)] = 1;
    std::int64_t m = 0;
    for (std::int64_t u = 0; u < n; ++u)
        if (!skipped[static_cast<std::size_t>(u)]) row[static_cast<std::size_t>(u)] = m++;
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    if (m == 0) return out;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    for (std::int64_t u = 0; u < n; ++u) {
        const std::int64_t ru = row[static_cast<std::size_t>(u)];
        if (ru < 0) continue;
        trip.emplace_back(ru, ru, diag[static_cast<std::size_t>(u)]);
        for (const auto& l : adj[static_cast<std::size_t>(u)]) {
            const std::int64_t rv = row[static_cast<std::size_t>(l.first)];
            if (rv >= 0) trip.emplace_back(ru, rv, -l.second);
        }
        b[ru] = rhs_full[static_cast<std::size_t>(u)];
    }
    SpMat L(m, m);
    L.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd x = checked_cg(L, b, what);
    for (std::int64_t u = 0; u < n; ++u) {
        const std::int64_t ru = row[static_cast<std::size_t>(u)];
        if (ru >= 0) out[static_cast<std::size_t>(u)] = x[ru];
    }
    return out;
}

} // namespace

double ResistorNetwork::conductance_between(std::int64_t u, std::int64_t v) const {
    double c = 0.0;
    for (const auto& l : adj_[static_cast<std::size_t>(u)])
        if (l.to == v) c += l.c;
    return c;
}

double ResistorNetwork::capacity(std::int64_t v) const {
    const std::int64_t n = n_free();
    std::vector<std::vector<std::pair<std::int64_t, double>>> adj(static_cast<std::size_t>(n));
    for (std::int64_t u = 0; u < n; ++u)
        for (const auto& l : adj_[static_cast<std::size_t>(u)])
            adj[static_cast<std::size_t>(u)].emplace_back(l.to, l.c);
    std::vector<double> rhs(static_cast<std::size_t>(n), 0.0);
    for (const auto& l : adj_[static_cast<std::size_t>(v)])
        rhs[static_cast<std::size_t>(l.to)] += l.c;
    const auto u = reduced_solve(diag_, adj, {v}, rhs, "capacity");
    double cap = diag_[static_cast<std::size_t>(v)];
    for (const auto& l : adj_[static_cast<std::size_t>(v)])
        cap -= l.c * u[static_cast<std::size_t>(l.to)];
    return cap;
}

double ResistorNetwork::effective_conductance(std::int64_t v, std::int64_t w) const {
    if (v == w) throw ValidationError("effective_conductance needs distinct terminals");
    const std::int64_t n = n_free();
    std::vector<std::vector<std::pair<std::int64_t, double>>> adj(static_cast<std::size_t>(n));
    for (std::int64_t u = 0; u < n; ++u)
        for (const auto& l : adj_[static_cast<std::size_t>(u)])
            adj[static_cast<std::size_t>(u)].emplace_back(l.to, l.c);
    std::vector<double> rhs(static_cast<std::size_t>(n), 0.0);
    for (const auto& l : adj_[static_cast<std::size_t>(v)])
        if (l.to != w) rhs[static_cast<std::size_t>(l.to)] += l.c;
    const auto u = reduced_solve(diag_, adj, {v, w}, rhs, "effective_conductance");
    double k = conductance_between(v, w);
    for (const auto& l : adj_[static_cast<std::size_t>(w)])
        if (l.to != v) k += l.c * u[static_cast<std::size_t>(l.to)];
    return k;
}

BoxNetwork build_box_network(const BoxNetworkSpec& spec) {
    if (!spec.box) throw ValidationError("build_box_network: box required");
    if (spec.frac <= 0.0 || spec.frac > 1.0)
        throw ValidationError("build_box_network: blocking fraction must lie in (0,1]");
    const Box& box = *spec.box;
    const int d = box.dim;
    const std::int64_t vol = box.volume();
    const double c0 = 1.0 / (2.0 * d);
    const bool blocking = (spec.field != nullptr) && (spec.mask != nullptr);

    BoxNetwork bn;
    bn.box = box;
    bn.field = spec.field;
    bn.mask = spec.mask;
    bn.frac = spec.frac;
    bn.row_of.assign(static_cast<std::size_t>(vol), -1);

    const auto masked = [&](std::int64_t i) {
        return spec.mask && (*spec.mask)[static_cast<std::size_t>(i)] != 0;
    };
    std::int64_t nfree = 0;
    for (std::int64_t i = 0; i < vol; ++i)
        if (!masked(i)) bn.row_of[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(nfree++);
    bn.vertex_of.resize(static_cast<std::size_t>(nfree));
    for (std::int64_t i = 0; i < vol; ++i)
        if (bn.row_of[static_cast<std::size_t>(i)] >= 0)
            bn.vertex_of[static_cast<std::size_t>(bn.row_of[static_cast<std::size_t>(i)])] = i;

    bn.net = std::make_unique<ResistorNetwork>(nfree);
    const auto strides = box.strides();
    std::unordered_map<std::int64_t, std::int64_t> vertex_absorber;

    for (std::int64_t r = 0; r < nfree; ++r) {
        const std::int64_t v = bn.vertex_of[static_cast<std::size_t>(r)];
        const Point pv = box.point_at(v);
        for (int axis = 0; axis < d; ++axis) {
            for (int dir = -1; dir <= 1; dir += 2) {
                const int coord = pv[axis] + dir;
                if (std::abs(coord - box.center[axis]) > box.radius) {
                    bn.net->add_escape(r, c0); // grounded outer wall
                    continue;
                }
                const std::int64_t w = v + dir * strides[static_cast<std::size_t>(axis)];
                if (!masked(w)) {
                    if (w > v) {
                        bn.net->add_edge(r, bn.row_of[static_cast<std::size_t>(w)], c0);
                    }
                    continue;
                }
                if (blocking && spec.field[w] <= 0.0) {
                    // Germ cut: keep a stub of length frac*d toward w,
                    // absorbed at value 0 (conductance 1/(2 d frac)).
                    Absorber a;
                    a.kind = AbsorberKind::EdgePoint;
                    a.value = 0.0;
                    a.vidx = v;
                    a.widx = w;
                    a.frac = spec.frac;
                    const std::int64_t aid = bn.net->add_absorber(a);
                    bn.net->add_absorber_link(r, aid, c0 / spec.frac);
                } else {
                    auto it = vertex_absorber.find(w);
                    std::int64_t aid;
                    if (it == vertex_absorber.end()) {
                        Absorber a;
                        a.kind = AbsorberKind::Vertex;
                        a.value = spec.field ? spec.field[w] : 0.0;
                        a.vidx = w;
                        aid = bn.net->add_absorber(a);
                        vertex_absorber.emplace(w, aid);
                    } else {
                        aid = it->second;
                    }
                    bn.net->add_absorber_link(r, aid, c0);
                }
            }
        }
    }
    return bn;
}

namespace {

std::int64_t require_free(const BoxNetwork& bn, const Point& x, const char* what) {
    if (!bn.box.contains(x)) throw ValidationError(std::string(what) + ": point outside box");
    const std::int64_t idx = bn.box.linear_index(x);
    const std::int32_t r = bn.row_of[static_cast<std::size_t>(idx)];
    if (r < 0) throw ValidationError(std::string(what) + ": point is absorbed in this network");
    return r;
}

} // namespace

HittingDistribution hitting_distribution(const BoxNetwork& bn, const Point& x,
                                         bool dense_oracle) {
    const std::int64_t r = require_free(bn, x, "hitting_distribution");
    const auto h = bn.net->hitting_from(r, dense_oracle);
    HittingDistribution out;
    out.prob = h.prob;
    out.escape = h.escape;
    return out;
}

HarmonicAverages harmonic_averages(const BoxNetwork& bn, const Point& x) {
    const std::int64_t r = require_free(bn, x, "harmonic_average");
    const auto u = bn.net->potential();
    HarmonicAverages out;
    out.h = u[static_cast<std::size_t>(r)];
    // Whole-interval average: neighbors across uncut edges contribute their
    // harmonic value (or boundary value); cut or missing intervals give 0.
    const Box& box = bn.box;
    const int d = box.dim;
    const auto strides = box.strides();
    const std::int64_t v = bn.vertex_of[static_cast<std::size_t>(r)];
    const Point pv = box.point_at(v);
    double acc = 0.0;
    for (int axis = 0; axis < d; ++axis) {
        for (int dir = -1; dir <= 1; dir += 2) {
            const int coord = pv[axis] + dir;
            if (std::abs(coord - box.center[axis]) > box.radius) continue; // wall: 0
            const std::int64_t w = v + dir * strides[static_cast<std::size_t>(axis)];
            const std::int32_t rw = bn.row_of[static_cast<std::size_t>(w)];
            if (rw >= 0) {
                acc += u[static_cast<std::size_t>(rw)];
            } else if (bn.field && bn.field[w] > 0.0) {
                acc += bn.field[w];
            }
            // masked with nonpositive value: interval is cut, contributes 0
        }
    }
    out.h_hat = acc / (2.0 * d);
    return out;
}

double harmonic_average(const BoxNetwork& bn, const Point& x) {
    if (bn.box.contains(x)) {
        const std::int64_t idx = bn.box.linear_index(x);
        if (bn.row_of[static_cast<std::size_t>(idx)] < 0)
            return bn.field ? bn.field[idx] : 0.0; // boundary data at absorbed points
    }
    return harmonic_averages(bn, x).h;
}

double hat_harmonic_average(const BoxNetwork& bn, const Point& x) {
    return harmonic_averages(bn, x).h_hat;
}

double blocked_green(const BoxNetwork& bn, const Point& x) {
    const std::int64_t r = require_free(bn, x, "blocked_green");
    const auto col = bn.net->green_column(r);
    return col[static_cast<std::size_t>(r)];
}

double capacity(const BoxNetwork& bn, const Point& x) {
    const std::int64_t r = require_free(bn, x, "capacity");
    return bn.net->capacity(r);
}

double effective_conductance(const BoxNetwork& bn, const Point& v, const Point& w) {
    const std::int64_t rv = require_free(bn, v, "effective_conductance");
    const std::int64_t rw = require_free(bn, w, "effective_conductance");
    return bn.net->effective_conductance(rv, rw);
}

QuadraticVariation quadratic_variation(const FieldView& f, const NegativeClusterMask& mask,
                                       const Point& x, double frac) {
    const Box& box = *f.box;
    if (!box.contains(x)) throw ValidationError("quadratic_variation: point outside box");
    const std::int64_t xi = box.linear_index(x);

    BoxNetworkSpec base_spec;
    base_spec.box = &box;
    base_spec.field = f.values;
    const BoxNetwork base = build_box_network(base_spec);
    const auto g_base =
        base.net->green_column(base.row_of[static_cast<std::size_t>(xi)]);

    QuadraticVariation qv;
    if (mask.member[static_cast<std::size_t>(xi)]) {
        // x itself is revealed: the stopped walk never leaves x.
        qv.direct = g_base[static_cast<std::size_t>(xi)];
        qv.sum = qv.direct;
        return qv;
    }

    BoxNetworkSpec spec;
    spec.box = &box;
    spec.field = f.values;
    spec.mask = &mask.member;
    spec.frac = frac;
    const BoxNetwork blocked = build_box_network(spec);
    const std::int64_t r = blocked.row_of[static_cast<std::size_t>(xi)];
    const auto col = blocked.net->green_column(r);
    const auto hit = blocked.net->hitting_from_column(col);

    qv.direct = g_base[static_cast<std::size_t>(xi)] - col[static_cast<std::size_t>(r)];
    double s = 0.0;
    const auto& abs_list = blocked.net->absorbers();
    for (std::size_t i = 0; i < abs_list.size(); ++i) {
        const auto& a = abs_list[i];
        const double p = hit.prob[i];
        if (p == 0.0) continue;
        if (a.kind == AbsorberKind::Vertex) {
            s += p * g_base[static_cast<std::size_t>(a.vidx)];
        } else {
            const double gv = g_base[static_cast<std::size_t>(a.vidx)];
            const double gw = g_base[static_cast<std::size_t>(a.widx)];
            s += p * ((1.0 - a.frac) * gv + a.frac * gw);
        }
    }
    qv.sum = s;
    return qv;
}

MartingaleGeometry martingale_geometry(const Box& box, const Ball& ball, const Point& x) {
    if (!ball.contains(x))
        throw ValidationError("martingale_geometry: center point must lie inside the ball");
    MartingaleGeometry geo;
    geo.box = box;
    geo.x = x;
    geo.a_vertices = external_boundary(ball);
    for (const auto& p : geo.a_vertices) {
        if (!box.contains(p))
            throw ValidationError("martingale_geometry: boundary set leaves the box");
        geo.a_indices.push_back(box.linear_index(p));
    }
    const std::int64_t vol = box.volume();
    std::vector<std::uint8_t> ind(static_cast<std::size_t>(vol), 0);
    for (auto i : geo.a_indices) ind[static_cast<std::size_t>(i)] = 1;

    BoxNetworkSpec spec;
    spec.box = &box;
    spec.mask = &ind;
    const BoxNetwork anet = build_box_network(spec);
    const std::int64_t r = anet.row_of[static_cast<std::size_t>(box.linear_index(x))];
    if (r < 0) throw ValidationError("martingale_geometry: x lies on the boundary set");
    geo.g_a_col = anet.net->green_column(r);
    geo.g_a_xx = geo.g_a_col[static_cast<std::size_t>(r)];
    const auto hit = anet.net->hitting_from_column(geo.g_a_col);
    geo.weight_escape = hit.escape;

    // Map absorber probabilities back onto the A vertex order.
    std::unordered_map<std::int64_t, double> by_vertex;
    const auto& abs_list = anet.net->absorbers();
    for (std::size_t i = 0; i < abs_list.size(); ++i)
        by_vertex[abs_list[i].vidx] = hit.prob[i];
    geo.weights.resize(geo.a_indices.size(), 0.0);
    for (std::size_t i = 0; i < geo.a_indices.size(); ++i) {
        auto it = by_vertex.find(geo.a_indices[i]);
        geo.weights[i] = (it == by_vertex.end()) ? 0.0 : it->second;
    }
    geo.row_of_a_net = anet.row_of;
    return geo;
}

MartingaleRecord exploration_martingale_record(const FieldView& f, const RngStream& edge_stream,
                                               const MartingaleGeometry& geo, double frac,
                                               std::uint64_t config_hash) {
    const Box& box = *f.box;
    MartingaleRecord rec;
    rec.config_hash = config_hash;

    const auto mask = negative_cluster(f, edge_stream, geo.a_vertices);
    double m0 = 0.0;
    for (std::size_t i = 0; i < geo.a_indices.size(); ++i)
        m0 += geo.weights[i] * f[geo.a_indices[i]];
    rec.m0 = m0;

    const std::int64_t xi = box.linear_index(geo.x);
    rec.absorbed = mask.member[static_cast<std::size_t>(xi)] != 0;
    if (rec.absorbed) {
        rec.h_star = 0.0;
        rec.endpoint = f[xi];
        rec.qv = geo.g_a_xx;
        rec.qv_check_err = 0.0;
        return rec;
    }

    BoxNetworkSpec spec;
    spec.box = &box;
    spec.field = f.values;
    spec.mask = &mask.member;
    spec.frac = frac;
    const BoxNetwork blocked = build_box_network(spec);
    const std::int64_t r = blocked.row_of[static_cast<std::size_t>(xi)];
    const auto col = blocked.net->green_column(r);
    const auto hit = blocked.net->hitting_from_column(col);

    const auto ga = [&](std::int64_t vidx) -> double {
        const std::int32_t row = geo.row_of_a_net[static_cast<std::size_t>(vidx)];
        return row < 0 ? 0.0 : geo.g_a_col[static_cast<std::size_t>(row)];
    };

    const double direct = geo.g_a_xx - col[static_cast<std::size_t>(r)];
    double sum = 0.0;
    const auto& abs_list = blocked.net->absorbers();
    for (std::size_t i = 0; i < abs_list.size(); ++i) {
        const auto& a = abs_list[i];
        const double p = hit.prob[i];
        if (p == 0.0) continue;
        if (a.kind == AbsorberKind::Vertex) {
            sum += p * ga(a.vidx);
        } else {
            sum += p * ((1.0 - a.frac) * ga(a.vidx) + a.frac * ga(a.widx));
        }
    }
    rec.qv = direct;
    rec.qv_check_err = std::abs(direct - sum);

    const auto u = blocked.net->potential();
    rec.h_star = u[static_cast<std::size_t>(r)];
    rec.endpoint = rec.h_star;
    return rec;
}

} // namespace gfflab
