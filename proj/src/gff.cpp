#include "gfflab/gff.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <utility>

#include <fftw3.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_bessel.h>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "gfflab/errors.hpp"

namespace gfflab {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

// Assemble I - P on the box, where P is 1/(2d) times the adjacency matrix of
// the box (walk killed on leaving the box).
Eigen::SparseMatrix<double> box_operator(const Box& box) {
    const std::int64_t vol = box.volume();
    const auto strides = box.strides();
    const int d = box.dim;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(vol) * (2 * d + 1));
    const double w = -1.0 / (2.0 * d);
    Point p = box.point_at(0);
    for (std::int64_t i = 0; i < vol; ++i) {
        p = box.point_at(i);
        trip.emplace_back(i, i, 1.0);
        for (int j = 0; j < d; ++j) {
            if (p[j] + 1 <= box.center[j] + box.radius)
                trip.emplace_back(i, i + strides[static_cast<std::size_t>(j)], w);
            if (p[j] - 1 >= box.center[j] - box.radius)
                trip.emplace_back(i, i - strides[static_cast<std::size_t>(j)], w);
        }
    }
    Eigen::SparseMatrix<double> A(vol, vol);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

Eigen::VectorXd cg_solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b,
                         const char* what) {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(1e-13);
    cg.setMaxIterations(20000);
    cg.compute(A);
    Eigen::VectorXd x = cg.solve(b);
    const double rel = (A * x - b).norm() / std::max(1e-300, b.norm());
    if (rel > 1e-10)
        throw SolverError(std::string("conjugate gradient did not converge in ") + what, rel);
    return x;
}

} // namespace

DirichletSampler::Workspace::Workspace(std::int64_t n, bool dense_scratch) {
    data_ = static_cast<double*>(fftw_malloc(sizeof(double) * static_cast<std::size_t>(n)));
    if (!data_) throw ResourceError("field workspace allocation failed");
    size_ = n;
    if (dense_scratch) scratch_.resize(static_cast<std::size_t>(n));
}

DirichletSampler::Workspace::~Workspace() {
    if (data_) fftw_free(data_);
}

DirichletSampler::DirichletSampler(const Box& box, SamplerKind kind) : box_(box), kind_(kind) {
    if (box.dim < 1 || box.dim > kMaxDim)
        throw ValidationError("sampler: box dimension out of range");
    n_ = box.side();
    if (kind_ == SamplerKind::Auto) kind_ = SamplerKind::Fft;
    if (kind_ == SamplerKind::Dense && n_ >= 64)
        throw ValidationError("dense sampler route is limited to side < 64");

    const std::int64_t vol = box_.volume();
    const int d = box_.dim;
    // Cosine table shared by all axes (the box is a cube).
    std::vector<double> cosv(static_cast<std::size_t>(n_));
    for (int k = 0; k < n_; ++k)
        cosv[static_cast<std::size_t>(k)] = std::cos(kPi * (k + 1) / (n_ + 1));

    coef_.resize(static_cast<std::size_t>(vol));
    const double norm = std::pow(static_cast<double>(box_.radius + 1), -0.5 * d);
    std::vector<int> k(static_cast<std::size_t>(d), 0);
    double sumcos = d * cosv[0];
    for (std::int64_t idx = 0;; ++idx) {
        const double mu = sumcos / d;
        coef_[static_cast<std::size_t>(idx)] = norm / std::sqrt(1.0 - mu);
        // odometer: last axis fastest, matching row-major linear order
        int j = d - 1;
        while (j >= 0) {
            sumcos -= cosv[static_cast<std::size_t>(k[static_cast<std::size_t>(j)])];
            if (k[static_cast<std::size_t>(j)] + 1 < n_) {
                ++k[static_cast<std::size_t>(j)];
                sumcos += cosv[static_cast<std::size_t>(k[static_cast<std::size_t>(j)])];
                break;
            }
            k[static_cast<std::size_t>(j)] = 0;
            sumcos += cosv[0];
            --j;
        }
        if (j < 0) break;
    }

    if (kind_ == SamplerKind::Fft) {
        plan_ws_ = std::unique_ptr<Workspace>(new Workspace(vol, false));
        std::vector<int> dims(static_cast<std::size_t>(d), n_);
        std::vector<fftw_r2r_kind> kinds(static_cast<std::size_t>(d), FFTW_RODFT00);
        // FFTW_ESTIMATE always: FFTW_MEASURE picks plans by timing, and a
        // different plan changes floating-point summation order, which would
        // break bit-reproducibility of sampled fields across runs.
        const unsigned flags = FFTW_ESTIMATE | FFTW_DESTROY_INPUT;
        plan_ = fftw_plan_r2r(d, dims.data(), plan_ws_->data(), plan_ws_->data(), kinds.data(),
                              flags);
        if (!plan_) throw ResourceError("fftw plan creation failed");
    } else {
        sine_.resize(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_));
        for (int j = 0; j < n_; ++j)
            for (int kk = 0; kk < n_; ++kk)
                sine_[static_cast<std::size_t>(j * n_ + kk)] =
                    std::sin(kPi * (j + 1) * (kk + 1) / (n_ + 1));
    }
}

DirichletSampler::~DirichletSampler() {
    if (plan_) fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

std::unique_ptr<DirichletSampler::Workspace> DirichletSampler::make_workspace() const {
    return std::unique_ptr<Workspace>(
        new Workspace(box_.volume(), kind_ == SamplerKind::Dense));
}

void DirichletSampler::sample(const RngStream& noise, Workspace& ws) const {
    const std::int64_t vol = box_.volume();
    if (ws.size() != vol) throw ValidationError("workspace size does not match sampler box");
    double* buf = ws.data();
    noise.fill_normals(buf, static_cast<std::uint64_t>(vol));
    if (kind_ == SamplerKind::Fft) {
        // RODFT00 applies 2 sin(...) per axis; fold 2^-d into the coefficients.
        const double s = std::ldexp(1.0, -box_.dim);
        for (std::int64_t i = 0; i < vol; ++i) buf[i] *= coef_[static_cast<std::size_t>(i)] * s;
        fftw_execute_r2r(static_cast<fftw_plan>(plan_), buf, buf);
    } else {
        for (std::int64_t i = 0; i < vol; ++i) buf[i] *= coef_[static_cast<std::size_t>(i)];
        run_dense_transform(ws);
    }
}

void DirichletSampler::run_dense_transform(Workspace& ws) const {
    const int d = box_.dim;
    const std::int64_t vol = box_.volume();
    const std::int64_t n = n_;
    double* cur = ws.data();
    double* alt = ws.scratch_.data();
    // Contract the sine matrix along each axis in turn.
    std::int64_t stride = vol / n; // axis 0 is slowest
    for (int axis = 0; axis < d; ++axis) {
        const std::int64_t nblocks = vol / (n * stride);
        for (std::int64_t o = 0; o < nblocks; ++o) {
            const double* in = cur + o * n * stride;
            double* out = alt + o * n * stride;
            for (std::int64_t t = 0; t < n; ++t) {
                const double* srow = &sine_[static_cast<std::size_t>(t * n)];
                double* orow = out + t * stride;
                for (std::int64_t i = 0; i < stride; ++i) orow[i] = 0.0;
                for (std::int64_t k = 0; k < n; ++k) {
                    const double s = srow[k];
                    const double* irow = in + k * stride;
                    for (std::int64_t i = 0; i < stride; ++i) orow[i] += s * irow[i];
                }
            }
        }
        std::swap(cur, alt);
        stride /= n;
    }
    if (cur != ws.data())
        std::copy(cur, cur + vol, ws.data());
}

FieldSample DirichletSampler::sample_copy(const RngStream& noise) const {
    auto ws = make_workspace();
    sample(noise, *ws);
    FieldSample f;
    f.box = box_;
    f.values.assign(ws->data(), ws->data() + ws->size());
    return f;
}

FieldSample sample_dirichlet_gff(const Box& box, const RngStream& noise, SamplerKind kind) {
    DirichletSampler s(box, kind);
    return s.sample_copy(noise);
}

double spectral_covariance(const Box& box, const Point& x, const Point& y) {
    const int d = box.dim;
    const int n = box.side();
    std::vector<double> sx(static_cast<std::size_t>(d * n)), sy(static_cast<std::size_t>(d * n)),
        cosv(static_cast<std::size_t>(n));
    for (int j = 0; j < d; ++j) {
        const int xo = x[j] - box.center[j] + box.radius;
        const int yo = y[j] - box.center[j] + box.radius;
        for (int k = 0; k < n; ++k) {
            sx[static_cast<std::size_t>(j * n + k)] = std::sin(kPi * (k + 1) * (xo + 1) / (n + 1));
            sy[static_cast<std::size_t>(j * n + k)] = std::sin(kPi * (k + 1) * (yo + 1) / (n + 1));
        }
    }
    for (int k = 0; k < n; ++k) cosv[static_cast<std::size_t>(k)] = std::cos(kPi * (k + 1) / (n + 1));
    const double norm = std::pow(static_cast<double>(box.radius + 1), -1.0 * d);
    std::vector<int> k(static_cast<std::size_t>(d), 0);
    double total = 0.0;
    while (true) {
        double prod = 1.0;
        double sumcos = 0.0;
        for (int j = 0; j < d; ++j) {
            const int kj = k[static_cast<std::size_t>(j)];
            prod *= sx[static_cast<std::size_t>(j * n + kj)] * sy[static_cast<std::size_t>(j * n + kj)];
            sumcos += cosv[static_cast<std::size_t>(kj)];
        }
        total += prod / (1.0 - sumcos / d);
        int j = d - 1;
        while (j >= 0) {
            if (k[static_cast<std::size_t>(j)] + 1 < n) {
                ++k[static_cast<std::size_t>(j)];
                break;
            }
            k[static_cast<std::size_t>(j)] = 0;
            --j;
        }
        if (j < 0) break;
    }
    return total * norm;
}

std::vector<double> dirichlet_green_column(const Box& box, const Point& y) {
    if (!box.contains(y)) throw ValidationError("dirichlet_green: point outside box");
    const auto A = box_operator(box);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(box.volume());
    b[box.linear_index(y)] = 1.0;
    Eigen::VectorXd g = cg_solve(A, b, "dirichlet_green");
    return std::vector<double>(g.data(), g.data() + g.size());
}

std::vector<double> dirichlet_green_solve(const Box& box, const std::vector<double>& rhs) {
    if (static_cast<std::int64_t>(rhs.size()) != box.volume())
        throw ValidationError("dirichlet_green_solve: rhs size mismatch");
    const auto A = box_operator(box);
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
    Eigen::VectorXd g = cg_solve(A, b, "dirichlet_green_solve");
    return std::vector<double>(g.data(), g.data() + g.size());
}

double dirichlet_green(const Box& box, const Point& x, const Point& y) {
    const auto col = dirichlet_green_column(box, y);
    if (!box.contains(x)) throw ValidationError("dirichlet_green: point outside box");
    return col[static_cast<std::size_t>(box.linear_index(x))];
}

std::vector<double> dirichlet_green_matrix_dense(const Box& box) {
    const std::int64_t vol = box.volume();
    if (vol > 5000) throw ResourceError("dense Green matrix limited to volume <= 5000");
    Eigen::MatrixXd A = Eigen::MatrixXd(box_operator(box));
    Eigen::MatrixXd G = A.llt().solve(Eigen::MatrixXd::Identity(vol, vol));
    return std::vector<double>(G.data(), G.data() + vol * vol);
}

namespace {

struct GreenIntegrandParams {
    int d;
    int nabs[kMaxDim];
};

double green_integrand(double t, void* raw) {
    const auto* p = static_cast<const GreenIntegrandParams*>(raw);
    // e^{-t} prod_j I_{n_j}(t/d) = prod_j In_scaled(n_j, t/d), since the d
    // scaling factors e^{-t/d} recombine into e^{-t} exactly.
    double prod = 1.0;
    const double arg = t / p->d;
    for (int j = 0; j < p->d; ++j) {
        prod *= gsl_sf_bessel_In_scaled(p->nabs[j], arg);
        if (prod == 0.0) return 0.0;
    }
    return prod;
}

std::once_flag g_gsl_handler_once;

} // namespace

double fullspace_green(int d, const Point& x) {
    if (d < 3) throw ValidationError("fullspace_green requires d >= 3 (transient walk)");
    if (x.dim != d) throw ValidationError("fullspace_green: point dimension mismatch");
    std::call_once(g_gsl_handler_once, [] { gsl_set_error_handler_off(); });

    // Cache on the |x_j| multiset; the Green function is symmetric under
    // coordinate permutation and reflection.
    std::array<int, kMaxDim> key{};
    for (int j = 0; j < d; ++j) key[static_cast<std::size_t>(j)] = std::abs(x[j]);
    std::sort(key.begin(), key.begin() + d);
    static std::mutex cache_mutex;
    static std::map<std::pair<int, std::array<int, kMaxDim>>, double> cache;
    {
        std::lock_guard<std::mutex> lk(cache_mutex);
        auto it = cache.find({d, key});
        if (it != cache.end()) return it->second;
    }

    GreenIntegrandParams params{};
    params.d = d;
    for (int j = 0; j < d; ++j) params.nabs[j] = key[static_cast<std::size_t>(j)];
    gsl_function f;
    f.function = &green_integrand;
    f.params = &params;
    gsl_integration_workspace* w = gsl_integration_workspace_alloc(4000);
    double result = 0.0, abserr = 0.0;
    const int status =
        gsl_integration_qagiu(&f, 0.0, 1e-13, 1e-9, 4000, w, &result, &abserr);
    gsl_integration_workspace_free(w);
    if (status != GSL_SUCCESS || (result > 0 && abserr > 1e-6 * result + 1e-12))
        throw AccuracyError("fullspace_green quadrature failed (err " + std::to_string(abserr) +
                            ", status " + std::to_string(status) + ")");
    {
        std::lock_guard<std::mutex> lk(cache_mutex);
        cache[{d, key}] = result;
    }
    return result;
}

std::pair<double, double> fullspace_green_mc(int d, const Point& x, std::uint64_t walks,
                                             double kill_radius, const RngStream& stream) {
    if (d < 3) throw ValidationError("fullspace_green_mc requires d >= 3");
    if (walks == 0) throw ValidationError("fullspace_green_mc: need at least one walk");
    const double r2max = kill_radius * kill_radius;
    double sum = 0.0, sumsq = 0.0;
    std::array<std::int64_t, kMaxDim> target{};
    for (int j = 0; j < d; ++j) target[static_cast<std::size_t>(j)] = x[j];
    for (std::uint64_t wk = 0; wk < walks; ++wk) {
        const RngStream ws = stream.derive(wk);
        std::array<std::int64_t, kMaxDim> pos{};
        std::uint64_t ctr = 0;
        std::uint64_t visits = 0;
        while (true) {
            bool at_target = true;
            double r2 = 0.0;
            for (int j = 0; j < d; ++j) {
                const auto c = pos[static_cast<std::size_t>(j)];
                at_target = at_target && (c == target[static_cast<std::size_t>(j)]);
                r2 += static_cast<double>(c) * static_cast<double>(c);
            }
            if (at_target) ++visits;
            if (r2 > r2max) break;
            const std::uint64_t u = ws.word(ctr++);
            const int dir = static_cast<int>(u % (2 * static_cast<unsigned>(d)));
            pos[static_cast<std::size_t>(dir >> 1)] += (dir & 1) ? 1 : -1;
        }
        const double v = static_cast<double>(visits);
        sum += v;
        sumsq += v * v;
    }
    const double n = static_cast<double>(walks);
    const double mean = sum / n;
    const double var = std::max(0.0, sumsq / n - mean * mean);
    return {mean, std::sqrt(var / n)};
}

std::vector<double> sample_fullspace_gff_exact(int d, const std::vector<Point>& points,
                                               const RngStream& noise) {
    const std::size_t n = points.size();
    if (n == 0) throw ValidationError("sample_fullspace_gff_exact: empty point set");
    if (n > 4000)
        throw ResourceError("sample_fullspace_gff_exact limited to 4000 points, got " +
                            std::to_string(n));
    Eigen::MatrixXd C(n, n);
    Point diff = origin(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            for (int a = 0; a < d; ++a) diff[a] = points[i][a] - points[j][a];
            const double g = fullspace_green(d, diff);
            C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g;
            C(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = g;
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success) {
        const double mineig =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(C).eigenvalues().minCoeff();
        throw AccuracyError(
            "full-space covariance is not numerically positive definite (min eigenvalue " +
            std::to_string(mineig) + ")");
    }
    Eigen::VectorXd z(n);
    for (std::size_t i = 0; i < n; ++i) z[static_cast<Eigen::Index>(i)] = noise.normal(i);
    Eigen::VectorXd v = llt.matrixL() * z;
    return std::vector<double>(v.data(), v.data() + v.size());
}

} // namespace gfflab
