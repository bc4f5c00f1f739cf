#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "gfflab/lattice.hpp"
#include "gfflab/rng.hpp"

namespace gfflab {

// A sampled zero-boundary field on a box, indexed by Box::linear_index.
struct FieldSample {
    Box box;
    std::vector<double> values;
};

// Non-owning view used by the hot loops.
struct FieldView {
    const Box* box = nullptr;
    const double* values = nullptr;
    FieldView() = default;
    FieldView(const Box& b, const double* v) : box(&b), values(v) {}
    FieldView(const FieldSample& f) : box(&f.box), values(f.values.data()) {}
    double operator[](std::int64_t i) const { return values[i]; }
};

enum class SamplerKind { Auto, Fft, Dense };

// Zero-boundary Gaussian field sampler on a centered box, by independent
// standard normals on the sine eigenbasis of the lattice transition operator:
//
//   field(x) = sum_k g_k psi_k(x) / sqrt((1 - mu_k) (M+1)^d),
//   psi_k(x) = prod_j sin(pi (k_j+1) (x_j + M + 1) / (2M+2)),
//   mu_k     = (1/d) sum_j cos(pi (k_j+1) / (2M+2)),
//
// which has covariance (I - P)^{-1}, the expected-visits Green function of
// the walk killed outside the box. The transform is evaluated either by a
// d-dimensional type-I DST (FFTW RODFT00, output scaled by 2^-d) or by dense
// per-axis sine-matrix contractions (cross-validation route, side < 64).
class DirichletSampler {
public:
    explicit DirichletSampler(const Box& box, SamplerKind kind = SamplerKind::Auto);
    ~DirichletSampler();
    DirichletSampler(const DirichletSampler&) = delete;
    DirichletSampler& operator=(const DirichletSampler&) = delete;

    const Box& box() const { return box_; }
    SamplerKind resolved_kind() const { return kind_; }

    // A workspace holds the per-thread field buffer. Workspaces may be used
    // concurrently from different threads against one shared sampler; the
    // sampler itself must be constructed on a single thread.
    class Workspace {
    public:
        ~Workspace();
        double* data() { return data_; }
        const double* data() const { return data_; }
        std::int64_t size() const { return size_; }

    private:
        friend class DirichletSampler;
        Workspace(std::int64_t n, bool dense_scratch);
        double* data_ = nullptr;
        std::vector<double> scratch_;
        std::int64_t size_ = 0;
    };

    std::unique_ptr<Workspace> make_workspace() const;

    // Deterministic in the stream: the k-th spectral coefficient uses
    // normal(k) of `noise`. The field is left in ws.data().
    void sample(const RngStream& noise, Workspace& ws) const;

    FieldSample sample_copy(const RngStream& noise) const;

private:
    void run_dense_transform(Workspace& ws) const;

    Box box_;
    SamplerKind kind_;
    int n_ = 0; // points per axis
    std::vector<double> coef_;     // 1/sqrt((1-mu_k)(M+1)^d), k in row-major order
    std::vector<double> sine_;     // dense route: n x n, S[j*n+k] = sin(pi (j+1)(k+1)/(n+1))
    void* plan_ = nullptr;         // fftw_plan
    std::unique_ptr<Workspace> plan_ws_;
};

FieldSample sample_dirichlet_gff(const Box& box, const RngStream& noise,
                                 SamplerKind kind = SamplerKind::Auto);

// Exact spectral covariance sum_k psi_k(x) psi_k(y) / ((1-mu_k)(M+1)^d).
double spectral_covariance(const Box& box, const Point& x, const Point& y);

// Green function of the walk killed outside the box: column y of (I-P)^{-1},
// by Jacobi-preconditioned conjugate gradient (relative residual <= 1e-10).
std::vector<double> dirichlet_green_column(const Box& box, const Point& y);
double dirichlet_green(const Box& box, const Point& x, const Point& y);

// General solve (I-P) u = rhs on the box (same solver and tolerances).
std::vector<double> dirichlet_green_solve(const Box& box, const std::vector<double>& rhs);

// Dense (I-P)^{-1}, oracle route; guarded to volume <= 5000.
std::vector<double> dirichlet_green_matrix_dense(const Box& box);

// Full-lattice Green function G(0,x) = int_0^inf e^{-t} prod_j I_{x_j}(t/d) dt
// for d >= 3, by adaptive quadrature on scaled Bessel functions. Values are
// cached per (d, |x| multiset). Throws AccuracyError if the quadrature cannot
// reach relative accuracy 1e-9.
double fullspace_green(int d, const Point& x);

// Monte Carlo visit-count estimate of G(0,x): random walks from the origin,
// killed outside the Euclidean radius `kill_radius`. Returns (estimate, se).
// Truncation biases the estimate low by O(1/kill_radius).
std::pair<double, double> fullspace_green_mc(int d, const Point& x, std::uint64_t walks,
                                             double kill_radius, const RngStream& stream);

// Exact joint sample of the full-lattice field on an arbitrary point set
// (covariance from fullspace_green, dense Cholesky). Guarded to 4000 points.
std::vector<double> sample_fullspace_gff_exact(int d, const std::vector<Point>& points,
                                               const RngStream& noise);

} // namespace gfflab
