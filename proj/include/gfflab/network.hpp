#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "gfflab/gff.hpp"
#include "gfflab/lattice.hpp"
#include "gfflab/levelset.hpp"

namespace gfflab {

// Electrical model of the metric lattice: an edge of the d-dimensional
// lattice is an interval of length d carrying resistance 2d (conductance
// 1/(2d)); a partial segment of length s has conductance 1/(2s). The Green
// density of the field on this network is the inverse of the weighted
// Laplacian on free nodes, and a connection through the free network happens
// with probability 1 - exp(-2 K a b) where K is the effective conductance.

enum class AbsorberKind { Vertex, EdgePoint };

struct Absorber {
    AbsorberKind kind = AbsorberKind::Vertex;
    double value = 0.0;      // boundary value seen by the harmonic extension
    std::int64_t vidx = -1;  // Vertex: absorbing vertex; EdgePoint: free-side vertex
    std::int64_t widx = -1;  // EdgePoint: masked far vertex (for interpolation)
    double frac = 0.0;       // EdgePoint: arclength fraction from vidx
};

// Generic resistor network with named absorbers and anonymous escape
// (grounded boundary whose hits are not itemized). Free nodes are 0..n-1.
class ResistorNetwork {
public:
    explicit ResistorNetwork(std::int64_t n_free);

    void add_edge(std::int64_t u, std::int64_t v, double c);
    std::int64_t add_absorber(const Absorber& a);
    void add_absorber_link(std::int64_t u, std::int64_t absorber, double c);
    void add_escape(std::int64_t u, double c);

    std::int64_t n_free() const { return static_cast<std::int64_t>(diag_.size()); }
    const std::vector<Absorber>& absorbers() const { return absorbers_; }

    // Solve L u = rhs on free nodes. Production route is Jacobi-preconditioned
    // conjugate gradient (relative residual <= 1e-10, checked); the dense
    // route exists as an independent oracle for cross-checks.
    std::vector<double> solve(const std::vector<double>& rhs, bool dense_oracle = false) const;

    // Green density at v: [L^{-1}]_{vv}; the full column is returned.
    std::vector<double> green_column(std::int64_t v, bool dense_oracle = false) const;

    // P_v(absorbed at a) for every absorber, by the last-exit decomposition
    // from the Green column; escape = 1 - sum. Probabilities are clamped at 0
    // against solver noise.
    struct Hitting {
        std::vector<double> prob;
        double escape = 0.0;
    };
    Hitting hitting_from(std::int64_t v, bool dense_oracle = false) const;
    Hitting hitting_from_column(const std::vector<double>& green_col) const;

    // Harmonic extension of the absorber values (escape contributes 0).
    std::vector<double> potential(bool dense_oracle = false) const;

    // Conductance between v and the whole absorbing complex (capacity of v).
    // Satisfies capacity(v) * green(v,v) = 1.
    double capacity(std::int64_t v) const;

    // Effective conductance between free nodes v and w with every absorber
    // grounded: potential 1 at v, 0 at w, current collected at w (direct edge
    // included). Zero when v and w are not connected through free nodes.
    double effective_conductance(std::int64_t v, std::int64_t w) const;

    double conductance_between(std::int64_t u, std::int64_t v) const;

private:
    struct Link {
        std::int64_t to;
        double c;
    };
    void ensure_system() const;

    std::vector<double> diag_;
    std::vector<std::vector<Link>> adj_;       // free-free
    std::vector<std::vector<Link>> couplings_; // node -> absorber links
    std::vector<Absorber> absorbers_;

    struct System;
    mutable std::shared_ptr<System> sys_;
};

// Box-built network: the field law on the box (full in-box adjacency, outer
// wall grounded), with an optional absorbing vertex set and germ blocking.
//
// Blocking rules for an edge from a free vertex u to a masked vertex w:
//   field[w] > 0  : the edge stays whole, absorbing at w with value field[w];
//   field[w] <= 0 : the zero set of the bridge cuts the edge; the free side
//                   keeps a stub of length frac*d absorbed at value 0.
// Edges between two masked vertices are dropped entirely, and free-free
// edges are never cut (their values are resampled by the conditional law).
struct BoxNetworkSpec {
    const Box* box = nullptr;
    const double* field = nullptr;           // may be null: probability-only network
    const std::vector<std::uint8_t>* mask = nullptr; // may be null: wall-only network
    double frac = 0.5;
};

struct BoxNetwork {
    Box box;
    const double* field = nullptr; // borrowed; must outlive the network
    const std::vector<std::uint8_t>* mask = nullptr;
    double frac = 0.5;
    std::vector<std::int32_t> row_of;    // vertex -> free row or -1
    std::vector<std::int64_t> vertex_of; // free row -> vertex
    std::unique_ptr<ResistorNetwork> net;
};

BoxNetwork build_box_network(const BoxNetworkSpec& spec);

struct HittingDistribution {
    std::vector<double> prob; // aligned with net->absorbers()
    double escape = 0.0;
};

HittingDistribution hitting_distribution(const BoxNetwork& bn, const Point& x,
                                         bool dense_oracle = false);

struct HarmonicAverages {
    double h = 0.0;     // harmonic extension at x of the absorber data
    double h_hat = 0.0; // (2d)^{-1} sum over whole incident intervals
};

HarmonicAverages harmonic_averages(const BoxNetwork& bn, const Point& x);
double harmonic_average(const BoxNetwork& bn, const Point& x);
double hat_harmonic_average(const BoxNetwork& bn, const Point& x);

double blocked_green(const BoxNetwork& bn, const Point& x);
double capacity(const BoxNetwork& bn, const Point& x);
double effective_conductance(const BoxNetwork& bn, const Point& v, const Point& w);

// Both evaluations of the variance spent by the exploration, relative to the
// plain box field: direct = G_box(x,x) - G_blocked(x,x), and the last-exit
// sum over absorbing sites of hitting probability times the box Green density
// at the site (linearly interpolated along cut edges, which is exact).
struct QuadraticVariation {
    double direct = 0.0;
    double sum = 0.0;
};

QuadraticVariation quadratic_variation(const FieldView& f, const NegativeClusterMask& mask,
                                       const Point& x, double frac);

// Reusable per-geometry data for exploration martingale records: A is the
// external vertex boundary of a Euclidean ball around x, which cuts every
// lattice path from x to the box wall, so the boundary weights sum to 1.
struct MartingaleGeometry {
    Box box;
    Point x;
    std::vector<Point> a_vertices;
    std::vector<std::int64_t> a_indices;
    std::vector<double> weights; // hitting probabilities of A from x
    double weight_escape = 0.0;
    double g_a_xx = 0.0;            // Green at x with A grounded
    std::vector<double> g_a_col;    // that Green column (by free row of the A-network)
    std::vector<std::int32_t> row_of_a_net;
};

MartingaleGeometry martingale_geometry(const Box& box, const Ball& ball, const Point& x);

struct MartingaleRecord {
    double m0 = 0.0;       // weighted boundary average over A
    double h_star = 0.0;   // germ-shielded harmonic average at x; 0 when absorbed
    double endpoint = 0.0; // optional-stopping value: field(x) when absorbed, else h_star
    bool absorbed = false;
    double qv = 0.0;           // bracket: G_A(x,x) - G_blocked(x,x)
    double qv_check_err = 0.0; // |direct - last-exit sum| for the bracket identity
    std::uint64_t config_hash = 0;
};

MartingaleRecord exploration_martingale_record(const FieldView& f, const RngStream& edge_stream,
                                               const MartingaleGeometry& geo, double frac,
                                               std::uint64_t config_hash);

} // namespace gfflab
