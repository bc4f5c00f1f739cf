#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gfflab/lattice.hpp"
#include "gfflab/rng.hpp"

namespace gfflab {

// One discrete random-walk loop: a cyclic vertex visit sequence together with
// the exponential holding mass picked up at each visit. The representation is
// rooted at the lexicographically minimal rotation, so equal loops compare
// equal as plain vectors.
struct DiscreteLoop {
    std::vector<std::int64_t> visits; // vertex ids, cyclic order
    std::vector<double> masses;       // per-visit Exp(1) local-time units
};

// Rotate a loop into its canonical (lexicographically minimal) phase.
void canonicalize_loop(DiscreteLoop& loop);

struct LoopSoupSample {
    Box box;                         // zero-radius placeholder for matrix-chain soups
    std::uint64_t seed = 0;
    double intensity = 0.5;
    std::vector<DiscreteLoop> loops; // jump loops (Poisson multiset)
    std::vector<double> point_mass;  // per vertex-id Gamma(intensity, scale 1) masses
};

struct OccupationField {
    Box box;
    std::vector<double> local_time; // per vertex id; half-field-square units
};

struct LoopClassCounts {
    std::int64_t fundamental = 0; // visits at least two distinct vertices
    std::int64_t point = 0;       // stays at one vertex
    // Loops supported on a single edge interior never touch a vertex, so at
    // this resolution the class cannot be populated; it is kept for the
    // taxonomy's sake and is always zero.
    std::int64_t edge = 0;
};

// Vertex-elimination tables for a killed chain: for each vertex x_i in a fixed
// ascending order, the Green diagonal g_i = G^{(i)}(x_i, x_i) of the chain
// killed on x_0..x_{i-1} (and on everything outside the active set), plus the
// return-probability profile h_i(y) = G^{(i)}(y, x_i) / g_i used to steer
// conditioned excursions. Loops whose minimal vertex is x_i arrive as a
// Poisson(intensity * ln g_i) multiset.
class LoopSoupTables {
  public:
    // Chain: simple random walk on the box at step probability 1/(2d) per
    // direction, killed on leaving the box and on inactive vertices.
    // `active` (if given) flags the allowed vertices by linear index.
    static LoopSoupTables from_box(const Box& box,
                                   const std::vector<std::uint8_t>* active = nullptr);

    // Chain given by an explicit substochastic transition matrix (row sums
    // <= 1, deficit = killing). Vertex ids are the row indices.
    static LoopSoupTables from_transition_matrix(const Eigen::MatrixXd& transition);

    std::int64_t n() const { return static_cast<std::int64_t>(order_.size()); }
    const std::vector<std::int64_t>& order() const { return order_; }
    double green_diag(std::int64_t level) const {
        return g_[static_cast<std::size_t>(level)];
    }
    // Mean number of jump loops in a soup of this intensity.
    double poisson_parameter(double intensity) const;
    bool has_box() const { return has_box_; }
    const Box& box() const { return box_; }

    LoopSoupSample sample(double intensity, const RngStream& master) const;

  private:
    LoopSoupTables() = default;
    void build_tables(Eigen::MatrixXd transition);
    void sample_excursion(std::int64_t level, SequentialRng& rng,
                          std::vector<std::int64_t>& visits_out,
                          std::vector<double>& masses_out) const;

    bool has_box_ = false;
    Box box_{};
    std::int64_t id_space_ = 0;           // vertex-id upper bound (point_mass length)
    std::vector<std::int64_t> order_;     // position -> vertex id, ascending
    std::vector<std::int64_t> position_;  // vertex id -> position, -1 if inactive
    struct Neighbor {
        std::int32_t pos;
        double prob;
    };
    std::vector<std::vector<Neighbor>> nbrs_; // by position
    std::vector<double> g_;                   // by level
    std::vector<double> h_data_;              // ragged h_i(y), y >= i
    std::vector<std::size_t> h_off_;          // level -> offset of h_i(i)
    double hval(std::int64_t level, std::int64_t pos) const {
        return pos < level ? 0.0
                           : h_data_[h_off_[static_cast<std::size_t>(level)] +
                                     static_cast<std::size_t>(pos - level)];
    }
};

// Soup at intensity 1/2 on the box chain killed at the boundary.
LoopSoupSample sample_loop_soup_half(const Box& box, std::uint64_t seed);

OccupationField occupation_field(const LoopSoupSample& sample);

LoopClassCounts classify_glued_loops(const LoopSoupSample& sample);

// Number of jump loops that never visit a flagged vertex (by vertex id).
std::int64_t count_loops_avoiding(const LoopSoupSample& sample,
                                  const std::vector<std::uint8_t>& excluded);

// Statistical comparison of soup occupation against half the squared Dirichlet
// field, marginal by marginal, plus the Wick covariance check.
struct IsomorphismReport {
    std::string header; // scope note: the halving corollary is internal consistency only
    Box box;
    std::int64_t samples_each = 0;
    std::uint64_t seed = 0;
    struct VertexLine {
        Point vertex;
        double ks_stat = 0.0;
        double ks_p = 0.0;
        double occupation_mean = 0.0;
        double half_square_mean = 0.0;
        double green_half = 0.0; // analytic E[both] = G(x,x)/2
    };
    std::vector<VertexLine> vertices;
    double null_ks_stat = 0.0; // split-half control on the field route
    double null_ks_p = 0.0;
    double cov_occupation = 0.0; // Cov(l_0, l_x) at center and neighbor
    double cov_occupation_se = 0.0;
    double cov_expected = 0.0;   // G(0,x)^2 / 2
};

IsomorphismReport isomorphism_check(const Box& box, std::int64_t samples_each,
                                    std::uint64_t seed);

std::string isomorphism_report_json(const IsomorphismReport& report);

} // namespace gfflab
