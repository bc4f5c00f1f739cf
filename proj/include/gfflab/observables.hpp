#pragma once

#include <cstdint>
#include <vector>

#include "gfflab/gff.hpp"
#include "gfflab/lattice.hpp"

namespace gfflab {

// Hitting weights of the shell at distance N from the box center: the chance
// that a walk from the center, absorbed on that shell, lands on each vertex.
// Computed on the sub-box of radius N (the walk cannot leave it first), so
// the weights sum to 1 exactly up to solver tolerance.
struct BoundaryWeights {
    Box box;       // the sampling box the vertex indices refer to
    int n = 0;     // shell radius
    std::vector<std::int64_t> vertex_idx; // into the sampling box
    std::vector<double> w;
};

BoundaryWeights boundary_hitting_weights(const Box& box, int n);

// Q_N = sum_z w_z field(z): the harmonic average of the field over the shell.
double boundary_average_q(const FieldView& f, const BoundaryWeights& weights);

// Var(Q_N) by linear solve: w^T G w with G the sampling-box Green function.
double q_variance_solver(const BoundaryWeights& weights);

} // namespace gfflab
