#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gfflab/gff.hpp"
#include "gfflab/lattice.hpp"
#include "gfflab/rng.hpp"

namespace gfflab {

// Which side of the zero level the percolation runs on.
enum class Side { NonNegative, NonPositive };

// An edge between values a and b carries an independent bridge; it is open
// when both values are strictly on the working side and the bridge does not
// touch zero, which happens with probability 1 - exp(-|ab|/d) (edge length d,
// bridge variance 2). Zero endpoint values keep the edge closed on both sides.
inline double edge_open_probability(double a, double b, int d, Side side) {
    if (side == Side::NonNegative) {
        if (a <= 0.0 || b <= 0.0) return 0.0;
    } else {
        if (a >= 0.0 || b >= 0.0) return 0.0;
    }
    return -std::expm1(-(a * b) / static_cast<double>(d));
}

// Deterministic per-edge coin: the uniform for edge (lower, axis) sits at
// stream counter linear_index(lower)*d + axis, so any evaluation order gives
// identical openings.
struct EdgeCoin {
    RngStream stream;
    int d = 0;
    bool open(double a, double b, std::int64_t lower_idx, int axis, Side side) const {
        const double p = edge_open_probability(a, b, d, side);
        if (p <= 0.0) return false;
        const double u = RngStream::to_u01(stream.word(
            static_cast<std::uint64_t>(lower_idx * d + axis)));
        return u < p;
    }
};

// Materialized openings, bit i aligned with edges_of_box(box)[i].
struct OpenedEdgeSet {
    Box box;
    Side side = Side::NonNegative;
    std::vector<std::uint8_t> open;
};

OpenedEdgeSet open_edges(const FieldView& f, Side side, const RngStream& edge_stream);

// Cluster labels for every box vertex: vertices joined by open edges share a
// label; labels are numbered 0.. in order of first appearance by vertex index.
std::vector<std::int32_t> clusters(const FieldView& f, const OpenedEdgeSet& opened);

bool connected(const std::vector<std::int32_t>& labels, const Box& box,
               const std::vector<Point>& a, const std::vector<Point>& b);

struct ClusterStats {
    std::int64_t n_clusters = 0;
    std::int64_t max_size = 0;
    double mean_size = 0.0;
    std::int64_t center_cluster_size = 0;
    int center_cluster_radius = -1; // max Chebyshev distance from center, -1 if center not on side
};

ClusterStats cluster_stats(const FieldView& f, const std::vector<std::int32_t>& labels);

// Reusable BFS scratch for the exploration passes.
struct BfsScratch {
    std::vector<std::uint8_t> visited;
    std::vector<std::int64_t> queue;
    void reset(std::int64_t vol);
};

// Largest Chebyshev radius reached by the open cluster of the center within
// B(n_max); -1 when the center value is on the wrong side. A cluster of the
// center alone reports 0.
int one_arm_max_radius(const FieldView& f, Side side, const EdgeCoin& coin, int n_max,
                       BfsScratch& scratch);

// Largest Chebyshev radius reached by the union of open clusters meeting the
// sub-box B(n) (on-side vertices of B(n) are the BFS sources); confined to
// B(n_max). Returns -1 if no source vertex is on the working side.
int crossing_max_radius(const FieldView& f, Side side, const EdgeCoin& coin, int n,
                        int n_max, BfsScratch& scratch);

// Marks targets[i] true when target i lies in the open cluster of the center.
void center_cluster_targets(const FieldView& f, Side side, const EdgeCoin& coin, int n_max,
                            const std::vector<std::int64_t>& target_idx,
                            std::vector<std::uint8_t>& hit, BfsScratch& scratch);

// Vertices joined to the seed set A through open edges of the non-positive
// side, plus A itself. This is the exploration mask: everything whose value
// is revealed by discovering the non-positive clusters attached to A.
struct NegativeClusterMask {
    Box box;
    std::vector<std::uint8_t> member;       // per vertex
    std::vector<std::int64_t> seed_indices; // linear indices of A
};

NegativeClusterMask negative_cluster(const FieldView& f, const RngStream& edge_stream,
                                     const std::vector<Point>& a_vertices);

// Indicator wrappers used by the estimators.
inline bool one_arm_indicator(int max_radius, int n) { return max_radius >= n; }

} // namespace gfflab
