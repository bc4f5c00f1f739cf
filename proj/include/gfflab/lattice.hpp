#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gfflab/errors.hpp"

namespace gfflab {

// Dimensions 1..8 are representable; the solvers and samplers are exercised
// for d in 2..7. Points carry their dimension so API-level code can check
// consistency; hot loops work on linear indices instead.
inline constexpr int kMaxDim = 8;

struct Point {
    std::array<int, kMaxDim> c{};
    int dim = 0;

    int& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    int operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
    bool operator==(const Point& o) const { return dim == o.dim && c == o.c; }
    bool operator!=(const Point& o) const { return !(*this == o); }
};

Point make_point(int dim, std::initializer_list<int> coords);
Point origin(int dim);

std::int64_t l1_norm(const Point& p);
int linf_norm(const Point& p);
std::int64_t l2_norm_sq(const Point& p);

// Axis-aligned box center + [-radius, radius]^dim.
struct Box {
    Point center;
    int radius = 0;
    int dim = 0;

    Box() = default;
    Box(int dim_, int radius_);
    Box(Point center_, int radius_);

    int side() const { return 2 * radius + 1; }
    std::int64_t volume() const;
    bool contains(const Point& p) const;
    // Chebyshev distance from the center, for points known to be in/near the box.
    int shell_distance(const Point& p) const;

    // Row-major vertex index: coordinate 0 is the slowest axis, the last
    // coordinate is contiguous. The center maps to (side^dim - 1) / 2.
    std::int64_t linear_index(const Point& p) const;
    Point point_at(std::int64_t idx) const;

    // Stride of each axis in the linear index.
    std::array<std::int64_t, kMaxDim> strides() const;
};

// Euclidean ball, |x - center|_2 <= radius.
struct Ball {
    Point center;
    double radius = 0.0;
    int dim = 0;

    Ball() = default;
    Ball(int dim_, double radius_);
    Ball(Point center_, double radius_);
    bool contains(const Point& p) const;
};

// Vertices of the box at Chebyshev distance exactly `radius` from the center
// (every such vertex has a lattice neighbor outside the box).
std::vector<Point> inner_boundary(const Box& b);

// Vertices at Chebyshev distance exactly radius+1: the full enclosing shell.
std::vector<Point> external_boundary(const Box& b);

// Vertices inside the ball with a lattice neighbor outside it.
std::vector<Point> inner_boundary(const Ball& b);

// Vertices outside the ball with a lattice neighbor inside it. This set cuts
// every nearest-neighbor path from the ball to infinity.
std::vector<Point> external_boundary(const Ball& b);

// Lattice edge, stored as its lower endpoint and axis: (a, a + e_axis).
struct Edge {
    Point a;
    int axis = 0;
    Point b() const;
};

// Edges with at least one endpoint strictly inside the box (shell-shell edges
// are excluded). Order is canonical: ascending (linear_index(lower endpoint),
// axis). This is the order the per-edge RNG counter follows, so lazy and
// eager edge evaluation see identical random values.
std::vector<Edge> edges_of_box(const Box& b);

// Canonical RNG counter of an edge: linear_index(lower endpoint) * dim + axis.
std::int64_t edge_counter(const Box& b, std::int64_t lower_idx, int axis);

} // namespace gfflab
