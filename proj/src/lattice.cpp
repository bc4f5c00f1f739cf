#include "gfflab/lattice.hpp"

#include <cmath>
#include <cstdlib>

namespace gfflab {

Point make_point(int dim, std::initializer_list<int> coords) {
    if (dim < 1 || dim > kMaxDim)
        throw ValidationError("point dimension out of range: " + std::to_string(dim));
    if (static_cast<int>(coords.size()) != dim)
        throw ValidationError("coordinate count does not match dimension");
    Point p;
    p.dim = dim;
    int i = 0;
    for (int v : coords) p.c[static_cast<std::size_t>(i++)] = v;
    return p;
}

Point origin(int dim) {
    if (dim < 1 || dim > kMaxDim)
        throw ValidationError("point dimension out of range: " + std::to_string(dim));
    Point p;
    p.dim = dim;
    return p;
}

std::int64_t l1_norm(const Point& p) {
    std::int64_t s = 0;
    for (int j = 0; j < p.dim; ++j) s += std::abs(p[j]);
    return s;
}

int linf_norm(const Point& p) {
    int m = 0;
    for (int j = 0; j < p.dim; ++j) m = std::max(m, std::abs(p[j]));
    return m;
}

std::int64_t l2_norm_sq(const Point& p) {
    std::int64_t s = 0;
    for (int j = 0; j < p.dim; ++j) s += static_cast<std::int64_t>(p[j]) * p[j];
    return s;
}

Box::Box(int dim_, int radius_) : center(origin(dim_)), radius(radius_), dim(dim_) {
    if (radius_ < 0) throw ValidationError("box radius must be nonnegative");
}

Box::Box(Point center_, int radius_) : center(center_), radius(radius_), dim(center_.dim) {
    if (radius_ < 0) throw ValidationError("box radius must be nonnegative");
}

std::int64_t Box::volume() const {
    std::int64_t v = 1;
    for (int j = 0; j < dim; ++j) v *= side();
    return v;
}

bool Box::contains(const Point& p) const {
    for (int j = 0; j < dim; ++j)
        if (std::abs(p[j] - center[j]) > radius) return false;
    return true;
}

int Box::shell_distance(const Point& p) const {
    int m = 0;
    for (int j = 0; j < dim; ++j) m = std::max(m, std::abs(p[j] - center[j]));
    return m;
}

std::int64_t Box::linear_index(const Point& p) const {
    std::int64_t idx = 0;
    const int s = side();
    for (int j = 0; j < dim; ++j) {
        const int off = p[j] - center[j] + radius;
        idx = idx * s + off;
    }
    return idx;
}

Point Box::point_at(std::int64_t idx) const {
    Point p;
    p.dim = dim;
    const int s = side();
    for (int j = dim - 1; j >= 0; --j) {
        p[j] = static_cast<int>(idx % s) - radius + center[j];
        idx /= s;
    }
    return p;
}

std::array<std::int64_t, kMaxDim> Box::strides() const {
    std::array<std::int64_t, kMaxDim> st{};
    std::int64_t v = 1;
    for (int j = dim - 1; j >= 0; --j) {
        st[static_cast<std::size_t>(j)] = v;
        v *= side();
    }
    return st;
}

Ball::Ball(int dim_, double radius_) : center(origin(dim_)), radius(radius_), dim(dim_) {
    if (radius_ < 0.0) throw ValidationError("ball radius must be nonnegative");
}

Ball::Ball(Point center_, double radius_) : center(center_), radius(radius_), dim(center_.dim) {
    if (radius_ < 0.0) throw ValidationError("ball radius must be nonnegative");
}

bool Ball::contains(const Point& p) const {
    double s = 0.0;
    for (int j = 0; j < dim; ++j) {
        const double dj = p[j] - center[j];
        s += dj * dj;
    }
    return s <= radius * radius;
}

namespace {

// Enumerate all points of a cube shell or volume by odometer iteration,
// calling fn(point). side = 2*rad+1 around ctr.
template <class Fn>
void scan_cube(const Point& ctr, int rad, Fn&& fn) {
    const int dim = ctr.dim;
    Point p = ctr;
    for (int j = 0; j < dim; ++j) p[j] = ctr[j] - rad;
    while (true) {
        fn(p);
        int j = dim - 1;
        while (j >= 0) {
            if (p[j] < ctr[j] + rad) {
                ++p[j];
                break;
            }
            p[j] = ctr[j] - rad;
            --j;
        }
        if (j < 0) break;
    }
}

} // namespace

std::vector<Point> inner_boundary(const Box& b) {
    std::vector<Point> out;
    if (b.radius == 0) {
        out.push_back(b.center);
        return out;
    }
    scan_cube(b.center, b.radius, [&](const Point& p) {
        if (b.shell_distance(p) == b.radius) out.push_back(p);
    });
    return out;
}

std::vector<Point> external_boundary(const Box& b) {
    std::vector<Point> out;
    scan_cube(b.center, b.radius + 1, [&](const Point& p) {
        if (b.shell_distance(p) == b.radius + 1) out.push_back(p);
    });
    return out;
}

std::vector<Point> inner_boundary(const Ball& b) {
    std::vector<Point> out;
    const int rad = static_cast<int>(std::floor(b.radius));
    scan_cube(b.center, rad, [&](const Point& p) {
        if (!b.contains(p)) return;
        Point q = p;
        for (int j = 0; j < b.dim; ++j) {
            for (int s : {-1, 1}) {
                q[j] = p[j] + s;
                const bool outside = !b.contains(q);
                q[j] = p[j];
                if (outside) {
                    out.push_back(p);
                    return;
                }
            }
        }
    });
    return out;
}

std::vector<Point> external_boundary(const Ball& b) {
    std::vector<Point> out;
    const int rad = static_cast<int>(std::floor(b.radius)) + 1;
    scan_cube(b.center, rad, [&](const Point& p) {
        if (b.contains(p)) return;
        Point q = p;
        for (int j = 0; j < b.dim; ++j) {
            for (int s : {-1, 1}) {
                q[j] = p[j] + s;
                const bool inside = b.contains(q);
                q[j] = p[j];
                if (inside) {
                    out.push_back(p);
                    return;
                }
            }
        }
    });
    return out;
}

Point Edge::b() const {
    Point q = a;
    ++q[axis];
    return q;
}

std::vector<Edge> edges_of_box(const Box& b) {
    std::vector<Edge> out;
    if (b.radius == 0) return out;
    const auto interior = [&](const Point& p) {
        return b.shell_distance(p) <= b.radius - 1;
    };
    // Ascending (linear index of lower endpoint, axis): iterate the cube in
    // row-major order, which is exactly linear-index order.
    scan_cube(b.center, b.radius, [&](const Point& p) {
        for (int axis = 0; axis < b.dim; ++axis) {
            Point q = p;
            ++q[axis];
            if (!b.contains(q)) continue;
            if (interior(p) || interior(q)) out.push_back(Edge{p, axis});
        }
    });
    return out;
}

std::int64_t edge_counter(const Box& b, std::int64_t lower_idx, int axis) {
    return lower_idx * b.dim + axis;
}

} // namespace gfflab
