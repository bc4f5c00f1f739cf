#include "gfflab/levelset.hpp"

#include <algorithm>
#include <numeric>

#include "gfflab/errors.hpp"

namespace gfflab {

OpenedEdgeSet open_edges(const FieldView& f, Side side, const RngStream& edge_stream) {
    const Box& box = *f.box;
    OpenedEdgeSet out;
    out.box = box;
    out.side = side;
    const auto edges = edges_of_box(box);
    out.open.resize(edges.size());
    const EdgeCoin coin{edge_stream, box.dim};
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto& e = edges[i];
        const std::int64_t li = box.linear_index(e.a);
        const std::int64_t ui = box.linear_index(e.b());
        out.open[i] = coin.open(f[li], f[ui], li, e.axis, side) ? 1 : 0;
    }
    return out;
}

namespace {

struct UnionFind {
    std::vector<std::int64_t> parent;
    explicit UnionFind(std::int64_t n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    std::int64_t find(std::int64_t x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    void unite(std::int64_t a, std::int64_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) parent[static_cast<std::size_t>(b)] = a;
        else parent[static_cast<std::size_t>(a)] = b;
    }
};

} // namespace

std::vector<std::int32_t> clusters(const FieldView& f, const OpenedEdgeSet& opened) {
    const Box& box = opened.box;
    const std::int64_t vol = box.volume();
    UnionFind uf(vol);
    const auto edges = edges_of_box(box);
    if (edges.size() != opened.open.size())
        throw ValidationError("clusters: opened bitset does not match box edge count");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (!opened.open[i]) continue;
        uf.unite(box.linear_index(edges[i].a), box.linear_index(edges[i].b()));
    }
    std::vector<std::int32_t> labels(static_cast<std::size_t>(vol), -1);
    std::int32_t next = 0;
    for (std::int64_t v = 0; v < vol; ++v) {
        const std::int64_t r = uf.find(v);
        if (labels[static_cast<std::size_t>(r)] < 0) labels[static_cast<std::size_t>(r)] = next++;
        labels[static_cast<std::size_t>(v)] = labels[static_cast<std::size_t>(r)];
    }
    (void)f;
    return labels;
}

bool connected(const std::vector<std::int32_t>& labels, const Box& box,
               const std::vector<Point>& a, const std::vector<Point>& b) {
    std::vector<std::uint8_t> mark;
    std::int32_t maxl = -1;
    for (auto l : labels) maxl = std::max(maxl, l);
    mark.assign(static_cast<std::size_t>(maxl) + 1, 0);
    for (const auto& p : a) {
        if (!box.contains(p)) throw ValidationError("connected: point outside box");
        mark[static_cast<std::size_t>(labels[static_cast<std::size_t>(box.linear_index(p))])] = 1;
    }
    for (const auto& p : b) {
        if (!box.contains(p)) throw ValidationError("connected: point outside box");
        if (mark[static_cast<std::size_t>(labels[static_cast<std::size_t>(box.linear_index(p))])])
            return true;
    }
    return false;
}

ClusterStats cluster_stats(const FieldView& f, const std::vector<std::int32_t>& labels) {
    const Box& box = *f.box;
    const std::int64_t vol = box.volume();
    std::int32_t maxl = -1;
    for (auto l : labels) maxl = std::max(maxl, l);
    std::vector<std::int64_t> sizes(static_cast<std::size_t>(maxl) + 1, 0);
    for (auto l : labels) ++sizes[static_cast<std::size_t>(l)];
    ClusterStats st;
    st.n_clusters = maxl + 1;
    for (auto s : sizes) st.max_size = std::max(st.max_size, s);
    st.mean_size = static_cast<double>(vol) / static_cast<double>(st.n_clusters);
    const std::int64_t ci = box.linear_index(box.center);
    if (f[ci] >= 0.0) {
        const std::int32_t cl = labels[static_cast<std::size_t>(ci)];
        st.center_cluster_size = sizes[static_cast<std::size_t>(cl)];
        int rad = 0;
        for (std::int64_t v = 0; v < vol; ++v)
            if (labels[static_cast<std::size_t>(v)] == cl)
                rad = std::max(rad, box.shell_distance(box.point_at(v)));
        st.center_cluster_radius = rad;
    }
    return st;
}

void BfsScratch::reset(std::int64_t vol) {
    visited.assign(static_cast<std::size_t>(vol), 0);
    queue.clear();
    queue.reserve(1024);
}

namespace {

// Shared BFS over open edges. Sources must already satisfy the side
// constraint. Expansion is confined to shell distance <= n_max. Returns the
// largest shell distance reached. With stop_at_n_max the walk returns as soon
// as the target radius is touched (indicator use); otherwise it exhausts the
// reachable set (mask/target use). `targets_hit` (optional, aligned with
// target_idx) is set for targets found in the explored set.
int bfs_open(const FieldView& f, Side side, const EdgeCoin& coin, int n_max,
             bool stop_at_n_max, BfsScratch& scratch, const std::vector<std::int64_t>& sources,
             const std::vector<std::int64_t>* target_idx, std::vector<std::uint8_t>* targets_hit) {
    const Box& box = *f.box;
    const std::int64_t vol = box.volume();
    const int d = box.dim;
    const auto strides = box.strides();
    scratch.reset(vol);
    auto& q = scratch.queue;
    auto& vis = scratch.visited;
    int best = -1;
    for (auto s : sources) {
        if (!vis[static_cast<std::size_t>(s)]) {
            vis[static_cast<std::size_t>(s)] = 1;
            q.push_back(s);
        }
    }
    std::size_t head = 0;
    while (head < q.size()) {
        const std::int64_t v = q[head++];
        const Point pv = box.point_at(v);
        const int sdv = box.shell_distance(pv);
        best = std::max(best, sdv);
        if (stop_at_n_max && best >= n_max) return best;
        const double fv = f[v];
        for (int axis = 0; axis < d; ++axis) {
            for (int dir = -1; dir <= 1; dir += 2) {
                const int coord = pv[axis] + dir;
                if (std::abs(coord - box.center[axis]) > box.radius) continue;
                const std::int64_t w = v + dir * strides[static_cast<std::size_t>(axis)];
                if (vis[static_cast<std::size_t>(w)]) continue;
                Point pw = pv;
                pw[axis] = coord;
                const int sw = box.shell_distance(pw);
                if (sw > n_max) continue;
                if (sdv > box.radius - 1 && sw > box.radius - 1) continue; // shell-shell edge
                const std::int64_t lower = dir > 0 ? v : w;
                if (!coin.open(fv, f[w], lower, axis, side)) continue;
                vis[static_cast<std::size_t>(w)] = 1;
                q.push_back(w);
            }
        }
    }
    if (target_idx && targets_hit) {
        for (std::size_t i = 0; i < target_idx->size(); ++i)
            (*targets_hit)[i] = vis[static_cast<std::size_t>((*target_idx)[i])];
    }
    return best;
}

} // namespace

int one_arm_max_radius(const FieldView& f, Side side, const EdgeCoin& coin, int n_max,
                       BfsScratch& scratch) {
    const Box& box = *f.box;
    const std::int64_t ci = box.linear_index(box.center);
    const double v = f[ci];
    const bool on_side = (side == Side::NonNegative) ? (v >= 0.0) : (v <= 0.0);
    if (!on_side) return -1;
    const std::vector<std::int64_t> src{ci};
    return bfs_open(f, side, coin, n_max, true, scratch, src, nullptr, nullptr);
}

int crossing_max_radius(const FieldView& f, Side side, const EdgeCoin& coin, int n,
                        int n_max, BfsScratch& scratch) {
    const Box& box = *f.box;
    if (n > n_max) throw ValidationError("crossing: inner radius exceeds exploration radius");
    std::vector<std::int64_t> src;
    const Box inner(box.center, n);
    const std::int64_t ivol = inner.volume();
    src.reserve(static_cast<std::size_t>(ivol));
    for (std::int64_t i = 0; i < ivol; ++i) {
        const Point p = inner.point_at(i);
        const std::int64_t idx = box.linear_index(p);
        const double v = f[idx];
        const bool on_side = (side == Side::NonNegative) ? (v >= 0.0) : (v <= 0.0);
        if (on_side) src.push_back(idx);
    }
    if (src.empty()) return -1;
    return bfs_open(f, side, coin, n_max, true, scratch, src, nullptr, nullptr);
}

void center_cluster_targets(const FieldView& f, Side side, const EdgeCoin& coin, int n_max,
                            const std::vector<std::int64_t>& target_idx,
                            std::vector<std::uint8_t>& hit, BfsScratch& scratch) {
    const Box& box = *f.box;
    hit.assign(target_idx.size(), 0);
    const std::int64_t ci = box.linear_index(box.center);
    const double v = f[ci];
    const bool on_side = (side == Side::NonNegative) ? (v >= 0.0) : (v <= 0.0);
    if (!on_side) return;
    const std::vector<std::int64_t> src{ci};
    bfs_open(f, side, coin, n_max, false, scratch, src, &target_idx, &hit);
}

NegativeClusterMask negative_cluster(const FieldView& f, const RngStream& edge_stream,
                                     const std::vector<Point>& a_vertices) {
    const Box& box = *f.box;
    NegativeClusterMask mask;
    mask.box = box;
    const std::int64_t vol = box.volume();
    mask.member.assign(static_cast<std::size_t>(vol), 0);
    const EdgeCoin coin{edge_stream, box.dim};
    BfsScratch scratch;
    std::vector<std::int64_t> src;
    src.reserve(a_vertices.size());
    for (const auto& p : a_vertices) {
        if (!box.contains(p)) throw ValidationError("negative_cluster: seed outside box");
        src.push_back(box.linear_index(p));
    }
    mask.seed_indices = src;
    // Seeds join the mask unconditionally; growth runs over open edges of the
    // non-positive side only (positive seeds have none, so they stay leaves).
    bfs_open(f, Side::NonPositive, coin, box.radius, false, scratch, src, nullptr, nullptr);
    mask.member = scratch.visited;
    return mask;
}

} // namespace gfflab
