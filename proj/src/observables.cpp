#include "gfflab/observables.hpp"

#include <cmath>

#include "gfflab/errors.hpp"
#include "gfflab/network.hpp"

namespace gfflab {

BoundaryWeights boundary_hitting_weights(const Box& box, int n) {
    if (n < 1 || n > box.radius)
        throw ValidationError("boundary_hitting_weights: shell radius outside the box");
    BoundaryWeights bw;
    bw.box = box;
    bw.n = n;

    const Box sub(box.center, n);
    const auto shell = inner_boundary(sub);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(sub.volume()), 0);
    for (const auto& p : shell) mask[static_cast<std::size_t>(sub.linear_index(p))] = 1;

    BoxNetworkSpec spec;
    spec.box = &sub;
    spec.mask = &mask;
    const BoxNetwork net = build_box_network(spec);
    const auto hit = hitting_distribution(net, box.center);
    if (hit.escape > 1e-9)
        throw SolverError("boundary weights leaked mass past the shell", hit.escape);

    const auto& absorbers = net.net->absorbers();
    double total = 0.0;
    for (std::size_t i = 0; i < absorbers.size(); ++i) {
        const Point p = sub.point_at(absorbers[i].vidx);
        bw.vertex_idx.push_back(box.linear_index(p));
        bw.w.push_back(hit.prob[i]);
        total += hit.prob[i];
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw SolverError("boundary weights do not sum to 1", std::abs(total - 1.0));
    return bw;
}

double boundary_average_q(const FieldView& f, const BoundaryWeights& weights) {
    double q = 0.0;
    for (std::size_t i = 0; i < weights.w.size(); ++i)
        q += weights.w[i] * f[weights.vertex_idx[i]];
    return q;
}

double q_variance_solver(const BoundaryWeights& weights) {
    std::vector<double> rhs(static_cast<std::size_t>(weights.box.volume()), 0.0);
    for (std::size_t i = 0; i < weights.w.size(); ++i)
        rhs[static_cast<std::size_t>(weights.vertex_idx[i])] += weights.w[i];
    const auto gw = dirichlet_green_solve(weights.box, rhs);
    double var = 0.0;
    for (std::size_t i = 0; i < weights.w.size(); ++i)
        var += weights.w[i] * gw[static_cast<std::size_t>(weights.vertex_idx[i])];
    return var;
}

} // namespace gfflab
