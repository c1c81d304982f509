#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "../mesh/mesh.hpp"

namespace fescale::rve {

using mesh::kNoIndex;
using mesh::Vec2;

/// Raised when a boundary node has no partner on the opposite side.
class GeometryError : public mesh::MeshError {
public:
    GeometryError(std::size_t node, double nearest)
        : mesh::MeshError("boundary node " + std::to_string(node) +
                          " has no periodic partner (nearest candidate at distance " +
                          std::to_string(nearest) + ")"),
          node_(node), nearest_(nearest)
    {
    }
    std::size_t node() const noexcept { return node_; }
    double nearest_distance() const noexcept { return nearest_; }

private:
    std::size_t node_;
    double nearest_;
};

struct PeriodicPair {
    std::size_t plus = 0;  // slave node
    std::size_t minus = 0; // its master
    Vec2 offset = Vec2::Zero(); // X(plus) - X(minus)
    bool corner = false;
};

/// Master/slave elimination of the periodicity constraints u+ = u- + H (X+ - X-).
/// Unknowns are fluctuations at master nodes; the anchor's fluctuation is zero.
struct PeriodicMap {
    std::vector<PeriodicPair> pairs;
    std::size_t anchor = 0;
    std::vector<std::size_t> master_of;  // per node
    std::vector<char> on_boundary;       // per node, outer cell boundary
    std::vector<std::size_t> equation;   // per mesh DOF, kNoIndex for anchor-chained DOFs
    std::size_t n_reduced = 0;
    Vec2 lower = Vec2::Zero();
    Vec2 upper = Vec2::Zero();

    std::vector<std::size_t> master_dofs() const
    {
        std::vector<std::size_t> out;
        for (std::size_t n = 0; n < master_of.size(); ++n) {
            if (master_of[n] == n) out.insert(out.end(), {2 * n, 2 * n + 1});
        }
        return out;
    }

    std::vector<std::size_t> slave_dofs() const
    {
        std::vector<std::size_t> out;
        for (std::size_t n = 0; n < master_of.size(); ++n) {
            if (master_of[n] != n) out.insert(out.end(), {2 * n, 2 * n + 1});
        }
        return out;
    }
};

/// Pairs right with left and top with bottom; the three remaining corners chain
/// to the lower-left anchor corner.
inline PeriodicMap build_periodic_map(const mesh::Mesh& m, double tol_geom)
{
    m.validate();
    if (m.nodes.empty()) throw mesh::MeshError("empty mesh");
    const auto used = m.referenced_nodes();
    const auto [lo, hi] = m.bounds();
    const std::size_t n = m.num_nodes();

    PeriodicMap map;
    map.lower = lo;
    map.upper = hi;
    map.master_of.resize(n);
    map.on_boundary.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) map.master_of[i] = i;

    const auto near = [tol_geom](double a, double b) { return std::abs(a - b) <= tol_geom; };
    std::vector<std::size_t> left, right, bottom, top;
    std::size_t corner[4] = {kNoIndex, kNoIndex, kNoIndex, kNoIndex}; // LL, LR, UR, UL
    for (std::size_t i = 0; i < n; ++i) {
        if (!used[i]) throw mesh::MeshError("node " + std::to_string(i) + " is not referenced by any element");
        const Vec2& x = m.nodes[i];
        const bool l = near(x.x(), lo.x());
        const bool r = near(x.x(), hi.x());
        const bool b = near(x.y(), lo.y());
        const bool t = near(x.y(), hi.y());
        map.on_boundary[i] = (l || r || b || t) ? 1 : 0;
        if ((l || r) && (b || t)) {
            corner[(l && b) ? 0 : (r && b) ? 1 : (r && t) ? 2 : 3] = i;
            continue;
        }
        if (l) left.push_back(i);
        if (r) right.push_back(i);
        if (b) bottom.push_back(i);
        if (t) top.push_back(i);
    }
    for (std::size_t c : corner) {
        if (c == kNoIndex) throw mesh::MeshError("cell boundary lacks a corner node");
    }
    map.anchor = corner[0];
    for (int c = 1; c < 4; ++c) {
        map.pairs.push_back({corner[c], map.anchor, m.nodes[corner[c]] - m.nodes[map.anchor], true});
        map.master_of[corner[c]] = map.anchor;
    }

    // match every node of `plus` to one of `minus` along coordinate `axis`
    const auto match = [&](const std::vector<std::size_t>& plus, const std::vector<std::size_t>& minus, int axis) {
        std::vector<char> taken(minus.size(), 0);
        for (std::size_t p : plus) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = kNoIndex;
            for (std::size_t k = 0; k < minus.size(); ++k) {
                const double d = std::abs(m.nodes[p][axis] - m.nodes[minus[k]][axis]);
                if (d < best) {
                    best = d;
                    arg = k;
                }
            }
            if (arg == kNoIndex || best > tol_geom || taken[arg]) {
                throw GeometryError(p, arg == kNoIndex ? std::numeric_limits<double>::infinity() : best);
            }
            taken[arg] = 1;
            map.pairs.push_back({p, minus[arg], m.nodes[p] - m.nodes[minus[arg]], false});
            map.master_of[p] = minus[arg];
        }
        for (std::size_t k = 0; k < minus.size(); ++k) {
            if (!taken[k]) {
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t p : plus) best = std::min(best, std::abs(m.nodes[p][axis] - m.nodes[minus[k]][axis]));
                throw GeometryError(minus[k], best);
            }
        }
    };
    match(right, left, 1);
    match(top, bottom, 0);

    map.equation.assign(2 * n, kNoIndex);
    std::vector<std::size_t> node_eq(n, kNoIndex);
    for (std::size_t i = 0; i < n; ++i) {
        if (map.master_of[i] == i && i != map.anchor) {
            node_eq[i] = map.n_reduced;
            map.n_reduced += 2;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t e = node_eq[map.master_of[i]];
        if (e == kNoIndex) continue;
        map.equation[2 * i] = e;
        map.equation[2 * i + 1] = e + 1;
    }
    return map;
}

} // namespace fescale::rve
