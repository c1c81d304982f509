#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "../material/j2_plasticity.hpp"
#include "../mesh/mesh.hpp"
#include "../rve/rve_problem.hpp"
#include "settings.hpp"

namespace fescale::macro {

/// u[dof] = t * value at load factor t.
struct PrescribedDof {
    std::size_t dof = 0;
    double value = 0.0;
};

/// f[dof] = t * value at load factor t.
struct NodalLoad {
    std::size_t dof = 0;
    double value = 0.0;
};

/// Macro problem; every macro integration point carries its own copy of the RVE.
struct TwoScaleModel {
    mesh::Mesh macro_mesh;
    std::vector<PrescribedDof> prescribed;
    std::vector<NodalLoad> loads;
    // The curve reports U at control_dofs[0] and the internal force summed over all of them.
    std::vector<std::size_t> control_dofs;
    std::shared_ptr<const rve::RveGeometry> rve;
    std::vector<material::MaterialParams> phases;
    Scheme scheme = Scheme::staggered;

    void validate() const
    {
        const std::size_t ndof = macro_mesh.num_dofs();
        if (macro_mesh.num_elements() == 0) throw std::invalid_argument("macro mesh has no elements");
        if (!rve) throw std::invalid_argument("no RVE geometry");
        if (phases.empty()) throw std::invalid_argument("no RVE material phases");
        std::vector<char> fixed(ndof, 0);
        for (const auto& p : prescribed) {
            if (p.dof >= ndof) throw std::invalid_argument("prescribed DOF " + std::to_string(p.dof) + " out of range");
            if (fixed[p.dof]) throw std::invalid_argument("DOF " + std::to_string(p.dof) + " prescribed twice");
            fixed[p.dof] = 1;
        }
        for (const auto& l : loads) {
            if (l.dof >= ndof) throw std::invalid_argument("loaded DOF " + std::to_string(l.dof) + " out of range");
            if (fixed[l.dof]) throw std::invalid_argument("DOF " + std::to_string(l.dof) + " is both loaded and prescribed");
        }
        for (std::size_t c : control_dofs) {
            if (c >= ndof) throw std::invalid_argument("control DOF " + std::to_string(c) + " out of range");
        }
    }
};

/// Nodes whose coordinates satisfy `keep`, in ascending order.
inline std::vector<std::size_t> select_nodes(const mesh::Mesh& m, const std::function<bool(const mesh::Vec2&)>& keep)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        if (keep(m.nodes[i])) out.push_back(i);
    }
    return out;
}

inline std::vector<std::size_t> component_dofs(const std::vector<std::size_t>& nodes, int component)
{
    std::vector<std::size_t> out;
    out.reserve(nodes.size());
    for (std::size_t n : nodes) out.push_back(2 * n + static_cast<std::size_t>(component));
    return out;
}

inline void prescribe(TwoScaleModel& model, const std::vector<std::size_t>& dofs, double value)
{
    for (std::size_t d : dofs) model.prescribed.push_back({d, value});
}

} // namespace fescale::macro
