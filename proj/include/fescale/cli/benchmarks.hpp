#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "../macro/model.hpp"
#include "../macro/settings.hpp"
#include "../material/j2_plasticity.hpp"
#include "../mesh/generators.hpp"

namespace fescale::cli {

/// Macro geometry and loading of a named benchmark plus its default RVE,
/// phases and solver settings. The RVE geometry is attached later so that a
/// configuration can replace it.
struct Benchmark {
    std::string name;
    std::string description;
    mesh::Mesh macro_mesh;
    std::vector<macro::PrescribedDof> prescribed;
    std::vector<macro::NodalLoad> loads;
    std::vector<std::size_t> control_dofs;
    std::string rve;
    std::vector<material::MaterialParams> phases;
    macro::SolverSettings settings;
};

inline std::vector<std::string> benchmark_names() { return {"notched-shear", "notched-bending-2d", "plate-hole-tension"}; }

inline std::vector<std::string> builtin_rve_names() { return {"single-element", "porous-square", "porous-square-tri", "laminate", "composite"}; }

inline mesh::Mesh builtin_rve(const std::string& name)
{
    using mesh::ElementKind;
    if (name == "single-element") return mesh::single_element_rve();
    if (name == "porous-square") return mesh::porous_square_rve(ElementKind::bilinear_quad, 4, 4);
    if (name == "porous-square-tri") return mesh::porous_square_rve(ElementKind::linear_triangle, 4, 2);
    if (name == "laminate") return mesh::laminate_rve(4, ElementKind::bilinear_quad);
    if (name == "composite") return mesh::composite_rve(ElementKind::linear_triangle);
    throw std::invalid_argument("unknown built-in RVE '" + name + "'");
}

namespace detail {

inline std::vector<std::size_t> where(const mesh::Mesh& m, double x0, double x1, double y0, double y1)
{
    constexpr double eps = 1e-9;
    return macro::select_nodes(m, [=](const mesh::Vec2& x) {
        return x.x() >= x0 - eps && x.x() <= x1 + eps && x.y() >= y0 - eps && x.y() <= y1 + eps;
    });
}

inline void fix(Benchmark& b, const std::vector<std::size_t>& dofs, double value)
{
    for (std::size_t d : dofs) b.prescribed.push_back({d, value});
}

inline macro::SolverSettings equivalence_settings(double dt)
{
    macro::SolverSettings s;
    s.tol_macro = 1e-9;
    s.tol_micro = 1e-10;
    s.dt_initial = dt;
    s.dt_max = dt;
    s.dt_min = dt / 64.0;
    return s;
}

} // namespace detail

/// 8x8 triangulated unit plate with a slit from the left edge at mid height;
/// bottom clamped, top edge sheared horizontally.
inline Benchmark notched_shear()
{
    Benchmark b;
    b.name = "notched-shear";
    b.description = "notched plate under shear, porous plastic RVE (triangles)";
    b.macro_mesh = mesh::structured_grid({8, 8, 1.0, 1.0, mesh::Vec2::Zero(), mesh::ElementKind::linear_triangle},
                                         [](std::size_t i, std::size_t j) -> std::optional<std::size_t> {
                                             if (j == 4 && i < 3) return std::nullopt;
                                             return 0;
                                         });
    const auto& m = b.macro_mesh;
    const auto bottom = detail::where(m, 0.0, 1.0, 0.0, 0.0);
    const auto top = detail::where(m, 0.0, 1.0, 1.0, 1.0);
    detail::fix(b, macro::component_dofs(bottom, 0), 0.0);
    detail::fix(b, macro::component_dofs(bottom, 1), 0.0);
    detail::fix(b, macro::component_dofs(top, 0), 0.02);
    detail::fix(b, macro::component_dofs(top, 1), 0.0);
    b.control_dofs = macro::component_dofs(top, 0);
    b.rve = "porous-square-tri";
    b.phases = {material::PlasticParams{{100.0, 0.3}, 1.0, 2.0}};
    b.settings = detail::equivalence_settings(0.1);
    return b;
}

/// 16x4 triangulated beam (4 x 1) with a bottom notch at mid span; simply
/// supported at the lower corners, downward point force at top mid span.
inline Benchmark notched_bending_2d()
{
    Benchmark b;
    b.name = "notched-bending-2d";
    b.description = "notched beam in three-point bending (force driven), composite RVE";
    b.macro_mesh = mesh::structured_grid({16, 4, 4.0, 1.0, mesh::Vec2::Zero(), mesh::ElementKind::linear_triangle},
                                         [](std::size_t i, std::size_t j) -> std::optional<std::size_t> {
                                             if (j == 0 && (i == 7 || i == 8)) return std::nullopt;
                                             return 0;
                                         });
    const auto& m = b.macro_mesh;
    const auto left = detail::where(m, 0.0, 0.0, 0.0, 0.0);
    const auto right = detail::where(m, 4.0, 4.0, 0.0, 0.0);
    const auto load = detail::where(m, 2.0, 2.0, 1.0, 1.0);
    detail::fix(b, macro::component_dofs(left, 0), 0.0);
    detail::fix(b, macro::component_dofs(left, 1), 0.0);
    detail::fix(b, macro::component_dofs(right, 1), 0.0);
    for (std::size_t d : macro::component_dofs(load, 1)) b.loads.push_back({d, -0.12});
    b.control_dofs = macro::component_dofs(load, 1);
    b.rve = "composite";
    b.phases = {material::PlasticParams{{100.0, 0.3}, 1.0, 2.0}, material::ElasticParams{1000.0, 0.2}};
    b.settings = detail::equivalence_settings(0.1);
    return b;
}

/// 2 x 2 plate with a central hole of diameter 1 (O-grid of quads); left
/// edge held in x, right edge pulled in x, left mid-edge node held in y.
inline Benchmark plate_hole_tension()
{
    Benchmark b;
    b.name = "plate-hole-tension";
    b.description = "plate with hole under tension, porous plastic RVE (64 quads)";
    b.macro_mesh = mesh::square_with_hole(2.0, 1.0, 4, 3, mesh::ElementKind::bilinear_quad);
    const auto& m = b.macro_mesh;
    const auto left = detail::where(m, -1.0, -1.0, -1.0, 1.0);
    const auto right = detail::where(m, 1.0, 1.0, -1.0, 1.0);
    const auto pin = detail::where(m, -1.0, -1.0, 0.0, 0.0);
    detail::fix(b, macro::component_dofs(left, 0), 0.0);
    detail::fix(b, macro::component_dofs(pin, 1), 0.0);
    detail::fix(b, macro::component_dofs(right, 0), 0.016);
    b.control_dofs = macro::component_dofs(right, 0);
    b.rve = "porous-square";
    b.phases = {material::PlasticParams{{200.0, 0.3}, 1.2, 1.3}};
    b.settings = detail::equivalence_settings(0.1);
    return b;
}

inline Benchmark make_benchmark(const std::string& name)
{
    if (name == "notched-shear") return notched_shear();
    if (name == "notched-bending-2d") return notched_bending_2d();
    if (name == "plate-hole-tension") return plate_hole_tension();
    throw std::invalid_argument("unknown benchmark '" + name + "'");
}

/// Replaces every plastic phase by its elastic part.
inline std::vector<material::MaterialParams> elastic_only(const std::vector<material::MaterialParams>& phases)
{
    std::vector<material::MaterialParams> out;
    for (const auto& p : phases) out.emplace_back(material::elastic_part(p));
    return out;
}

} // namespace fescale::cli
