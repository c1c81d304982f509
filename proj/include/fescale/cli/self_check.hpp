#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "../macro/solver.hpp"
#include "../material/j2_plasticity.hpp"
#include "../mesh/generators.hpp"
#include "../rve/rve_problem.hpp"
#include "suite.hpp"

namespace fescale::cli {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline CheckResult check(const std::string& name, double value, double limit)
{
    return {name, value <= limit, "value " + format_number(value) + " (limit " + format_number(limit) + ")"};
}

} // namespace detail

/// Fast invariant checks on small problems; each returns the measured quantity and its limit.
inline std::vector<CheckResult> run_self_checks()
{
    using material::Matrix4;
    using material::Vector4;
    std::vector<CheckResult> out;
    const material::ElasticParams elastic{100.0, 0.3};
    const material::PlasticParams plastic{elastic, 1.0, 2.0};
    const Vector4 load(0.01, 0.0075, 0.0025, -0.005);

    {
        const material::MaterialState virgin;
        const auto c = material::tangent_check(plastic, Vector4(0.03, 0.01, 0.004, -0.02), virgin);
        out.push_back(detail::check("material tangent matches finite differences", c.max_relative_error, 1e-5));
    }
    {
        rve::RveProblem r(rve::make_geometry(mesh::structured_grid({3, 3, 1.0, 1.0})), {elastic});
        r.initialize();
        const auto o = r.solve_staggered(load, 1e-12, 5);
        const Matrix4 c = material::elastic_stiffness(elastic);
        out.push_back(detail::check("homogeneous RVE tangent equals elastic stiffness",
                                    (o.c_tangent - c).cwiseAbs().maxCoeff() / c.cwiseAbs().maxCoeff(), 1e-9));
    }
    {
        rve::RveProblem r(rve::make_geometry(mesh::porous_square_rve(mesh::ElementKind::bilinear_quad, 4, 2)), {plastic});
        r.initialize();
        for (int k = 1; k <= 4; ++k) {
            r.begin_increment();
            r.solve_staggered(0.25 * k * load, 1e-13, 20);
            r.commit();
        }
        const auto& g = r.geometry();
        const auto a = r.assemble(r.H(), r.u_hat(), true);
        out.push_back(detail::check("boundary and volume averaged stress agree",
                                    (a.sigma - a.sigma_volume).norm() / a.sigma.norm(), 1e-10));

        double anti = 0.0;
        for (const auto& pair : g.map.pairs) {
            if (pair.corner) continue;
            const auto fp = a.full_force.segment<2>(static_cast<Eigen::Index>(2 * pair.plus));
            const auto fm = a.full_force.segment<2>(static_cast<Eigen::Index>(2 * pair.minus));
            anti = std::max(anti, (fp + fm).cwiseAbs().maxCoeff());
        }
        out.push_back(detail::check("periodic boundary forces are anti-periodic", anti / a.force_norm, 1e-9));
    }
    {
        rve::RveProblem r(rve::make_geometry(mesh::laminate_rve(4)), {plastic, material::ElasticParams{300.0, 0.2}});
        r.initialize();
        r.solve_staggered(load, 1e-12, 20);
        const auto& g = r.geometry();
        const Eigen::VectorXd full = r.full_displacement(r.H(), r.u_hat());
        Vector4 mean = Vector4::Zero();
        for (std::size_t e = 0; e < g.mesh.num_elements(); ++e) {
            const auto nodes = mesh::element_nodes(g.mesh, e);
            Eigen::VectorXd ue(static_cast<Eigen::Index>(2 * nodes.size()));
            for (std::size_t k = 0; k < nodes.size(); ++k) {
                ue.segment<2>(static_cast<Eigen::Index>(2 * k)) = full.segment<2>(static_cast<Eigen::Index>(2 * nodes[k]));
            }
            for (std::size_t q = g.element_first_point[e]; q < g.element_first_point[e + 1]; ++q) {
                mean += g.points[q].weight * g.points[q].b_operator * ue;
            }
        }
        mean /= g.volume;
        out.push_back(detail::check("volume average of the micro gradient equals H", (mean - load).cwiseAbs().maxCoeff(), 1e-10));
    }
    {
        std::vector<std::size_t> iters[3];
        int s = 0;
        for (auto scheme : {macro::Scheme::staggered, macro::Scheme::monolithic, macro::Scheme::monolithic_stored}) {
            macro::TwoScaleModel m;
            m.macro_mesh = mesh::structured_grid({2, 1, 2.0, 1.0});
            m.rve = rve::make_geometry(mesh::porous_square_rve(mesh::ElementKind::bilinear_quad, 4, 2));
            m.phases = {elastic};
            m.scheme = scheme;
            const auto left = macro::select_nodes(m.macro_mesh, [](const mesh::Vec2& x) { return x.x() < 1e-12; });
            const auto right = macro::select_nodes(m.macro_mesh, [](const mesh::Vec2& x) { return x.x() > 2.0 - 1e-12; });
            macro::prescribe(m, macro::component_dofs(left, 0), 0.0);
            macro::prescribe(m, macro::component_dofs(left, 1), 0.0);
            macro::prescribe(m, macro::component_dofs(right, 1), 0.01);
            macro::SolverSettings set;
            set.tol_macro = set.tol_micro = 1e-10;
            set.dt_initial = set.dt_max = 0.25;
            const auto report = macro::run(m, set);
            for (const auto& rec : report.increments) iters[s].push_back(rec.macro_iters);
            ++s;
        }
        const bool same = iters[0] == iters[1] && iters[0] == iters[2] && !iters[0].empty();
        out.push_back({"elastic schemes take identical macro iterations", same, same ? "identical" : "differ"});
    }
    {
        const macro::SolverSettings s;
        const bool ok = macro::adapt_step({true, 0, 0}, 0.1, s, macro::Scheme::staggered).event == macro::StepEvent::cut &&
                        macro::adapt_step({false, 6, 0}, 0.1, s, macro::Scheme::staggered).event == macro::StepEvent::grow &&
                        macro::adapt_step({false, 7, 0}, 0.1, s, macro::Scheme::staggered).event == macro::StepEvent::hold;
        out.push_back({"step adaptivity follows the half-budget rule", ok, ok ? "cut/grow/hold as expected" : "mismatch"});
    }
    return out;
}

} // namespace fescale::cli
