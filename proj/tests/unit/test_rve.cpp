#include <random>

#include <gtest/gtest.h>

#include <fescale/mesh/generators.hpp>
#include <fescale/rve/periodic_map.hpp>
#include <fescale/rve/rve_problem.hpp>

using namespace fescale;
using material::ElasticParams;
using material::Matrix4;
using material::PlasticParams;
using material::Vector4;
using mesh::ElementKind;
using rve::RveProblem;

namespace {

const PlasticParams kPlastic{{100.0, 0.3}, 1.0, 2.0};
const ElasticParams kElastic{100.0, 0.3};
// well past first yield, small enough for an unstepped Newton solve
const Vector4 kLoad(0.01, 0.0075, 0.0025, -0.005);

RveProblem porous(const material::MaterialParams& p, bool store = true,
                  ElementKind kind = ElementKind::bilinear_quad)
{
    RveProblem r(rve::make_geometry(mesh::porous_square_rve(kind, 4, 4)), {p}, store);
    r.initialize();
    return r;
}

RveProblem homogeneous_grid(const material::MaterialParams& p)
{
    RveProblem r(rve::make_geometry(mesh::structured_grid({3, 3, 1.0, 1.0, mesh::Vec2::Zero(),
                                                            ElementKind::bilinear_quad})),
                 {p});
    r.initialize();
    return r;
}

// monotonic loading in committed increments
rve::HomogenizedOutput load_in_steps(RveProblem& r, const Vector4& H, int steps, double tol)
{
    rve::HomogenizedOutput out;
    for (int k = 1; k <= steps; ++k) {
        r.begin_increment();
        out = r.solve_staggered(H * k / steps, tol, 20);
        if (k < steps) r.commit();
    }
    return out;
}

double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

// Mandel 3x3 form of a gradient-layout stiffness restricted to symmetric strains.
Eigen::Matrix3d mandel(const Matrix4& c)
{
    const double s = 1.0 / std::sqrt(2.0);
    Eigen::Matrix<double, 4, 3> e;
    e << 1, 0, 0, 0, 0, s, 0, 0, s, 0, 1, 0;
    return e.transpose() * c * e;
}

Vector4 sym_probe(double e11, double e22, double e12) { return {e11, e12, e12, e22}; }

const Vector4 kProbes[4] = {sym_probe(1, 0, 0), sym_probe(0, 1, 0), sym_probe(0, 0, 1), sym_probe(1, -0.5, 0.7)};

} // namespace

// ---------------------------------------------------------------- periodic map

TEST(PeriodicMap, TwoByTwoGrid)
{
    const auto m = mesh::structured_grid({2, 2, 1.0, 1.0, mesh::Vec2::Zero(), ElementKind::bilinear_quad});
    const auto map = rve::build_periodic_map(m, 1e-10);
    std::size_t edge_pairs = 0;
    std::size_t corner_pairs = 0;
    for (const auto& p : map.pairs) {
        (p.corner ? corner_pairs : edge_pairs) += 1;
        EXPECT_LE((p.offset - (m.nodes[p.plus] - m.nodes[p.minus])).norm(), 1e-12);
        EXPECT_EQ(p.minus, map.master_of[p.plus]);
    }
    // two edge node pairs (four DOF constraints) and three corners
    EXPECT_EQ(edge_pairs, 2u);
    EXPECT_EQ(corner_pairs, 3u);
    EXPECT_EQ(map.anchor, 0u);
    EXPECT_EQ(map.slave_dofs().size(), 10u);
    EXPECT_EQ(map.master_dofs().size(), 8u);
    EXPECT_EQ(map.n_reduced, 8u - 2u);
    const auto masters = map.master_dofs();
    for (std::size_t d : map.slave_dofs()) EXPECT_EQ(std::count(masters.begin(), masters.end(), d), 0);
}

TEST(PeriodicMap, SingleElement)
{
    const auto map = rve::build_periodic_map(mesh::single_element_rve(), 1e-10);
    ASSERT_EQ(map.pairs.size(), 3u);
    for (const auto& p : map.pairs) {
        EXPECT_TRUE(p.corner);
        EXPECT_EQ(p.minus, map.anchor);
    }
    EXPECT_EQ(map.n_reduced, 0u);
}

TEST(PeriodicMap, MismatchedBoundaryNodeIsReported)
{
    auto m = mesh::structured_grid({2, 2, 1.0, 1.0, mesh::Vec2::Zero(), ElementKind::bilinear_quad});
    m.nodes[5].y() += 0.1; // right edge mid node
    try {
        rve::build_periodic_map(m, 1e-8);
        FAIL() << "expected GeometryError";
    } catch (const rve::GeometryError& e) {
        EXPECT_EQ(e.node(), 5u);
        EXPECT_NEAR(e.nearest_distance(), 0.1, 1e-12);
    }
}

TEST(PeriodicMap, MissingPartnerOnOneSide)
{
    // a left edge with three nodes against a right edge with two
    mesh::Mesh m;
    m.nodes = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0.5}};
    m.blocks.push_back({ElementKind::linear_triangle, 0, {0, 1, 4, 4, 1, 2, 4, 2, 3}});
    EXPECT_THROW(rve::build_periodic_map(m, 1e-8), rve::GeometryError);
}

TEST(PeriodicMap, ReducedResidualLength)
{
    const auto g = rve::make_geometry(mesh::porous_square_rve(ElementKind::linear_triangle, 4, 4));
    EXPECT_EQ(g->num_reduced(), g->map.master_dofs().size() - 2);
}

// ---------------------------------------------------------------- assembly

TEST(Assemble, UnloadedIsZeroWithElasticStiffness)
{
    const auto r = porous(kPlastic);
    const auto a = r.assemble(Vector4::Zero(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r.geometry().num_reduced())));
    EXPECT_EQ(a.residual.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_FALSE(a.any_plastic);
    const auto ae = porous(kElastic).assemble(Vector4::Zero(), Eigen::VectorXd::Zero(a.residual.size()));
    EXPECT_EQ(a.stiffness.to_dense(), ae.stiffness.to_dense());
    const Eigen::MatrixXd k = a.stiffness.to_dense();
    EXPECT_LE(rel_diff(k, k.transpose()), 1e-14);
}

TEST(Assemble, UniformFieldIsSelfEquilibrated)
{
    const auto r = homogeneous_grid(kElastic);
    const Vector4 H(0.01, -0.004, 0.003, 0.02);
    const auto a = r.assemble(H, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r.geometry().num_reduced())));
    EXPECT_LE(a.residual_norm(), 1e-12 * a.force_norm);
}

TEST(Assemble, SensitivityMatchesFiniteDifference)
{
    const auto r = porous(kPlastic);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> u(-0.002, 0.002);
    Eigen::VectorXd w(static_cast<Eigen::Index>(r.geometry().num_reduced()));
    for (auto& v : w) v = u(rng);
    const Vector4 H(0.025, 0.01, 0.004, -0.012);
    const auto a = r.assemble(H, w);
    ASSERT_TRUE(a.any_plastic);
    const double step = 1e-7;
    for (int c = 0; c < 4; ++c) {
        Vector4 hp = H;
        Vector4 hm = H;
        hp[c] += step;
        hm[c] -= step;
        const Eigen::VectorXd fd = (r.assemble(hp, w).residual - r.assemble(hm, w).residual) / (2 * step);
        EXPECT_LE(rel_diff(fd, a.dr_dH.col(c)), 1e-5) << "column " << c;
    }
    // the stiffness is the derivative with respect to the fluctuation
    const Eigen::MatrixXd k = a.stiffness.to_dense();
    for (Eigen::Index j = 0; j < w.size(); j += 7) {
        Eigen::VectorXd wp = w;
        Eigen::VectorXd wm = w;
        wp[j] += step;
        wm[j] -= step;
        const Eigen::VectorXd fd = (r.assemble(H, wp).residual - r.assemble(H, wm).residual) / (2 * step);
        EXPECT_LE((fd - k.col(j)).cwiseAbs().maxCoeff() / k.cwiseAbs().maxCoeff(), 1e-5);
    }
}

TEST(Assemble, AveragedGradientEqualsApplied)
{
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (auto m : {mesh::laminate_rve(4), mesh::structured_grid({5, 4, 2.0, 1.5, mesh::Vec2(0.3, -1),
                                                                  ElementKind::linear_triangle})}) {
        const auto g = rve::make_geometry(m);
        RveProblem r(g, {kElastic, ElasticParams{300.0, 0.2}});
        Eigen::VectorXd w(static_cast<Eigen::Index>(g->num_reduced()));
        for (auto& v : w) v = u(rng);
        const Vector4 H(u(rng), u(rng), u(rng), u(rng));
        const Eigen::VectorXd full = r.full_displacement(H, w);
        Vector4 avg = Vector4::Zero();
        for (const auto& ip : g->points) {
            const auto nodes = mesh::element_nodes(g->mesh, ip.element);
            Eigen::VectorXd ue(static_cast<Eigen::Index>(2 * nodes.size()));
            for (std::size_t k = 0; k < nodes.size(); ++k) {
                ue.segment<2>(static_cast<Eigen::Index>(2 * k)) = full.segment<2>(static_cast<Eigen::Index>(2 * nodes[k]));
            }
            avg += ip.weight * ip.b_operator * ue;
        }
        avg /= g->volume;
        EXPECT_LE((avg - H).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, H.cwiseAbs().maxCoeff()));
    }
}

TEST(Assemble, ZeroLoadGivesZeroStress)
{
    const auto r = porous(kPlastic);
    EXPECT_EQ(r.output().sigma_bar, Vector4::Zero());
    EXPECT_EQ(r.output().sigma_alg, Vector4::Zero());
}

// ---------------------------------------------------------------- homogenization

TEST(Homogenize, HomogeneousElasticIdentity)
{
    auto r = homogeneous_grid(kElastic);
    const Vector4 H(0.01, -0.004, 0.003, 0.02);
    const auto out = r.solve_staggered(H, 1e-10, 5);
    const Matrix4 c = material::elastic_stiffness(kElastic);
    EXPECT_LE(rel_diff(out.sigma_bar, c * H), 1e-10);
    EXPECT_LE(rel_diff(out.c_tangent, c), 1e-9);
}

TEST(Homogenize, LaminateMatchesClosedForms)
{
    const ElasticParams soft{100.0, 0.3};
    const ElasticParams stiff{400.0, 0.2};
    for (auto kind : {ElementKind::bilinear_quad, ElementKind::linear_triangle}) {
        RveProblem r(rve::make_geometry(mesh::laminate_rve(4, kind)), {soft, stiff});
        r.initialize();
        const auto avg = [&](auto f) { return 0.5 * (f(soft) + f(stiff)); };
        const auto m = [](const ElasticParams& p) { return p.lame_lambda() + 2 * p.shear_modulus(); };
        const double inv_m = avg([&](const ElasticParams& p) { return 1.0 / m(p); });
        const double lam_m = avg([&](const ElasticParams& p) { return p.lame_lambda() / m(p); });
        const double lam2_m = avg([&](const ElasticParams& p) { return p.lame_lambda() * p.lame_lambda() / m(p); });
        const double mean_m = avg(m);
        const double inv_g = avg([](const ElasticParams& p) { return 1.0 / p.shear_modulus(); });

        const double e11 = 0.004, e22 = -0.002, e12 = 0.003;
        const Vector4 H(e11, e12 + 0.001, e12 - 0.001, e22); // skew part must not matter
        const auto out = r.solve_staggered(H, 1e-12, 5);
        const double s11 = (e11 + e22 * lam_m) / inv_m;
        const double s22 = lam_m * s11 - e22 * lam2_m + e22 * mean_m;
        const double s12 = 2 * e12 / inv_g;
        EXPECT_LE(rel_diff(out.sigma_bar, Vector4(s11, s12, s12, s22)), 1e-8);

        // transverse uniaxial strain: series (Reuss-type) combination of M
        const auto uni = r.solve_staggered(Vector4(e11, 0, 0, 0), 1e-12, 5);
        EXPECT_NEAR(uni.sigma_bar[0], e11 / inv_m, 1e-8 * e11 / inv_m);

        // tangent: same closed forms per unit probe
        Matrix4 c_exact = Matrix4::Zero();
        c_exact(0, 0) = 1.0 / inv_m;
        c_exact(0, 3) = c_exact(3, 0) = lam_m / inv_m;
        c_exact(3, 3) = lam_m * lam_m / inv_m - lam2_m + mean_m;
        c_exact.block<2, 2>(1, 1).setConstant(1.0 / inv_g);
        EXPECT_LE(rel_diff(uni.c_tangent, c_exact), 1e-8);

        // Reuss <= C_t <= Voigt on probe directions
        const Matrix4 cv = 0.5 * (material::elastic_stiffness(soft) + material::elastic_stiffness(stiff));
        const Eigen::Matrix3d reuss = (0.5 * (mandel(material::elastic_stiffness(soft)).inverse() +
                                              mandel(material::elastic_stiffness(stiff)).inverse())).inverse();
        const Eigen::Matrix3d ct = mandel(uni.c_tangent);
        for (const auto& p : kProbes) {
            const Eigen::Vector3d v(p[0], p[3], std::sqrt(2.0) * p[1]);
            EXPECT_LE(v.dot(reuss * v), v.dot(ct * v) * (1 + 1e-12));
            EXPECT_LE(p.dot(uni.c_tangent * p), p.dot(cv * p) * (1 + 1e-12));
        }
    }
}

TEST(Homogenize, PorousElasticWithinBounds)
{
    auto r = porous(kElastic, true, ElementKind::linear_triangle);
    double solid = 0.0;
    for (const auto& ip : r.geometry().points) solid += ip.weight;
    const auto out = r.solve_staggered(sym_probe(0.001, 0.0, 0.0), 1e-12, 5);
    const Matrix4 c = material::elastic_stiffness(kElastic);
    for (const auto& p : kProbes) {
        const double q = p.dot(out.c_tangent * p);
        EXPECT_GT(q, 0.0);
        EXPECT_LE(q, solid * p.dot(c * p));
    }
}

TEST(Homogenize, BoundaryRouteEqualsVolumeAverageAtEquilibrium)
{
    for (auto kind : {ElementKind::bilinear_quad, ElementKind::linear_triangle}) {
        auto r = porous(kPlastic, true, kind);
        const auto out = load_in_steps(r, kLoad, 4, 1e-13);
        ASSERT_TRUE(out.plastic);
        const auto& a = r.last_assembly();
        EXPECT_LE(rel_diff(a.sigma, a.sigma_volume), 1e-10);
    }
}

TEST(Homogenize, AntiPeriodicBoundaryForces)
{
    auto r = porous(kPlastic);
    r.solve_staggered(kLoad, 1e-13, 20);
    const auto& a = r.last_assembly();
    const double fmax = a.full_force.cwiseAbs().maxCoeff();
    Eigen::Vector2d corner_sum = a.full_force.segment<2>(static_cast<Eigen::Index>(2 * r.geometry().map.anchor));
    for (const auto& p : r.geometry().map.pairs) {
        const Eigen::Vector2d fp = a.full_force.segment<2>(static_cast<Eigen::Index>(2 * p.plus));
        const Eigen::Vector2d fm = a.full_force.segment<2>(static_cast<Eigen::Index>(2 * p.minus));
        if (p.corner) {
            corner_sum += fp;
        } else {
            EXPECT_LE((fp + fm).cwiseAbs().maxCoeff(), 1e-9 * fmax);
            EXPECT_GT(fp.norm(), 0.0);
        }
    }
    EXPECT_LE(corner_sum.cwiseAbs().maxCoeff(), 1e-9 * fmax);
}

TEST(Homogenize, HillMandel)
{
    auto r = porous(kPlastic);
    r.solve_staggered(kLoad, 1e-13, 20);
    const auto& g = r.geometry();
    const auto& a = r.last_assembly();
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        const Vector4 dH(u(rng), u(rng), u(rng), u(rng));
        Eigen::VectorXd dw(static_cast<Eigen::Index>(g.num_reduced()));
        for (auto& v : dw) v = u(rng);
        const Eigen::VectorXd du = r.full_displacement(dH, dw);
        // recompute stresses at the converged state
        const Eigen::VectorXd full = r.full_displacement(r.H(), r.u_hat());
        double work = 0.0;
        for (std::size_t q = 0; q < g.points.size(); ++q) {
            const auto& ip = g.points[q];
            const auto nodes = mesh::element_nodes(g.mesh, ip.element);
            Eigen::VectorXd ue(static_cast<Eigen::Index>(2 * nodes.size()));
            Eigen::VectorXd due(ue.size());
            for (std::size_t k = 0; k < nodes.size(); ++k) {
                const auto s = static_cast<Eigen::Index>(2 * nodes[k]);
                ue.segment<2>(static_cast<Eigen::Index>(2 * k)) = full.segment<2>(s);
                due.segment<2>(static_cast<Eigen::Index>(2 * k)) = du.segment<2>(s);
            }
            const auto res = material::evaluate(kPlastic, ip.b_operator * ue, r.committed_states()[q]);
            work += ip.weight * res.sigma.dot(ip.b_operator * due);
        }
        work /= g.volume;
        const double macro = a.sigma.dot(dH);
        EXPECT_LE(std::abs(work - macro), 1e-9 * a.sigma.norm() * dH.norm());
    }
}

TEST(Homogenize, RoutesGiveIdenticalTangentAndAlgorithmicStress)
{
    auto r = porous(kPlastic);
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> u(-0.003, 0.003);
    Eigen::VectorXd w(static_cast<Eigen::Index>(r.geometry().num_reduced()));
    for (auto& v : w) v = u(rng);
    const auto a = r.assemble(Vector4(0.02, 0.01, 0.0, -0.015), w, true);
    ASSERT_TRUE(a.any_plastic);
    ASSERT_GT(a.residual_norm(), 1e-3 * a.force_norm);
    const auto symbolic = r.geometry().symbolic;
    const linalg::Factorization f(a.stiffness, symbolic);
    const auto [cb, sb] = RveProblem::condense(a, &f, true, a.dsigma_du, a.dsigma_dH, a.sigma);
    const auto [cv, sv] = RveProblem::condense(a, &f, true, a.dsigma_du_volume, a.dsigma_dH_volume, a.sigma_volume);
    EXPECT_LE(rel_diff(cb, cv), 1e-10);
    EXPECT_LE(rel_diff(sb, sv), 1e-10);
    EXPECT_GT(rel_diff(a.sigma, a.sigma_volume), 1e-6); // the raw stresses differ away from equilibrium
}

TEST(Homogenize, AlgorithmicStressEqualsStressForZeroResidual)
{
    auto r = porous(kPlastic);
    r.solve_staggered(kLoad, 1e-10, 20);
    rve::Assembly a = r.last_assembly();
    a.residual.setZero();
    const linalg::Factorization f(a.stiffness, r.geometry().symbolic);
    const auto [c, s] = RveProblem::condense(a, &f, true, a.dsigma_du, a.dsigma_dH, a.sigma);
    EXPECT_EQ(s, a.sigma);
}

// ---------------------------------------------------------------- staggered micro solve

TEST(Staggered, ElasticConvergesInOneIteration)
{
    auto r = porous(kElastic);
    const auto out = r.solve_staggered(Vector4(0.01, 0.004, -0.002, 0.006), 1e-10, 12);
    EXPECT_EQ(out.micro_iterations, 1u);
    EXPECT_LE(out.residual_norm, 1e-10 * out.reference);
}

TEST(Staggered, PlasticConvergesWithSymmetricTangent)
{
    auto r = porous(kPlastic, true, ElementKind::linear_triangle);
    const auto out = r.solve_staggered(Vector4(0.02, 0.012, 0.012, -0.01), 5e-3, 12);
    EXPECT_TRUE(out.plastic);
    EXPECT_LE(out.residual_norm, 5e-3 * out.reference);
    EXPECT_GE(out.micro_iterations, 2u);
    EXPECT_LE(rel_diff(out.c_tangent.transpose(), out.c_tangent), 1e-8);
}

TEST(Staggered, IterationBudgetExhaustedSignalsDivergence)
{
    auto r = porous(kPlastic);
    EXPECT_THROW(r.solve_staggered(Vector4(0.02, 0.012, 0.012, -0.01), 1e-10, 1), rve::MicroDivergence);
}

TEST(Staggered, TangentMatchesFiniteDifferences)
{
    struct Case {
        material::MaterialParams params;
        Vector4 H;
    };
    const Case cases[] = {{kElastic, Vector4(0.01, 0.004, -0.002, 0.006)},
                          {kPlastic, Vector4(0.012, 0.008, 0.004, -0.006)}};
    for (const auto& c : cases) {
        auto r = porous(c.params);
        const auto out = r.solve_staggered(c.H, 1e-13, 30);
        const double step = 1e-6;
        Matrix4 fd;
        for (int k = 0; k < 4; ++k) {
            RveProblem rp = r;
            RveProblem rm = r;
            Vector4 hp = c.H;
            Vector4 hm = c.H;
            hp[k] += step;
            hm[k] -= step;
            const auto op = rp.solve_staggered(hp, 1e-13, 30);
            const auto om = rm.solve_staggered(hm, 1e-13, 30);
            ASSERT_EQ(rp.last_assembly().plastic_flags, r.last_assembly().plastic_flags);
            fd.col(k) = (op.sigma_bar - om.sigma_bar) / (2 * step);
        }
        EXPECT_LE(rel_diff(fd, out.c_tangent), 1e-4);
    }
}

// ---------------------------------------------------------------- monolithic update

TEST(Monolithic, ZeroResidualZeroIncrementLeavesDisplacement)
{
    auto r = porous(kPlastic);
    const Eigen::VectorXd before = r.u_hat();
    r.update_monolithic(Vector4::Zero());
    EXPECT_EQ(r.u_hat(), before);
}

TEST(Monolithic, ElasticUpdateReachesEquilibrium)
{
    auto r = porous(kElastic);
    r.begin_increment();
    r.update_monolithic(Vector4(0.01, 0.004, -0.002, 0.006));
    const auto out = r.refresh();
    EXPECT_LE(out.residual_norm, 1e-10 * out.reference);
    EXPECT_EQ(out.factorizations, 0u); // elastic system reused
}

TEST(Monolithic, AgreesWithStaggeredAtEquilibrium)
{
    const Vector4 H = kLoad;
    auto s = porous(kPlastic);
    auto m = porous(kPlastic);
    const auto so = s.solve_staggered(H, 1e-12, 30);
    m.begin_increment();
    m.update_monolithic(H);
    auto mo = m.refresh();
    for (int it = 0; it < 30 && !mo.converged(1e-12); ++it) {
        m.update_monolithic(H);
        mo = m.refresh();
    }
    ASSERT_TRUE(mo.converged(1e-12));
    EXPECT_LE(rel_diff(mo.sigma_bar, so.sigma_bar), 1e-8);
    EXPECT_LE(rel_diff(mo.sigma_alg, so.sigma_bar), 1e-8);
    EXPECT_LE(rel_diff(mo.c_tangent, so.c_tangent), 1e-6);
}

TEST(Monolithic, StoredAndPlainModesAreIdentical)
{
    auto stored = porous(kPlastic, true);
    auto plain = porous(kPlastic, false);
    const Vector4 path[] = {Vector4(0.01, 0.005, 0, 0), Vector4(0.02, 0.012, 0.004, -0.01),
                            Vector4(0.021, 0.012, 0.004, -0.011), Vector4(0.021, 0.012, 0.004, -0.011)};
    for (const auto& H : path) {
        const auto fs0 = stored.counters().factorizations;
        const auto fp0 = plain.counters().factorizations;
        stored.update_monolithic(H);
        plain.update_monolithic(H);
        const auto os = stored.refresh();
        const auto op = plain.refresh();
        EXPECT_EQ(stored.u_hat(), plain.u_hat());
        EXPECT_EQ(os.sigma_alg, op.sigma_alg);
        EXPECT_EQ(os.c_tangent, op.c_tangent);
        const auto ds = stored.counters().factorizations - fs0;
        const auto dp = plain.counters().factorizations - fp0;
        EXPECT_EQ(ds, os.linear_step ? 0u : 1u);
        EXPECT_GE(dp, ds);
        EXPECT_LE(dp, 2u);
    }
}

TEST(Monolithic, RollbackRestoresCommittedSystem)
{
    auto r = porous(kPlastic);
    r.update_monolithic(Vector4(0.02, 0.01, 0, 0));
    r.refresh();
    r.commit();
    const Eigen::VectorXd u_c = r.u_hat();
    auto copy = r;
    r.update_monolithic(Vector4(0.04, 0.01, 0.01, 0));
    r.refresh();
    r.rollback();
    EXPECT_EQ(r.u_hat(), u_c);
    r.update_monolithic(Vector4(0.03, 0.01, 0, 0));
    copy.update_monolithic(Vector4(0.03, 0.01, 0, 0));
    EXPECT_EQ(r.u_hat(), copy.u_hat());
}
