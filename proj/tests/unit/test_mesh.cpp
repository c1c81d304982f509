#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include <fescale/mesh/generators.hpp>
#include <fescale/mesh/mesh.hpp>

using namespace fescale::mesh;

namespace {

Mesh unit_triangle()
{
    Mesh m;
    m.nodes = {{0, 0}, {1, 0}, {0, 1}};
    m.blocks.push_back({ElementKind::linear_triangle, 0, {0, 1, 2}});
    return m;
}

Eigen::VectorXd element_values(const Mesh& mesh, std::size_t element, const Eigen::VectorXd& u)
{
    const auto nodes = element_nodes(mesh, element);
    Eigen::VectorXd ue(static_cast<Eigen::Index>(2 * nodes.size()));
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        ue[static_cast<Eigen::Index>(2 * a)] = u[static_cast<Eigen::Index>(2 * nodes[a])];
        ue[static_cast<Eigen::Index>(2 * a + 1)] = u[static_cast<Eigen::Index>(2 * nodes[a] + 1)];
    }
    return ue;
}

double polygon_area(const std::vector<Vec2>& poly)
{
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * std::abs(a);
}

} // namespace

TEST(IntegrationPoints, UnitRightTriangle)
{
    const auto pts = build_integration_points(unit_triangle());
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_DOUBLE_EQ(pts[0].weight, 0.5);
    const auto& b = pts[0].b_operator;
    // dN1/dx = -1, dN1/dy = -1, dN2/dx = 1, dN3/dy = 1
    EXPECT_DOUBLE_EQ(b(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(b(1, 0), -1.0);
    EXPECT_DOUBLE_EQ(b(2, 1), -1.0);
    EXPECT_DOUBLE_EQ(b(3, 1), -1.0);
    EXPECT_DOUBLE_EQ(b(0, 2), 1.0);
    EXPECT_DOUBLE_EQ(b(1, 2), 0.0);
    EXPECT_DOUBLE_EQ(b(1, 4), 1.0);
    EXPECT_DOUBLE_EQ(b(3, 5), 1.0);
    EXPECT_NEAR(pts[0].coordinates.x(), 1.0 / 3.0, 1e-15);
}

TEST(IntegrationPoints, UnitSquareQuad)
{
    const auto pts = build_integration_points(single_element_rve());
    ASSERT_EQ(pts.size(), 4u);
    for (const auto& p : pts) EXPECT_NEAR(p.weight, 0.25, 1e-15);
}

TEST(IntegrationPoints, RigidTranslationHasZeroGradient)
{
    const Mesh mesh = porous_square_rve(ElementKind::bilinear_quad, 3, 2);
    Eigen::VectorXd u(static_cast<Eigen::Index>(mesh.num_dofs()));
    for (std::size_t n = 0; n < mesh.num_nodes(); ++n) {
        u[static_cast<Eigen::Index>(2 * n)] = 0.3;
        u[static_cast<Eigen::Index>(2 * n + 1)] = -1.7;
    }
    for (const auto& p : build_integration_points(mesh)) {
        EXPECT_LE((p.b_operator * element_values(mesh, p.element, u)).cwiseAbs().maxCoeff(), 1e-13);
    }
}

// Patch-test precondition: linear fields are reproduced exactly at every point.
TEST(IntegrationPoints, LinearFieldGradientIsExact)
{
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto kind : {ElementKind::linear_triangle, ElementKind::bilinear_quad}) {
        const Mesh mesh = porous_square_rve(kind, 4, 3);
        for (int trial = 0; trial < 5; ++trial) {
            Eigen::Matrix2d g;
            g << dist(rng), dist(rng), dist(rng), dist(rng);
            Eigen::VectorXd u(static_cast<Eigen::Index>(mesh.num_dofs()));
            for (std::size_t n = 0; n < mesh.num_nodes(); ++n) {
                u.segment<2>(static_cast<Eigen::Index>(2 * n)) = g * mesh.nodes[n];
            }
            const Eigen::Vector4d expected(g(0, 0), g(0, 1), g(1, 0), g(1, 1));
            for (const auto& p : build_integration_points(mesh)) {
                const Eigen::Vector4d h = p.b_operator * element_values(mesh, p.element, u);
                EXPECT_LE((h - expected).cwiseAbs().maxCoeff(), 1e-12);
            }
        }
    }
}

TEST(IntegrationPoints, WeightsSumToArea)
{
    for (auto kind : {ElementKind::linear_triangle, ElementKind::bilinear_quad}) {
        const Mesh mesh = porous_square_rve(kind, 4, 3, 0.5);
        // the pore is the polygon through the inner ring, which the generator
        // stores first (4 * cells_per_side nodes)
        const std::vector<Vec2> pore(mesh.nodes.begin(), mesh.nodes.begin() + 16);
        const double expected = 1.0 - polygon_area(pore);
        double sum = 0.0;
        for (const auto& p : build_integration_points(mesh)) sum += p.weight;
        EXPECT_NEAR(sum, expected, 1e-12 * expected);
    }
    Mesh grid = structured_grid({5, 3, 2.0, 0.75, Vec2(1, 1), ElementKind::linear_triangle});
    double sum = 0.0;
    for (const auto& p : build_integration_points(grid)) sum += p.weight;
    EXPECT_NEAR(sum, 1.5, 1.5e-12);
}

TEST(IntegrationPoints, ElementWeightsEqualElementArea)
{
    const Mesh mesh = porous_square_rve(ElementKind::bilinear_quad, 4, 3);
    const auto pts = build_integration_points(mesh);
    std::vector<double> per_element(mesh.num_elements(), 0.0);
    for (const auto& p : pts) per_element[p.element] += p.weight;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        std::vector<Vec2> poly;
        for (std::size_t n : element_nodes(mesh, e)) poly.push_back(mesh.nodes[n]);
        EXPECT_NEAR(per_element[e], polygon_area(poly), 1e-12 * polygon_area(poly));
    }
}

TEST(IntegrationPoints, InvertedElementNamesElement)
{
    Mesh m = structured_grid({2, 1, 2.0, 1.0, Vec2::Zero(), ElementKind::linear_triangle});
    auto& conn = m.blocks[0].connectivity;
    std::swap(conn[10], conn[11]); // reverse the fourth triangle
    try {
        build_integration_points(m);
        FAIL() << "expected MeshQualityError";
    } catch (const MeshQualityError& e) {
        EXPECT_EQ(e.element(), 3u);
    }
}

TEST(IntegrationPoints, RejectsOutOfRangeConnectivity)
{
    Mesh m = unit_triangle();
    m.blocks[0].connectivity[2] = 7;
    EXPECT_THROW(build_integration_points(m), MeshError);
}

TEST(StiffnessStructure, SingleTriangleIsDense)
{
    const Mesh m = unit_triangle();
    std::vector<std::size_t> map{0, 1, 2, 3, 4, 5};
    const auto p = structure_of_stiffness(m, map, 6);
    EXPECT_EQ(p.nonzeros(), 36u);
}

TEST(StiffnessStructure, TwoTrianglesLeaveOppositeNodesUncoupled)
{
    Mesh m;
    m.nodes = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    m.blocks.push_back({ElementKind::linear_triangle, 0, {0, 1, 2, 0, 2, 3}});
    std::vector<std::size_t> map(8);
    std::iota(map.begin(), map.end(), std::size_t{0});
    const auto p = structure_of_stiffness(m, map, 8);
    for (std::size_t a : {2u, 3u}) {
        for (std::size_t b : {6u, 7u}) {
            EXPECT_FALSE(p.contains(a, b));
            EXPECT_FALSE(p.contains(b, a));
        }
    }
    EXPECT_TRUE(p.contains(0, 4));
    EXPECT_TRUE(p.is_symmetric());
}

TEST(StiffnessStructure, GridEqualsUnionOfElementCliques)
{
    const Mesh m = structured_grid({4, 4, 1.0, 1.0, Vec2::Zero(), ElementKind::bilinear_quad});
    const std::size_t n = m.num_dofs();
    std::vector<std::size_t> map(n);
    std::iota(map.begin(), map.end(), std::size_t{0});
    const auto p = structure_of_stiffness(m, map, n);

    std::vector<std::vector<char>> brute(n, std::vector<char>(n, 0));
    for (std::size_t i = 0; i < n; ++i) brute[i][i] = 1;
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
        const auto nodes = element_nodes(m, e);
        for (std::size_t a : nodes) {
            for (std::size_t b : nodes) {
                for (int ca = 0; ca < 2; ++ca) {
                    for (int cb = 0; cb < 2; ++cb) brute[2 * a + ca][2 * b + cb] = 1;
                }
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(p.contains(i, j), brute[i][j] != 0);
    }
}

TEST(StiffnessStructure, MergedDofsShareEquations)
{
    // two nodes mapped onto the same equations (periodic-style merge)
    const Mesh m = structured_grid({2, 1, 2.0, 1.0, Vec2::Zero(), ElementKind::bilinear_quad});
    // nodes: 0 1 2 / 3 4 5; merge column x=2 onto column x=0, drop node 0 and 2
    std::vector<std::size_t> node_eq{kNoIndex, 0, kNoIndex, 1, 2, 1};
    std::vector<std::size_t> map;
    for (std::size_t e : node_eq) {
        map.push_back(e == kNoIndex ? kNoIndex : 2 * e);
        map.push_back(e == kNoIndex ? kNoIndex : 2 * e + 1);
    }
    const auto p = structure_of_stiffness(m, map, 6);
    EXPECT_TRUE(p.is_symmetric());
    EXPECT_EQ(p.nonzeros(), 36u);
}

TEST(Generators, PorousRveHasMatchingOppositeBoundaries)
{
    const Mesh m = porous_square_rve(ElementKind::linear_triangle, 4, 4);
    std::multiset<long> left, right, bottom, top;
    const auto key = [](double v) { return std::lround(v * 1e9); };
    for (const auto& x : m.nodes) {
        if (std::abs(x.x()) < 1e-12) left.insert(key(x.y()));
        if (std::abs(x.x() - 1.0) < 1e-12) right.insert(key(x.y()));
        if (std::abs(x.y()) < 1e-12) bottom.insert(key(x.x()));
        if (std::abs(x.y() - 1.0) < 1e-12) top.insert(key(x.x()));
    }
    EXPECT_EQ(left, right);
    EXPECT_EQ(bottom, top);
    EXPECT_EQ(left.size(), 5u);
    EXPECT_EQ(m.num_elements(), 2u * 64u);
}

TEST(Generators, QuadPorousRveMatchesSixtyFourElements)
{
    EXPECT_EQ(porous_square_rve(ElementKind::bilinear_quad, 4, 4).num_elements(), 64u);
}

TEST(Generators, CompactDropsRemovedCellNodes)
{
    const Mesh m = composite_rve();
    const auto used = m.referenced_nodes();
    EXPECT_TRUE(std::all_of(used.begin(), used.end(), [](char c) { return c != 0; }));
    EXPECT_EQ(m.blocks.size(), 2u);
    EXPECT_NO_THROW(build_integration_points(m));
}
