#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "../linalg/sparse_matrix.hpp"

namespace fescale::mesh {

using Vec2 = Eigen::Vector2d;
using linalg::kNoIndex;

enum class ElementKind { linear_triangle, bilinear_quad };

constexpr std::size_t nodes_per_element(ElementKind kind)
{
    return kind == ElementKind::linear_triangle ? 3 : 4;
}

constexpr std::size_t points_per_element(ElementKind kind)
{
    return kind == ElementKind::linear_triangle ? 1 : 4;
}

class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an element maps to a non-positive Jacobian.
class MeshQualityError : public MeshError {
public:
    explicit MeshQualityError(std::size_t element)
        : MeshError("element " + std::to_string(element) +
                    " has a non-positive Jacobian determinant"),
          element_(element)
    {
    }
    std::size_t element() const noexcept { return element_; }

private:
    std::size_t element_;
};

/// Elements of one kind and one material phase; connectivity is flat with
/// nodes_per_element(kind) entries per element, counter-clockwise.
struct ElementBlock {
    ElementKind kind = ElementKind::linear_triangle;
    std::size_t phase = 0;
    std::vector<std::size_t> connectivity;

    std::size_t size() const { return connectivity.size() / nodes_per_element(kind); }

    std::span<const std::size_t> element(std::size_t e) const
    {
        const std::size_t npe = nodes_per_element(kind);
        return std::span<const std::size_t>(connectivity).subspan(e * npe, npe);
    }
};

struct Mesh {
    std::vector<Vec2> nodes;
    std::vector<ElementBlock> blocks;

    std::size_t num_nodes() const { return nodes.size(); }
    std::size_t num_dofs() const { return 2 * nodes.size(); }

    std::size_t num_elements() const
    {
        std::size_t n = 0;
        for (const auto& b : blocks) n += b.size();
        return n;
    }

    /// Lower-left and upper-right corners of the node bounding box.
    std::pair<Vec2, Vec2> bounds() const
    {
        Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
        Vec2 hi = -lo;
        for (const auto& x : nodes) {
            lo = lo.cwiseMin(x);
            hi = hi.cwiseMax(x);
        }
        return {lo, hi};
    }

    /// Throws unless every connectivity index refers to an existing node.
    void validate() const
    {
        for (const auto& b : blocks) {
            if (b.connectivity.size() % nodes_per_element(b.kind) != 0) {
                throw MeshError("element block connectivity has a partial element");
            }
            for (std::size_t n : b.connectivity) {
                if (n >= nodes.size()) {
                    throw MeshError("connectivity index " + std::to_string(n) + " exceeds node count");
                }
            }
        }
    }

    std::vector<char> referenced_nodes() const
    {
        std::vector<char> used(nodes.size(), 0);
        for (const auto& b : blocks) {
            for (std::size_t n : b.connectivity) used[n] = 1;
        }
        return used;
    }
};

/// Maps the element's nodal displacements (node-major: u_x, u_y per node) to the
/// displacement gradient in the order (H11, H12, H21, H22), H_ij = du_i/dX_j.
using GradientOperator = Eigen::Matrix<double, 4, Eigen::Dynamic, 0, 4, 8>;

struct IntegrationPoint {
    std::size_t element = 0; // global element id (blocks concatenated)
    std::size_t block = 0;
    std::size_t local = 0; // quadrature point within the element
    double weight = 0.0;   // quadrature weight times Jacobian determinant
    GradientOperator b_operator;
    Vec2 coordinates = Vec2::Zero();
};

namespace detail {

struct ShapeDerivatives {
    Eigen::Matrix<double, 4, 1> n;            // values (first npe entries used)
    Eigen::Matrix<double, 4, 2> dn_dxi;       // reference derivatives
};

inline ShapeDerivatives shape(ElementKind kind, double xi, double eta)
{
    ShapeDerivatives s;
    s.n.setZero();
    s.dn_dxi.setZero();
    if (kind == ElementKind::linear_triangle) {
        s.n.head<3>() << 1.0 - xi - eta, xi, eta;
        s.dn_dxi.topRows<3>() << -1.0, -1.0, 1.0, 0.0, 0.0, 1.0;
    } else {
        s.n << 0.25 * (1 - xi) * (1 - eta), 0.25 * (1 + xi) * (1 - eta),
            0.25 * (1 + xi) * (1 + eta), 0.25 * (1 - xi) * (1 + eta);
        s.dn_dxi << -0.25 * (1 - eta), -0.25 * (1 - xi), 0.25 * (1 - eta), -0.25 * (1 + xi),
            0.25 * (1 + eta), 0.25 * (1 + xi), -0.25 * (1 + eta), 0.25 * (1 - xi);
    }
    return s;
}

struct QuadraturePoint {
    double xi, eta, weight;
};

inline std::vector<QuadraturePoint> quadrature(ElementKind kind)
{
    if (kind == ElementKind::linear_triangle) return {{1.0 / 3.0, 1.0 / 3.0, 0.5}};
    const double g = 1.0 / std::sqrt(3.0);
    return {{-g, -g, 1.0}, {g, -g, 1.0}, {g, g, 1.0}, {-g, g, 1.0}};
}

} // namespace detail

/// One entry per (element, quadrature point), in element order.
inline std::vector<IntegrationPoint> build_integration_points(const Mesh& mesh)
{
    mesh.validate();
    std::vector<IntegrationPoint> points;
    points.reserve(4 * mesh.num_elements());
    std::size_t element_id = 0;
    for (std::size_t bi = 0; bi < mesh.blocks.size(); ++bi) {
        const ElementBlock& block = mesh.blocks[bi];
        const std::size_t npe = nodes_per_element(block.kind);
        const auto rule = detail::quadrature(block.kind);
        for (std::size_t e = 0; e < block.size(); ++e, ++element_id) {
            const auto conn = block.element(e);
            Eigen::Matrix<double, 2, Eigen::Dynamic, 0, 2, 4> xe(2, npe);
            for (std::size_t a = 0; a < npe; ++a) xe.col(static_cast<Eigen::Index>(a)) = mesh.nodes[conn[a]];
            for (std::size_t q = 0; q < rule.size(); ++q) {
                const auto s = detail::shape(block.kind, rule[q].xi, rule[q].eta);
                const auto dn = s.dn_dxi.topRows(static_cast<Eigen::Index>(npe));
                const Eigen::Matrix2d jac = xe * dn; // jac(i,j) = dx_i / dxi_j
                const double det = jac.determinant();
                if (!(det > 0.0)) throw MeshQualityError(element_id);
                const Eigen::Matrix<double, Eigen::Dynamic, 2, 0, 4, 2> dn_dx = dn * jac.inverse();

                IntegrationPoint ip;
                ip.element = element_id;
                ip.block = bi;
                ip.local = q;
                ip.weight = rule[q].weight * det;
                ip.coordinates = xe * s.n.head(static_cast<Eigen::Index>(npe));
                ip.b_operator = GradientOperator::Zero(4, static_cast<Eigen::Index>(2 * npe));
                for (std::size_t a = 0; a < npe; ++a) {
                    const auto ia = static_cast<Eigen::Index>(a);
                    ip.b_operator(0, 2 * ia) = dn_dx(ia, 0);
                    ip.b_operator(1, 2 * ia) = dn_dx(ia, 1);
                    ip.b_operator(2, 2 * ia + 1) = dn_dx(ia, 0);
                    ip.b_operator(3, 2 * ia + 1) = dn_dx(ia, 1);
                }
                points.push_back(std::move(ip));
            }
        }
    }
    return points;
}

/// Node ids of a global element id.
inline std::span<const std::size_t> element_nodes(const Mesh& mesh, std::size_t element_id)
{
    for (const auto& b : mesh.blocks) {
        if (element_id < b.size()) return b.element(element_id);
        element_id -= b.size();
    }
    throw MeshError("element id out of range");
}

/// Sparsity of the assembled stiffness. `dof_map` sends each mesh DOF
/// (2*node + component) to an equation index, or kNoIndex when the DOF is
/// eliminated; several DOFs may share one equation.
inline linalg::SparsityPattern structure_of_stiffness(const Mesh& mesh,
                                                      std::span<const std::size_t> dof_map,
                                                      std::size_t n_equations)
{
    if (dof_map.size() != mesh.num_dofs()) throw MeshError("dof map does not cover the mesh");
    linalg::SparsityPattern pattern(n_equations);
    for (std::size_t i = 0; i < n_equations; ++i) pattern.insert(i, i);
    std::vector<std::size_t> eq;
    for (const auto& block : mesh.blocks) {
        for (std::size_t e = 0; e < block.size(); ++e) {
            eq.clear();
            for (std::size_t n : block.element(e)) {
                eq.push_back(dof_map[2 * n]);
                eq.push_back(dof_map[2 * n + 1]);
            }
            pattern.insert_clique(eq);
        }
    }
    pattern.compress();
    return pattern;
}

} // namespace fescale::mesh
