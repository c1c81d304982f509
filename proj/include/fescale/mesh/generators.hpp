#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <array>
#include <vector>

#include "mesh.hpp"

namespace fescale::mesh {

// Structured and mapped meshes for the built-in RVEs and macro benchmarks.

/// Drops nodes not referenced by any element and renumbers connectivity.
inline Mesh compact(Mesh mesh)
{
    const auto used = mesh.referenced_nodes();
    std::vector<std::size_t> new_id(mesh.nodes.size(), kNoIndex);
    std::vector<Vec2> nodes;
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        if (used[i]) {
            new_id[i] = nodes.size();
            nodes.push_back(mesh.nodes[i]);
        }
    }
    for (auto& b : mesh.blocks) {
        for (auto& n : b.connectivity) n = new_id[n];
    }
    mesh.nodes = std::move(nodes);
    return mesh;
}

namespace detail {

// Appends a quad (a,b,c,d; counter-clockwise) either as one quad or as two triangles.
inline void append_cell(ElementBlock& block, ElementKind kind, std::size_t a, std::size_t b,
                        std::size_t c, std::size_t d)
{
    if (kind == ElementKind::bilinear_quad) {
        block.connectivity.insert(block.connectivity.end(), {a, b, c, d});
    } else {
        block.connectivity.insert(block.connectivity.end(), {a, b, c, a, c, d});
    }
}

inline Mesh blocks_from_phases(std::vector<Vec2> nodes, ElementKind kind,
                               const std::vector<std::array<std::size_t, 4>>& cells,
                               const std::vector<std::size_t>& phases)
{
    std::map<std::size_t, ElementBlock> by_phase;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        auto& block = by_phase[phases[c]];
        block.kind = kind;
        block.phase = phases[c];
        append_cell(block, kind, cells[c][0], cells[c][1], cells[c][2], cells[c][3]);
    }
    Mesh mesh;
    mesh.nodes = std::move(nodes);
    for (auto& [phase, block] : by_phase) mesh.blocks.push_back(std::move(block));
    return compact(std::move(mesh));
}

} // namespace detail

struct GridSpec {
    std::size_t nx = 1;
    std::size_t ny = 1;
    double width = 1.0;
    double height = 1.0;
    Vec2 origin = Vec2::Zero();
    ElementKind kind = ElementKind::bilinear_quad;
};

/// Phase of cell (i, j); std::nullopt removes the cell.
using CellPhase = std::function<std::optional<std::size_t>(std::size_t i, std::size_t j)>;

/// Regular nx-by-ny grid. Triangles split each cell along its (a, c) diagonal.
inline Mesh structured_grid(const GridSpec& spec, const CellPhase& phase_of = {})
{
    std::vector<Vec2> nodes;
    nodes.reserve((spec.nx + 1) * (spec.ny + 1));
    for (std::size_t j = 0; j <= spec.ny; ++j) {
        for (std::size_t i = 0; i <= spec.nx; ++i) {
            nodes.emplace_back(spec.origin.x() + spec.width * static_cast<double>(i) / static_cast<double>(spec.nx),
                               spec.origin.y() + spec.height * static_cast<double>(j) / static_cast<double>(spec.ny));
        }
    }
    const auto id = [&](std::size_t i, std::size_t j) { return j * (spec.nx + 1) + i; };
    std::vector<std::array<std::size_t, 4>> cells;
    std::vector<std::size_t> phases;
    for (std::size_t j = 0; j < spec.ny; ++j) {
        for (std::size_t i = 0; i < spec.nx; ++i) {
            const auto phase = phase_of ? phase_of(i, j) : std::optional<std::size_t>{0};
            if (!phase) continue;
            cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
            phases.push_back(*phase);
        }
    }
    return detail::blocks_from_phases(std::move(nodes), spec.kind, cells, phases);
}

/// Square of edge `edge` centred at `center` with a central circular hole, meshed
/// as an O-grid: `cells_per_side` cells along each outer side, `radial_cells`
/// between hole and outer boundary. Opposite sides carry matching nodes.
inline Mesh square_with_hole(double edge, double hole_diameter, std::size_t cells_per_side,
                             std::size_t radial_cells, ElementKind kind,
                             Vec2 center = Vec2::Zero(), std::size_t phase = 0)
{
    if (!(hole_diameter > 0.0 && hole_diameter < edge)) {
        throw MeshError("hole diameter must lie in (0, edge)");
    }
    const std::size_t n_ring = 4 * cells_per_side;
    const double half = 0.5 * edge;
    const double radius = 0.5 * hole_diameter;

    // Outer perimeter, counter-clockwise from the lower-left corner.
    const auto outer = [&](std::size_t k) -> Vec2 {
        const std::size_t side = k / cells_per_side;
        const double t = static_cast<double>(k % cells_per_side) / static_cast<double>(cells_per_side);
        switch (side) {
        case 0: return {-half + edge * t, -half};
        case 1: return {half, -half + edge * t};
        case 2: return {half - edge * t, half};
        default: return {-half, half - edge * t};
        }
    };

    std::vector<Vec2> nodes;
    nodes.reserve(n_ring * (radial_cells + 1));
    for (std::size_t j = 0; j <= radial_cells; ++j) {
        const double s = static_cast<double>(j) / static_cast<double>(radial_cells);
        for (std::size_t k = 0; k < n_ring; ++k) {
            const double theta = -0.75 * std::numbers::pi +
                                 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_ring);
            const Vec2 inner(radius * std::cos(theta), radius * std::sin(theta));
            nodes.push_back(center + inner + s * (outer(k) - inner));
        }
    }
    // Snap the outer ring exactly onto the square so periodic partners match bit-for-bit.
    for (std::size_t k = 0; k < n_ring; ++k) nodes[radial_cells * n_ring + k] = center + outer(k);

    const auto id = [&](std::size_t k, std::size_t j) { return j * n_ring + (k % n_ring); };
    std::vector<std::array<std::size_t, 4>> cells;
    for (std::size_t j = 0; j < radial_cells; ++j) {
        for (std::size_t k = 0; k < n_ring; ++k) {
            cells.push_back({id(k, j), id(k, j + 1), id(k + 1, j + 1), id(k + 1, j)});
        }
    }
    return detail::blocks_from_phases(std::move(nodes), kind, cells,
                                      std::vector<std::size_t>(cells.size(), phase));
}

// --- built-in RVEs (unit cell [0,1]^2 unless stated) ---

inline Mesh single_element_rve() { return structured_grid({1, 1, 1.0, 1.0, Vec2::Zero(), ElementKind::bilinear_quad}); }

/// Unit cell with a central pore of diameter `hole_ratio` (D/L).
inline Mesh porous_square_rve(ElementKind kind, std::size_t cells_per_side = 4,
                              std::size_t radial_cells = 4, double hole_ratio = 0.5)
{
    return square_with_hole(1.0, hole_ratio, cells_per_side, radial_cells, kind, Vec2(0.5, 0.5));
}

/// Two vertical strips: phase 0 for x < 1/2, phase 1 for x > 1/2.
inline Mesh laminate_rve(std::size_t cells = 4, ElementKind kind = ElementKind::bilinear_quad)
{
    const std::size_t n = 2 * ((cells + 1) / 2);
    return structured_grid({n, n, 1.0, 1.0, Vec2::Zero(), kind},
                           [n](std::size_t i, std::size_t) -> std::optional<std::size_t> {
                               return i < n / 2 ? 0 : 1;
                           });
}

/// Matrix (phase 0) with one square pore and two stiff inclusions (phase 1)
/// on a 10x10 triangulated grid.
inline Mesh composite_rve(ElementKind kind = ElementKind::linear_triangle)
{
    return structured_grid({10, 10, 1.0, 1.0, Vec2::Zero(), kind},
                           [](std::size_t i, std::size_t j) -> std::optional<std::size_t> {
                               if (i >= 4 && i <= 5 && j >= 4 && j <= 6) return std::nullopt;
                               if (i >= 1 && i <= 2 && j >= 6 && j <= 8) return 1;
                               if (i >= 6 && i <= 8 && j >= 1 && j <= 2) return 1;
                               return 0;
                           });
}

} // namespace fescale::mesh
