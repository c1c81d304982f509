#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <queue>
#include <vector>

#include "sparse_matrix.hpp"

namespace fescale::linalg {

/// Symmetric row/column renumbering. `forward[old] = new`, `inverse[new] = old`.
struct Permutation {
    std::vector<std::size_t> forward;
    std::vector<std::size_t> inverse;

    static Permutation identity(std::size_t n)
    {
        Permutation p;
        p.forward.resize(n);
        std::iota(p.forward.begin(), p.forward.end(), std::size_t{0});
        p.inverse = p.forward;
        return p;
    }

    static Permutation from_order(std::vector<std::size_t> order)
    {
        Permutation p;
        p.forward.assign(order.size(), kNoIndex);
        for (std::size_t k = 0; k < order.size(); ++k) p.forward[order[k]] = k;
        p.inverse = std::move(order);
        return p;
    }

    std::size_t size() const noexcept { return forward.size(); }

    bool is_valid() const
    {
        if (forward.size() != inverse.size()) return false;
        for (std::size_t k = 0; k < forward.size(); ++k) {
            if (forward[k] >= forward.size() || inverse[forward[k]] != k) return false;
        }
        return true;
    }

    bool operator==(const Permutation&) const = default;
};

/// Bandwidth of the pattern after renumbering by `perm`.
inline std::size_t permuted_bandwidth(const SparsityPattern& pattern, const Permutation& perm)
{
    std::size_t bw = 0;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        for (std::size_t j : pattern.row(i)) {
            const std::size_t a = perm.forward[i];
            const std::size_t b = perm.forward[j];
            bw = std::max(bw, a > b ? a - b : b - a);
        }
    }
    return bw;
}

namespace detail {

inline std::size_t off_diagonal_degree(const SparsityPattern& pattern, std::size_t i)
{
    const auto row = pattern.row(i);
    return row.size() - static_cast<std::size_t>(std::binary_search(row.begin(), row.end(), i));
}

// Breadth-first level structure rooted at `root`, restricted to unvisited nodes.
// Returns levels; neighbours within a level are visited in (degree, index) order.
inline std::vector<std::vector<std::size_t>> level_structure(const SparsityPattern& pattern,
                                                             std::size_t root,
                                                             const std::vector<char>& excluded,
                                                             const std::vector<std::size_t>& degree)
{
    std::vector<std::vector<std::size_t>> levels;
    std::vector<char> seen(excluded);
    seen[root] = 1;
    levels.push_back({root});
    std::vector<std::size_t> next;
    while (true) {
        next.clear();
        for (std::size_t node : levels.back()) {
            std::vector<std::size_t> nbrs;
            for (std::size_t j : pattern.row(node)) {
                if (!seen[j]) {
                    seen[j] = 1;
                    nbrs.push_back(j);
                }
            }
            std::sort(nbrs.begin(), nbrs.end(), [&](std::size_t a, std::size_t b) {
                return degree[a] != degree[b] ? degree[a] < degree[b] : a < b;
            });
            next.insert(next.end(), nbrs.begin(), nbrs.end());
        }
        if (next.empty()) break;
        levels.push_back(next);
    }
    return levels;
}

} // namespace detail

/// Reverse Cuthill-McKee ordering with George-Liu pseudo-peripheral start nodes,
/// applied per connected component. Ties are broken by index, so the result
/// depends only on the pattern.
inline Permutation reverse_cuthill_mckee(const SparsityPattern& pattern)
{
    const std::size_t n = pattern.size();
    if (!pattern.is_symmetric()) throw StructuralError("ordering requires a symmetric pattern");
    std::vector<std::size_t> degree(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (pattern.row(i).empty()) {
            throw StructuralError("ordering: row " + std::to_string(i) + " is empty");
        }
        degree[i] = detail::off_diagonal_degree(pattern, i);
    }

    std::vector<char> visited(n, 0);
    std::vector<std::size_t> order;
    order.reserve(n);

    while (order.size() < n) {
        std::size_t root = kNoIndex;
        for (std::size_t i = 0; i < n; ++i) {
            if (!visited[i] && (root == kNoIndex || degree[i] < degree[root])) root = i;
        }

        // pseudo-peripheral node search
        auto levels = detail::level_structure(pattern, root, visited, degree);
        while (true) {
            const auto& last = levels.back();
            const std::size_t candidate = *std::min_element(
                last.begin(), last.end(), [&](std::size_t a, std::size_t b) {
                    return degree[a] != degree[b] ? degree[a] < degree[b] : a < b;
                });
            auto trial = detail::level_structure(pattern, candidate, visited, degree);
            if (trial.size() <= levels.size()) break;
            root = candidate;
            levels = std::move(trial);
        }

        for (const auto& level : levels) {
            for (std::size_t node : level) {
                visited[node] = 1;
                order.push_back(node);
            }
        }
    }

    std::reverse(order.begin(), order.end());
    return Permutation::from_order(std::move(order));
}

/// Bandwidth-reducing ordering. Falls back to the natural numbering whenever
/// RCM would not improve on it.
inline Permutation compute_ordering(const SparsityPattern& pattern)
{
    Permutation rcm = reverse_cuthill_mckee(pattern);
    Permutation natural = Permutation::identity(pattern.size());
    if (permuted_bandwidth(pattern, rcm) > permuted_bandwidth(pattern, natural)) return natural;
    return rcm;
}

} // namespace fescale::linalg
