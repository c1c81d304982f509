#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fescale::linalg {

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

/// Raised for malformed input: non-symmetric patterns, empty rows, dimension mismatches.
class StructuralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by the factorization when a pivot falls below the relative pivot tolerance.
class SingularMatrixError : public std::runtime_error {
public:
    explicit SingularMatrixError(std::size_t pivot_index)
        : std::runtime_error("singular matrix: pivot " + std::to_string(pivot_index) +
                             " below tolerance"),
          pivot_index_(pivot_index)
    {
    }

    /// Row index of the failing pivot in the caller's (unpermuted) numbering.
    std::size_t pivot_index() const noexcept { return pivot_index_; }

private:
    std::size_t pivot_index_;
};

/// Sparsity pattern stored as sorted adjacency rows. The diagonal is always present.
class SparsityPattern {
public:
    SparsityPattern() = default;
    explicit SparsityPattern(std::size_t n) : rows_(n) {}

    std::size_t size() const noexcept { return rows_.size(); }

    void insert(std::size_t i, std::size_t j)
    {
        if (i >= rows_.size() || j >= rows_.size()) {
            throw StructuralError("pattern entry out of range");
        }
        rows_[i].push_back(j);
        compressed_ = false;
    }

    /// Couples every pair of indices in the list; kNoIndex entries are skipped.
    void insert_clique(std::span<const std::size_t> indices)
    {
        for (std::size_t a : indices) {
            if (a == kNoIndex) continue;
            for (std::size_t b : indices) {
                if (b == kNoIndex) continue;
                insert(a, b);
            }
        }
    }

    void compress()
    {
        for (auto& row : rows_) {
            std::sort(row.begin(), row.end());
            row.erase(std::unique(row.begin(), row.end()), row.end());
        }
        compressed_ = true;
    }

    std::span<const std::size_t> row(std::size_t i) const
    {
        require_compressed();
        return rows_[i];
    }

    bool contains(std::size_t i, std::size_t j) const
    {
        require_compressed();
        return std::binary_search(rows_[i].begin(), rows_[i].end(), j);
    }

    std::size_t nonzeros() const
    {
        std::size_t nnz = 0;
        for (const auto& row : rows_) nnz += row.size();
        return nnz;
    }

    bool is_symmetric() const
    {
        require_compressed();
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            for (std::size_t j : rows_[i]) {
                if (!contains(j, i)) return false;
            }
        }
        return true;
    }

    /// Largest |i - j| over stored entries.
    std::size_t bandwidth() const
    {
        require_compressed();
        std::size_t bw = 0;
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            for (std::size_t j : rows_[i]) bw = std::max(bw, i > j ? i - j : j - i);
        }
        return bw;
    }

    bool operator==(const SparsityPattern&) const = default;

private:
    void require_compressed() const
    {
        if (!compressed_) throw StructuralError("sparsity pattern used before compress()");
    }

    std::vector<std::vector<std::size_t>> rows_;
    bool compressed_ = true;
};

/// Square matrix in compressed sparse row storage.
class SparseMatrix {
public:
    SparseMatrix() = default;

    explicit SparseMatrix(const SparsityPattern& pattern) : n_rows_(pattern.size())
    {
        row_offsets_.reserve(n_rows_ + 1);
        col_indices_.reserve(pattern.nonzeros());
        for (std::size_t i = 0; i < n_rows_; ++i) {
            auto row = pattern.row(i);
            col_indices_.insert(col_indices_.end(), row.begin(), row.end());
            row_offsets_.push_back(col_indices_.size());
        }
        values_.assign(col_indices_.size(), 0.0);
    }

    /// Builds a matrix holding every nonzero of `dense`, with the pattern symmetrized.
    static SparseMatrix from_dense(const Eigen::MatrixXd& dense)
    {
        if (dense.rows() != dense.cols()) throw StructuralError("matrix must be square");
        const auto n = static_cast<std::size_t>(dense.rows());
        SparsityPattern pattern(n);
        for (std::size_t i = 0; i < n; ++i) {
            pattern.insert(i, i);
            for (std::size_t j = 0; j < n; ++j) {
                if (dense(i, j) != 0.0) {
                    pattern.insert(i, j);
                    pattern.insert(j, i);
                }
            }
        }
        pattern.compress();
        SparseMatrix m(pattern);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = m.row_offsets_[i]; k < m.row_offsets_[i + 1]; ++k) {
                m.values_[k] = dense(i, m.col_indices_[k]);
            }
        }
        return m;
    }

    std::size_t rows() const noexcept { return n_rows_; }
    std::size_t nonzeros() const noexcept { return col_indices_.size(); }

    std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
    std::span<const std::size_t> col_indices() const noexcept { return col_indices_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    /// Position of (i, j) in the value array, or kNoIndex if structurally zero.
    std::size_t find(std::size_t i, std::size_t j) const
    {
        const auto first = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
        const auto last = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
        const auto it = std::lower_bound(first, last, j);
        if (it == last || *it != j) return kNoIndex;
        return static_cast<std::size_t>(it - col_indices_.begin());
    }

    void add(std::size_t i, std::size_t j, double v)
    {
        const std::size_t k = find(i, j);
        if (k == kNoIndex) throw StructuralError("entry outside sparsity pattern");
        values_[k] += v;
    }

    double coeff(std::size_t i, std::size_t j) const
    {
        const std::size_t k = find(i, j);
        return k == kNoIndex ? 0.0 : values_[k];
    }

    void set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

    SparsityPattern pattern() const
    {
        SparsityPattern p(n_rows_);
        for (std::size_t i = 0; i < n_rows_; ++i) {
            for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
                p.insert(i, col_indices_[k]);
            }
        }
        p.compress();
        return p;
    }

    Eigen::VectorXd multiply(const Eigen::VectorXd& x) const
    {
        if (static_cast<std::size_t>(x.size()) != n_rows_) {
            throw StructuralError("dimension mismatch in matrix-vector product");
        }
        Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
        for (std::size_t i = 0; i < n_rows_; ++i) {
            double s = 0.0;
            for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
                s += values_[k] * x[static_cast<Eigen::Index>(col_indices_[k])];
            }
            y[static_cast<Eigen::Index>(i)] = s;
        }
        return y;
    }

    /// Maximum absolute row sum.
    double norm_inf() const
    {
        double best = 0.0;
        for (std::size_t i = 0; i < n_rows_; ++i) {
            double s = 0.0;
            for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
                s += std::abs(values_[k]);
            }
            best = std::max(best, s);
        }
        return best;
    }

    Eigen::MatrixXd to_dense() const
    {
        const auto n = static_cast<Eigen::Index>(n_rows_);
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t i = 0; i < n_rows_; ++i) {
            for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
                d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col_indices_[k])) =
                    values_[k];
            }
        }
        return d;
    }

private:
    std::size_t n_rows_ = 0;
    std::vector<std::size_t> row_offsets_{0};
    std::vector<std::size_t> col_indices_;
    std::vector<double> values_;
};

} // namespace fescale::linalg
