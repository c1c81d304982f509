#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "ordering.hpp"
#include "sparse_matrix.hpp"

namespace fescale::linalg {

/// Relative pivot tolerance: a pivot smaller than this fraction of its row's
/// largest entry is treated as singular.
inline constexpr double kPivotTolerance = 1e-14;

/// Envelope (profile) of a permuted, structurally symmetric matrix.
/// Row r of L and column r of U both start at `first[r]`.
class SymbolicFactorization {
public:
    SymbolicFactorization() = default;

    SymbolicFactorization(const SparsityPattern& pattern, Permutation perm)
        : perm_(std::move(perm)), n_(pattern.size())
    {
        if (perm_.size() != n_ || !perm_.is_valid()) {
            throw StructuralError("permutation does not match pattern dimension");
        }
        if (!pattern.is_symmetric()) {
            throw StructuralError("factorization requires a structurally symmetric pattern");
        }
        first_.assign(n_, 0);
        for (std::size_t r = 0; r < n_; ++r) first_[r] = r;
        for (std::size_t i = 0; i < n_; ++i) {
            const std::size_t r = perm_.forward[i];
            for (std::size_t j : pattern.row(i)) first_[r] = std::min(first_[r], perm_.forward[j]);
        }
        offsets_.assign(n_ + 1, 0);
        for (std::size_t r = 0; r < n_; ++r) offsets_[r + 1] = offsets_[r] + (r - first_[r]);
    }

    std::size_t size() const noexcept { return n_; }
    const Permutation& permutation() const noexcept { return perm_; }
    std::size_t first(std::size_t r) const { return first_[r]; }
    std::size_t offset(std::size_t r) const { return offsets_[r]; }
    std::size_t envelope_size() const { return offsets_.back(); }

private:
    Permutation perm_;
    std::size_t n_ = 0;
    std::vector<std::size_t> first_;
    std::vector<std::size_t> offsets_;
};

/// LU factors A = P^T L U P in envelope storage, L with unit diagonal.
/// Immutable after construction; `solve` may be called concurrently.
class Factorization {
public:
    Factorization(const SparseMatrix& a, std::shared_ptr<const SymbolicFactorization> symbolic)
        : symbolic_(std::move(symbolic))
    {
        const SymbolicFactorization& s = *symbolic_;
        const std::size_t n = s.size();
        if (a.rows() != n) throw StructuralError("matrix dimension does not match symbolic analysis");
        const auto& perm = s.permutation();

        lower_.assign(s.envelope_size(), 0.0);
        upper_.assign(s.envelope_size(), 0.0);
        diag_.assign(n, 0.0);
        std::vector<double> row_max(n, 0.0);

        const auto offsets = a.row_offsets();
        const auto cols = a.col_indices();
        const auto vals = a.values();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t r = perm.forward[i];
            for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
                const std::size_t c = perm.forward[cols[k]];
                const double v = vals[k];
                row_max[r] = std::max(row_max[r], std::abs(v));
                if (std::min(r, c) < s.first(std::max(r, c))) {
                    throw StructuralError("matrix entry outside the analyzed envelope");
                }
                if (c == r) {
                    diag_[r] = v;
                } else if (c < r) {
                    lower_[s.offset(r) + (c - s.first(r))] = v;
                } else {
                    upper_[s.offset(c) + (r - s.first(c))] = v;
                }
            }
        }

        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t fj = s.first(j);
            double* lj = lower_.data() + s.offset(j); // lj[k - fj] == L(j,k)
            double* uj = upper_.data() + s.offset(j); // uj[k - fj] == U(k,j)
            for (std::size_t i = fj; i < j; ++i) {
                const std::size_t fi = s.first(i);
                const std::size_t k0 = std::max(fi, fj);
                const std::size_t len = i - k0;
                const double* li = lower_.data() + s.offset(i) + (k0 - fi);
                const double* ui = upper_.data() + s.offset(i) + (k0 - fi);
                const double* ljk = lj + (k0 - fj);
                const double* ujk = uj + (k0 - fj);
                double su = 0.0;
                double sl = 0.0;
                for (std::size_t k = 0; k < len; ++k) {
                    su += li[k] * ujk[k];
                    sl += ljk[k] * ui[k];
                }
                uj[i - fj] -= su;
                lj[i - fj] = (lj[i - fj] - sl) / diag_[i];
            }
            double sd = 0.0;
            for (std::size_t k = 0; k < j - fj; ++k) sd += lj[k] * uj[k];
            diag_[j] -= sd;
            if (!(std::abs(diag_[j]) > kPivotTolerance * row_max[j])) {
                throw SingularMatrixError(perm.inverse[j]);
            }
        }
    }

    std::size_t size() const noexcept { return diag_.size(); }
    const SymbolicFactorization& symbolic() const noexcept { return *symbolic_; }

    /// Solves A x = b for every column of `rhs`. Columns are processed independently,
    /// so a multi-column solve equals the corresponding single-column solves exactly.
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const
    {
        const std::size_t n = size();
        if (static_cast<std::size_t>(rhs.rows()) != n) {
            throw StructuralError("right-hand side has " + std::to_string(rhs.rows()) +
                                  " rows, factorization has " + std::to_string(n));
        }
        if (rhs.cols() < 1) throw StructuralError("right-hand side has no columns");
        Eigen::MatrixXd x(rhs.rows(), rhs.cols());
        std::vector<double> work(n);
        for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
            solve_column(rhs.col(c), work);
            x.col(c) = Eigen::Map<const Eigen::VectorXd>(work.data(), rhs.rows());
        }
        return x;
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const
    {
        return solve(Eigen::MatrixXd(rhs)).col(0);
    }

private:
    template <class Column>
    void solve_column(const Column& b, std::vector<double>& out) const
    {
        const SymbolicFactorization& s = *symbolic_;
        const auto& perm = s.permutation();
        const std::size_t n = size();
        std::vector<double> y(n);
        for (std::size_t r = 0; r < n; ++r) y[r] = b[static_cast<Eigen::Index>(perm.inverse[r])];

        for (std::size_t r = 0; r < n; ++r) {
            const std::size_t fr = s.first(r);
            const double* lr = lower_.data() + s.offset(r);
            double acc = 0.0;
            for (std::size_t k = fr; k < r; ++k) acc += lr[k - fr] * y[k];
            y[r] -= acc;
        }
        for (std::size_t c = n; c-- > 0;) {
            y[c] /= diag_[c];
            const std::size_t fc = s.first(c);
            const double* uc = upper_.data() + s.offset(c);
            const double xc = y[c];
            for (std::size_t k = fc; k < c; ++k) y[k] -= uc[k - fc] * xc;
        }
        for (std::size_t r = 0; r < n; ++r) out[perm.inverse[r]] = y[r];
    }

    std::shared_ptr<const SymbolicFactorization> symbolic_;
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<double> diag_;
};

inline std::shared_ptr<const SymbolicFactorization> analyze(const SparsityPattern& pattern,
                                                             Permutation perm)
{
    return std::make_shared<const SymbolicFactorization>(pattern, std::move(perm));
}

inline Factorization factorize(const SparseMatrix& a,
                               std::shared_ptr<const SymbolicFactorization> symbolic)
{
    return Factorization(a, std::move(symbolic));
}

inline Factorization factorize(const SparseMatrix& a, const Permutation& perm)
{
    if (a.rows() != perm.size()) throw StructuralError("permutation does not match matrix size");
    return Factorization(a, analyze(a.pattern(), perm));
}

inline Eigen::MatrixXd solve(const Factorization& f, const Eigen::MatrixXd& rhs)
{
    return f.solve(rhs);
}

} // namespace fescale::linalg
