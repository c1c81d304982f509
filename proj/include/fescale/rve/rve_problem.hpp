#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "../linalg/ordering.hpp"
#include "../linalg/skyline_lu.hpp"
#include "../linalg/sparse_matrix.hpp"
#include "../material/j2_plasticity.hpp"
#include "../mesh/mesh.hpp"
#include "periodic_map.hpp"

namespace fescale::rve {

using material::Matrix4;
using material::Vector4;
using SensitivityMatrix = Eigen::Matrix<double, 4, Eigen::Dynamic>;

/// Micro Newton failed to reach its tolerance within the iteration budget.
class MicroDivergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything about one RVE mesh that does not depend on the loading state.
struct RveGeometry {
    mesh::Mesh mesh;
    std::vector<mesh::IntegrationPoint> points;
    PeriodicMap map;
    std::vector<std::size_t> element_first_point; // size num_elements + 1
    std::vector<std::size_t> element_phase;
    std::vector<std::vector<std::size_t>> element_equations;
    std::vector<std::vector<std::size_t>> element_value_slots; // CSR positions, row-major nd x nd
    std::vector<Vec2> position;                                 // X - X(anchor)
    linalg::SparsityPattern pattern;
    std::shared_ptr<const linalg::SymbolicFactorization> symbolic;
    double volume = 0.0; // area of the cell, pores included
    double edge = 0.0;

    std::size_t num_reduced() const { return map.n_reduced; }
    std::size_t num_points() const { return points.size(); }
};

inline std::shared_ptr<const RveGeometry> make_geometry(mesh::Mesh m, double tol_geom = -1.0)
{
    auto g = std::make_shared<RveGeometry>();
    const auto [lo, hi] = m.bounds();
    g->edge = std::max(hi.x() - lo.x(), hi.y() - lo.y());
    if (tol_geom < 0.0) tol_geom = 1e-8 * g->edge;
    g->map = build_periodic_map(m, tol_geom);
    g->points = mesh::build_integration_points(m);
    g->volume = (hi.x() - lo.x()) * (hi.y() - lo.y());

    const Vec2 origin = m.nodes[g->map.anchor];
    for (const auto& x : m.nodes) g->position.push_back(x - origin);

    for (const auto& b : m.blocks) {
        for (std::size_t e = 0; e < b.size(); ++e) g->element_phase.push_back(b.phase);
    }
    g->element_first_point.assign(m.num_elements() + 1, 0);
    for (const auto& p : g->points) ++g->element_first_point[p.element + 1];
    for (std::size_t e = 0; e < m.num_elements(); ++e) g->element_first_point[e + 1] += g->element_first_point[e];

    g->pattern = mesh::structure_of_stiffness(m, g->map.equation, g->map.n_reduced);
    const linalg::SparseMatrix probe(g->pattern);
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
        std::vector<std::size_t> eq;
        for (std::size_t node : mesh::element_nodes(m, e)) {
            eq.push_back(g->map.equation[2 * node]);
            eq.push_back(g->map.equation[2 * node + 1]);
        }
        std::vector<std::size_t> slots;
        slots.reserve(eq.size() * eq.size());
        for (std::size_t a : eq) {
            for (std::size_t b : eq) slots.push_back(a == kNoIndex || b == kNoIndex ? kNoIndex : probe.find(a, b));
        }
        g->element_equations.push_back(std::move(eq));
        g->element_value_slots.push_back(std::move(slots));
    }
    if (g->map.n_reduced > 0) {
        g->symbolic = linalg::analyze(g->pattern, linalg::compute_ordering(g->pattern));
    }
    g->mesh = std::move(m);
    return g;
}

/// Result of one residual/stiffness evaluation at (H, û). Sensitivities follow
/// the layout (11, 12, 21, 22) of the displacement gradient.
struct Assembly {
    Eigen::VectorXd residual;    // reduced residual
    linalg::SparseMatrix stiffness;
    Eigen::MatrixXd dr_dH;       // n x 4
    Vector4 sigma = Vector4::Zero();       // boundary-force route
    SensitivityMatrix dsigma_du;           // 4 x n
    Matrix4 dsigma_dH = Matrix4::Zero();
    Vector4 sigma_volume = Vector4::Zero(); // volume average of the micro stress
    SensitivityMatrix dsigma_du_volume;     // filled only on request
    Matrix4 dsigma_dH_volume = Matrix4::Zero();
    Eigen::VectorXd full_force;  // unreduced internal forces, node-major
    double force_norm = 0.0;
    std::vector<material::MaterialState> trial_states;
    std::vector<char> plastic_flags;
    bool any_plastic = false;

    double residual_norm() const { return residual.size() == 0 ? 0.0 : residual.cwiseAbs().maxCoeff(); }
};

struct HomogenizedOutput {
    Vector4 sigma_bar = Vector4::Zero();
    Vector4 sigma_alg = Vector4::Zero();
    Matrix4 c_tangent = Matrix4::Zero();
    double residual_norm = 0.0;
    double reference = 0.0; // force scale for the residual test
    std::size_t micro_iterations = 0;
    std::size_t factorizations = 0;
    bool linear_step = false; // no refactorization was necessary
    bool plastic = false;

    bool converged(double tol) const { return residual_norm <= tol * reference; }
};

struct RveCounters {
    std::size_t setup_factorizations = 0;
    std::size_t factorizations = 0;
    std::size_t update_solves = 0;
    std::size_t condensation_solves = 0;
    std::size_t corrections = 0;
};

/// Micro boundary-value problem at one macro integration point.
class RveProblem {
public:
    RveProblem(std::shared_ptr<const RveGeometry> geometry, std::vector<material::MaterialParams> phases,
               bool store_factorization = true)
        : geom_(std::move(geometry)), phases_(std::move(phases)), store_(store_factorization)
    {
        std::size_t max_phase = 0;
        for (std::size_t p : geom_->element_phase) max_phase = std::max(max_phase, p);
        if (phases_.size() <= max_phase) throw std::invalid_argument("RVE mesh references an undefined material phase");
        double e_max = 0.0;
        for (const auto& p : phases_) {
            material::validate(p);
            e_max = std::max(e_max, material::elastic_part(p).youngs_modulus);
        }
        floor_ = 1e-8 * e_max * geom_->edge;
        const auto n = static_cast<Eigen::Index>(geom_->num_reduced());
        u_ = u_n_ = u_nm1_ = Eigen::VectorXd::Zero(n);
        states_.assign(geom_->num_points(), {});
    }

    const RveGeometry& geometry() const { return *geom_; }
    const std::vector<material::MaterialParams>& phases() const { return phases_; }
    const Eigen::VectorXd& u_hat() const { return u_; }
    const Eigen::VectorXd& u_hat_committed() const { return u_n_; }
    const Vector4& H() const { return H_; }
    const std::vector<material::MaterialState>& committed_states() const { return states_; }
    const Assembly& last_assembly() const { return last_; }
    const HomogenizedOutput& output() const { return out_; }
    const RveCounters& counters() const { return counters_; }
    bool stores_factorization() const { return store_; }
    double reference() const { return std::max(ref_force_, floor_); }

    /// Full nodal displacement u = H X + w for a reduced fluctuation vector.
    Eigen::VectorXd full_displacement(const Vector4& H, const Eigen::VectorXd& u) const
    {
        const std::size_t nn = geom_->mesh.num_nodes();
        Eigen::VectorXd full(static_cast<Eigen::Index>(2 * nn));
        for (std::size_t a = 0; a < nn; ++a) {
            const Vec2& x = geom_->position[a];
            for (int i = 0; i < 2; ++i) {
                const std::size_t eq = geom_->map.equation[2 * a + static_cast<std::size_t>(i)];
                full[static_cast<Eigen::Index>(2 * a) + i] =
                    H[2 * i] * x.x() + H[2 * i + 1] * x.y() + (eq == kNoIndex ? 0.0 : u[static_cast<Eigen::Index>(eq)]);
            }
        }
        return full;
    }

    /// Evaluates residual, stiffness and homogenized quantities at (H, û) from
    /// the committed material states. Does not modify the problem.
    Assembly assemble(const Vector4& H, const Eigen::VectorXd& u, bool volume_route = false) const
    {
        const RveGeometry& g = *geom_;
        const std::size_t n = g.num_reduced();
        const auto ni = static_cast<Eigen::Index>(n);
        Assembly a;
        a.residual = Eigen::VectorXd::Zero(ni);
        a.stiffness = linalg::SparseMatrix(g.pattern);
        a.dr_dH = Eigen::MatrixXd::Zero(ni, 4);
        a.dsigma_du = SensitivityMatrix::Zero(4, ni);
        if (volume_route) a.dsigma_du_volume = SensitivityMatrix::Zero(4, ni);
        a.full_force = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.mesh.num_dofs()));
        a.trial_states.resize(g.num_points());
        a.plastic_flags.assign(g.num_points(), 0);

        const Eigen::VectorXd full = full_displacement(H, u);
        auto values = a.stiffness.values();
        Eigen::MatrixXd ke;
        Eigen::VectorXd fe;
        Eigen::MatrixXd ge;
        Eigen::MatrixXd pe;

        for (std::size_t e = 0; e < g.mesh.num_elements(); ++e) {
            const auto nodes = mesh::element_nodes(g.mesh, e);
            const auto nd = static_cast<Eigen::Index>(2 * nodes.size());
            Eigen::VectorXd ue(nd);
            ge = Eigen::MatrixXd::Zero(nd, 4);
            pe = Eigen::MatrixXd::Zero(4, nd);
            for (std::size_t k = 0; k < nodes.size(); ++k) {
                const auto r = static_cast<Eigen::Index>(2 * k);
                const std::size_t node = nodes[k];
                ue.segment<2>(r) = full.segment<2>(static_cast<Eigen::Index>(2 * node));
                const Vec2& x = g.position[node];
                for (Eigen::Index i = 0; i < 2; ++i) {
                    ge(r + i, 2 * i) = x.x();
                    ge(r + i, 2 * i + 1) = x.y();
                    if (g.map.on_boundary[node]) {
                        pe(2 * i, r + i) = x.x();
                        pe(2 * i + 1, r + i) = x.y();
                    }
                }
            }
            ke = Eigen::MatrixXd::Zero(nd, nd);
            fe = Eigen::VectorXd::Zero(nd);
            const auto& params = phases_[g.element_phase[e]];
            for (std::size_t q = g.element_first_point[e]; q < g.element_first_point[e + 1]; ++q) {
                const auto& ip = g.points[q];
                const Vector4 h = ip.b_operator * ue;
                const auto res = material::evaluate(params, h, states_[q]);
                fe.noalias() += ip.weight * ip.b_operator.transpose() * res.sigma;
                const Eigen::Matrix<double, 4, Eigen::Dynamic, 0, 4, 8> tb = res.tangent * ip.b_operator;
                ke.noalias() += ip.weight * ip.b_operator.transpose() * tb;
                a.sigma_volume += ip.weight * res.sigma;
                if (volume_route) {
                    a.dsigma_dH_volume += ip.weight * res.tangent;
                    const auto& eq = g.element_equations[e];
                    for (Eigen::Index c = 0; c < nd; ++c) {
                        if (eq[static_cast<std::size_t>(c)] != kNoIndex) {
                            a.dsigma_du_volume.col(static_cast<Eigen::Index>(eq[static_cast<std::size_t>(c)])) +=
                                ip.weight * tb.col(c);
                        }
                    }
                }
                a.trial_states[q] = res.new_state;
                a.plastic_flags[q] = res.plastic_active ? 1 : 0;
                a.any_plastic = a.any_plastic || res.plastic_active;
            }

            const Eigen::MatrixXd kg = ke * ge;
            const Eigen::MatrixXd pk = pe * ke;
            a.dsigma_dH += pk * ge;
            const auto& eq = g.element_equations[e];
            const auto& slots = g.element_value_slots[e];
            for (Eigen::Index r = 0; r < nd; ++r) {
                const auto ur = static_cast<std::size_t>(r);
                a.full_force[static_cast<Eigen::Index>(2 * nodes[ur / 2] + ur % 2)] += fe[r];
                const std::size_t er = eq[ur];
                if (er == kNoIndex) continue;
                const auto eri = static_cast<Eigen::Index>(er);
                a.residual[eri] += fe[r];
                a.dr_dH.row(eri) += kg.row(r);
                a.dsigma_du.col(eri) += pk.col(r);
                for (Eigen::Index c = 0; c < nd; ++c) {
                    const std::size_t slot = slots[ur * static_cast<std::size_t>(nd) + static_cast<std::size_t>(c)];
                    if (slot != kNoIndex) values[slot] += ke(r, c);
                }
            }
        }

        for (std::size_t node = 0; node < g.mesh.num_nodes(); ++node) {
            if (!g.map.on_boundary[node]) continue;
            const Vec2& x = g.position[node];
            for (Eigen::Index i = 0; i < 2; ++i) {
                const double f = a.full_force[static_cast<Eigen::Index>(2 * node) + i];
                a.sigma[2 * i] += f * x.x();
                a.sigma[2 * i + 1] += f * x.y();
            }
        }
        const double inv_v = 1.0 / g.volume;
        a.sigma *= inv_v;
        a.dsigma_du *= inv_v;
        a.dsigma_dH *= inv_v;
        a.sigma_volume *= inv_v;
        a.dsigma_du_volume *= inv_v;
        a.dsigma_dH_volume *= inv_v;
        a.force_norm = a.full_force.size() == 0 ? 0.0 : a.full_force.cwiseAbs().maxCoeff();
        return a;
    }

    /// C_t and Sigma^alg by static condensation with one multi-RHS solve.
    static std::pair<Matrix4, Vector4> condense(const Assembly& a, const linalg::Factorization* factor,
                                                 bool with_residual, const SensitivityMatrix& dsigma_du,
                                                 const Matrix4& dsigma_dH, const Vector4& sigma)
    {
        if (a.residual.size() == 0) return {dsigma_dH, sigma};
        Eigen::MatrixXd rhs(a.residual.size(), with_residual ? 5 : 4);
        rhs.leftCols(4) = a.dr_dH;
        if (with_residual) rhs.col(4) = a.residual;
        const Eigen::MatrixXd x = factor->solve(rhs);
        const Matrix4 c = dsigma_dH - dsigma_du * x.leftCols(4);
        const Vector4 s = with_residual ? Vector4(sigma - dsigma_du * x.col(4)) : sigma;
        return {c, s};
    }

    /// Setup at H = 0 with virgin states; the factorization is counted separately.
    void initialize()
    {
        H_ = H_n_ = H_nm1_ = Vector4::Zero();
        u_.setZero();
        u_n_.setZero();
        u_nm1_.setZero();
        committed_count_ = 0;
        ref_force_ = 0.0;
        const std::size_t before = counters_.factorizations;
        out_ = refresh_impl();
        counters_.setup_factorizations += counters_.factorizations - before;
        counters_.factorizations = before;
        out_.factorizations = 0;
        commit();
    }

    /// Resets the increment-wide force reference.
    void begin_increment() { ref_force_ = 0.0; }

    /// Linear extrapolation of û from the committed history (staggered predictor).
    void predict(double ratio, bool extrapolate)
    {
        u_ = u_n_;
        if (extrapolate && committed_count_ >= 2) u_ += ratio * (u_n_ - u_nm1_);
    }

    /// Full micro Newton at fixed H followed by the consistent tangent.
    HomogenizedOutput solve_staggered(const Vector4& H_target, double tol, std::size_t max_iter)
    {
        H_ = H_target;
        const std::size_t f0 = counters_.factorizations;
        std::size_t corrections = 0;
        Assembly a;
        double norm = 0.0;
        for (;;) {
            a = assemble(H_, u_);
            ref_force_ = std::max(ref_force_, a.force_norm);
            norm = a.residual_norm();
            if (!std::isfinite(norm)) throw MicroDivergence("non-finite micro residual");
            if (norm <= tol * reference()) break;
            if (corrections >= max_iter) {
                throw MicroDivergence("micro Newton did not converge in " + std::to_string(max_iter) + " iterations");
            }
            ensure_factor(a);
            u_ -= cache_.factor->solve(a.residual);
            ++corrections;
            ++counters_.corrections;
        }
        // tangent at the converged state
        if (a.residual.size() > 0) ensure_factor(a);
        const auto [c, s] = condense(a, cache_.factor.get(), false, a.dsigma_du, a.dsigma_dH, a.sigma);
        if (a.residual.size() > 0) ++counters_.condensation_solves;

        HomogenizedOutput out;
        out.sigma_bar = a.sigma;
        out.sigma_alg = s;
        out.c_tangent = c;
        out.residual_norm = norm;
        out.reference = reference();
        out.micro_iterations = std::max<std::size_t>(1, corrections);
        out.factorizations = counters_.factorizations - f0;
        out.linear_step = out.factorizations == 0;
        out.plastic = a.any_plastic;
        last_ = std::move(a);
        out_ = out;
        return out;
    }

    /// Condensed micro update: du = -k^-1 (r + dr/dH dH) with the system of the
    /// previous evaluation; exactly one solve.
    void update_monolithic(const Vector4& H_new)
    {
        const Vector4 dH = H_new - H_;
        if (geom_->num_reduced() > 0) {
            const Eigen::VectorXd rhs = cache_.residual + cache_.dr_dH * dH;
            if (!cache_.factor) {
                cache_.factor = std::make_shared<const linalg::Factorization>(cache_.stiffness, geom_->symbolic);
                ++counters_.factorizations;
            }
            u_ -= cache_.factor->solve(rhs);
            ++counters_.update_solves;
        }
        H_ = H_new;
    }

    /// Assembly at the current (H, û), factorization unless the step is linear,
    /// consistent tangent and algorithmic stress.
    HomogenizedOutput refresh() { return out_ = refresh_impl(); }

    void commit()
    {
        if (!last_.trial_states.empty()) states_ = last_.trial_states;
        u_nm1_ = u_n_;
        u_n_ = u_;
        H_nm1_ = H_n_;
        H_n_ = H_;
        ++committed_count_;
        cache_n_ = cache_;
        out_n_ = out_;
    }

    void rollback()
    {
        u_ = u_n_;
        H_ = H_n_;
        cache_ = cache_n_;
        out_ = out_n_;
        last_ = Assembly{};
    }

private:
    struct Cache {
        std::shared_ptr<const linalg::Factorization> factor;
        bool factor_elastic = false;
        std::vector<char> factor_flags;
        linalg::SparseMatrix stiffness; // kept only without a stored factorization
        Eigen::VectorXd residual;
        Eigen::MatrixXd dr_dH;
    };

    void factorize(const Assembly& a)
    {
        cache_.factor = std::make_shared<const linalg::Factorization>(a.stiffness, geom_->symbolic);
        cache_.factor_elastic = !a.any_plastic;
        cache_.factor_flags = a.plastic_flags;
        ++counters_.factorizations;
    }

    // An elastic assembly reproduces the elastic stiffness bit for bit.
    void ensure_factor(const Assembly& a)
    {
        if (cache_.factor && cache_.factor_elastic && !a.any_plastic) return;
        factorize(a);
    }

    HomogenizedOutput refresh_impl()
    {
        const std::size_t f0 = counters_.factorizations;
        Assembly a = assemble(H_, u_);
        ref_force_ = std::max(ref_force_, a.force_norm);
        if (a.residual.size() > 0) {
            if (!store_ && cache_.factor && !cache_.factor_elastic) cache_.factor.reset();
            ensure_factor(a);
        }
        const auto [c, s] = condense(a, cache_.factor.get(), true, a.dsigma_du, a.dsigma_dH, a.sigma);
        if (a.residual.size() > 0) ++counters_.condensation_solves;

        HomogenizedOutput out;
        out.sigma_bar = a.sigma;
        out.sigma_alg = s;
        out.c_tangent = c;
        out.residual_norm = a.residual_norm();
        out.reference = reference();
        out.micro_iterations = 1;
        out.factorizations = counters_.factorizations - f0;
        out.linear_step = out.factorizations == 0;
        out.plastic = a.any_plastic;

        cache_.residual = a.residual;
        cache_.dr_dH = a.dr_dH;
        if (!store_ && a.any_plastic) {
            // only the elastic factorization outlives the evaluation
            cache_.stiffness = a.stiffness;
            cache_.factor_elastic = false;
            cache_.factor_flags = a.plastic_flags;
            cache_.factor.reset();
        }
        last_ = std::move(a);
        return out;
    }

    std::shared_ptr<const RveGeometry> geom_;
    std::vector<material::MaterialParams> phases_;
    bool store_ = true;
    double floor_ = 0.0;
    double ref_force_ = 0.0;

    std::vector<material::MaterialState> states_; // committed
    Eigen::VectorXd u_, u_n_, u_nm1_;
    Vector4 H_ = Vector4::Zero(), H_n_ = Vector4::Zero(), H_nm1_ = Vector4::Zero();
    std::size_t committed_count_ = 0;

    Cache cache_, cache_n_;
    Assembly last_;
    HomogenizedOutput out_, out_n_;
    RveCounters counters_;
};

} // namespace fescale::rve
