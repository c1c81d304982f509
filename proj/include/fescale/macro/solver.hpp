#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "../linalg/ordering.hpp"
#include "../linalg/skyline_lu.hpp"
#include "../linalg/sparse_matrix.hpp"
#include "../mesh/mesh.hpp"
#include "../rve/rve_problem.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "settings.hpp"

namespace fescale::macro {

using linalg::kNoIndex;

struct IterationTrace {
    double residual = 0.0;       // ||R_free||_inf
    double reference = 0.0;      // macro force scale of the convergence test
    double micro_residual = 0.0; // max over RVEs of ||r||_inf / reference
    std::size_t micro_iterations = 0;
    std::size_t factorizations = 0;
    std::size_t micro_solves = 0;
    std::size_t nonlinear_rves = 0; // RVEs whose current or cached system is not elastic
    std::size_t plastic_rves = 0;
};

struct IncrementRecord {
    std::size_t increment = 0;
    double load_factor = 0.0;
    double dt = 0.0;
    bool converged = true;
    std::size_t macro_iters = 0;
    std::size_t rejected_macro_iters = 0;
    std::size_t micro_iters_total = 0;
    std::size_t max_micro_iters = 0;
    std::size_t factorizations = 0; // micro
    std::size_t micro_solves = 0;
    std::size_t macro_factorizations = 0;
    double wall_ms = 0.0;
    std::size_t cut_events = 0;
    StepEvent next_step = StepEvent::hold;
    bool plastic = false;
    std::vector<IterationTrace> trace;
};

struct CurvePoint {
    double load_factor = 0.0;
    double control_value = 0.0;
    double reaction = 0.0;
};

struct SolveReport {
    Scheme scheme = Scheme::staggered;
    std::vector<IncrementRecord> increments;
    std::vector<CurvePoint> curve;
    bool converged = false;
    std::string message;
    std::size_t setup_factorizations = 0;
    Eigen::VectorXd displacement;
    std::vector<std::vector<double>> alpha_bar; // committed, per RVE and micro point

    template <class F>
    auto sum(F field) const
    {
        decltype(field(IncrementRecord{})) total{};
        for (const auto& r : increments) total += field(r);
        return total;
    }
    std::size_t total_macro_iters() const { return sum([](const IncrementRecord& r) { return r.macro_iters; }); }
    std::size_t total_micro_iters() const { return sum([](const IncrementRecord& r) { return r.micro_iters_total; }); }
    std::size_t total_factorizations() const { return sum([](const IncrementRecord& r) { return r.factorizations; }); }
    std::size_t total_micro_solves() const { return sum([](const IncrementRecord& r) { return r.micro_solves; }); }
    std::size_t total_cut_events() const { return sum([](const IncrementRecord& r) { return r.cut_events; }); }
    double total_wall_ms() const { return sum([](const IncrementRecord& r) { return r.wall_ms; }); }
};

/// Û⁰ = Û_n + ratio (Û_n - Û_{n-1}); returns Û_n when disabled.
inline Eigen::VectorXd extrapolate_initial_guess(const Eigen::VectorXd& current, const Eigen::VectorXd& previous,
                                                 double dt_ratio, bool enabled)
{
    if (!enabled) return current;
    return current + dt_ratio * (current - previous);
}

/// Post-hoc check of quadratic terminal convergence on the last three residuals.
inline bool quadratic_ratio_test(const std::vector<IterationTrace>& trace, double order = 1.5, double noise = 1e-13)
{
    if (trace.size() < 3) return false;
    const double r1 = trace[trace.size() - 3].residual / trace[trace.size() - 3].reference;
    const double r2 = trace[trace.size() - 2].residual / trace[trace.size() - 2].reference;
    const double r3 = trace.back().residual / trace.back().reference;
    if (!(r1 > 0.0 && r2 > 0.0 && r2 < r1 && r1 < 1.0)) return false;
    if (r3 <= noise) return true;
    return std::log(r3 / r2) / std::log(r2 / r1) >= order;
}

class TwoScaleSolver {
public:
    TwoScaleSolver(TwoScaleModel model, SolverSettings settings)
        : model_(std::move(model)), settings_(settings)
    {
        model_.validate();
        settings_.validate();
        const mesh::Mesh& m = model_.macro_mesh;
        points_ = mesh::build_integration_points(m);

        const std::size_t ndof = m.num_dofs();
        equation_.assign(ndof, 0);
        for (const auto& p : model_.prescribed) equation_[p.dof] = kNoIndex;
        for (std::size_t d = 0; d < ndof; ++d) {
            if (equation_[d] != kNoIndex) equation_[d] = n_free_++;
        }
        f_ext_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ndof));
        for (const auto& l : model_.loads) f_ext_[static_cast<Eigen::Index>(l.dof)] += l.value;

        pattern_ = mesh::structure_of_stiffness(m, equation_, n_free_);
        if (n_free_ > 0) symbolic_ = linalg::analyze(pattern_, linalg::compute_ordering(pattern_));
        const linalg::SparseMatrix probe(pattern_);
        for (std::size_t e = 0; e < m.num_elements(); ++e) {
            std::vector<std::size_t> dofs;
            for (std::size_t node : mesh::element_nodes(m, e)) dofs.insert(dofs.end(), {2 * node, 2 * node + 1});
            std::vector<std::size_t> slots;
            for (std::size_t a : dofs) {
                for (std::size_t b : dofs) {
                    const std::size_t ea = equation_[a];
                    const std::size_t eb = equation_[b];
                    slots.push_back(ea == kNoIndex || eb == kNoIndex ? kNoIndex : probe.find(ea, eb));
                }
            }
            element_dofs_.push_back(std::move(dofs));
            element_slots_.push_back(std::move(slots));
        }

        double e_max = 0.0;
        for (const auto& p : model_.phases) e_max = std::max(e_max, material::elastic_part(p).youngs_modulus);
        const auto [lo, hi] = m.bounds();
        floor_ = 1e-8 * e_max * std::max(hi.x() - lo.x(), hi.y() - lo.y());

        const bool store = model_.scheme != Scheme::monolithic;
        rves_.reserve(points_.size());
        for (std::size_t a = 0; a < points_.size(); ++a) rves_.emplace_back(model_.rve, model_.phases, store);
        outputs_.resize(points_.size());
        plastic_.assign(points_.size(), 0);
        plastic_n_ = plastic_;
        U_ = U_n_ = U_nm1_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ndof));
    }

    const TwoScaleModel& model() const { return model_; }
    const SolverSettings& settings() const { return settings_; }
    const std::vector<rve::RveProblem>& rves() const { return rves_; }
    const std::vector<mesh::IntegrationPoint>& points() const { return points_; }
    const Eigen::VectorXd& displacement() const { return U_; }
    std::size_t num_free() const { return n_free_; }

    SolveReport run()
    {
        SolveReport report;
        report.scheme = model_.scheme;
        parallel_for(rves_.size(), settings_.parallel_workers, [&](std::size_t a) { rves_[a].initialize(); });
        for (const auto& r : rves_) report.setup_factorizations += r.counters().setup_factorizations;
        U_.setZero();
        U_n_.setZero();
        U_nm1_.setZero();
        committed_ = 1;
        plastic_.assign(rves_.size(), 0);
        plastic_n_ = plastic_;

        const double t_end = settings_.t_end;
        double t = 0.0;
        double dt = settings_.dt_initial;
        double dt_prev = dt;
        IncrementRecord pending; // work of rejected attempts
        report.converged = true;

        while (t < t_end) {
            double step = dt;
            double t_new = t + step;
            if (t_new >= t_end * (1.0 - 1e-12)) {
                t_new = t_end;
                step = t_end - t;
            }
            const double ratio = step / dt_prev;
            Attempt attempt = newton_increment(t_new, step, ratio);
            IncrementRecord& rec = attempt.record;
            if (!attempt.converged) {
                for (auto& r : rves_) r.rollback();
                U_ = U_n_;
                plastic_ = plastic_n_;
                fold(pending, rec);
                pending.rejected_macro_iters += rec.macro_iters;
                ++pending.cut_events;
                const StepDecision d = adapt_step({true, 0, 0}, step, settings_, model_.scheme);
                if (d.event == StepEvent::abort) {
                    pending.increment = report.increments.size() + 1;
                    pending.load_factor = t_new;
                    pending.dt = step;
                    pending.converged = false;
                    pending.next_step = StepEvent::abort;
                    report.increments.push_back(pending);
                    report.converged = false;
                    report.message = "step size fell below dt_min at load factor " + std::to_string(t_new) +
                                     " (" + attempt.failure + ")";
                    break;
                }
                dt = d.dt;
                continue;
            }

            for (auto& r : rves_) r.commit();
            U_nm1_ = U_n_;
            U_n_ = U_;
            plastic_n_ = plastic_;
            ++committed_;

            rec.increment = report.increments.size() + 1;
            rec.rejected_macro_iters = pending.rejected_macro_iters;
            rec.cut_events = pending.cut_events;
            fold(rec, pending);
            pending = IncrementRecord{};

            const StepDecision d =
                adapt_step({false, rec.max_micro_iters, rec.macro_iters}, step, settings_, model_.scheme);
            rec.next_step = d.event;
            report.curve.push_back(curve_point(t_new));
            report.increments.push_back(std::move(rec));
            t = t_new;
            dt_prev = step;
            dt = d.dt;
        }

        report.displacement = U_n_;
        report.alpha_bar.reserve(rves_.size());
        for (const auto& r : rves_) {
            std::vector<double> alpha;
            alpha.reserve(r.committed_states().size());
            for (const auto& s : r.committed_states()) alpha.push_back(s.alpha_bar);
            report.alpha_bar.push_back(std::move(alpha));
        }
        return report;
    }

private:
    struct Attempt {
        bool converged = false;
        std::string failure;
        IncrementRecord record;
    };

    struct Work {
        std::size_t factorizations = 0;
        std::size_t solves = 0;
    };

    Work micro_work() const
    {
        Work w;
        for (const auto& r : rves_) {
            const auto& c = r.counters();
            w.factorizations += c.factorizations;
            w.solves += c.update_solves + c.corrections + c.condensation_solves;
        }
        return w;
    }

    static void fold(IncrementRecord& into, const IncrementRecord& from)
    {
        into.micro_iters_total += from.micro_iters_total;
        into.factorizations += from.factorizations;
        into.micro_solves += from.micro_solves;
        into.macro_factorizations += from.macro_factorizations;
        into.wall_ms += from.wall_ms;
    }

    rve::Vector4 gradient_at(std::size_t a) const
    {
        const auto& ip = points_[a];
        const auto& dofs = element_dofs_[ip.element];
        Eigen::VectorXd ue(static_cast<Eigen::Index>(dofs.size()));
        for (std::size_t k = 0; k < dofs.size(); ++k) ue[static_cast<Eigen::Index>(k)] = U_[static_cast<Eigen::Index>(dofs[k])];
        return ip.b_operator * ue;
    }

    struct MacroSystem {
        Eigen::VectorXd force;    // from the stress driving the iteration
        Eigen::VectorXd physical; // from the homogenized stress
        linalg::SparseMatrix stiffness;
    };

    MacroSystem assemble_macro(bool algorithmic) const
    {
        MacroSystem s;
        const auto ndof = static_cast<Eigen::Index>(model_.macro_mesh.num_dofs());
        s.force = Eigen::VectorXd::Zero(ndof);
        s.physical = Eigen::VectorXd::Zero(ndof);
        s.stiffness = linalg::SparseMatrix(pattern_);
        auto values = s.stiffness.values();
        for (std::size_t a = 0; a < points_.size(); ++a) {
            const auto& ip = points_[a];
            const auto& out = outputs_[a];
            const auto& dofs = element_dofs_[ip.element];
            const auto& slots = element_slots_[ip.element];
            const auto nd = static_cast<Eigen::Index>(dofs.size());
            const Eigen::VectorXd fe = ip.weight * ip.b_operator.transpose() * (algorithmic ? out.sigma_alg : out.sigma_bar);
            const Eigen::VectorXd fp = ip.weight * ip.b_operator.transpose() * out.sigma_bar;
            const Eigen::MatrixXd ke = ip.weight * ip.b_operator.transpose() * out.c_tangent * ip.b_operator;
            for (Eigen::Index r = 0; r < nd; ++r) {
                const auto ur = static_cast<std::size_t>(r);
                s.force[static_cast<Eigen::Index>(dofs[ur])] += fe[r];
                s.physical[static_cast<Eigen::Index>(dofs[ur])] += fp[r];
                for (Eigen::Index c = 0; c < nd; ++c) {
                    const std::size_t slot = slots[ur * dofs.size() + static_cast<std::size_t>(c)];
                    if (slot != kNoIndex) values[slot] += ke(r, c);
                }
            }
        }
        return s;
    }

    Attempt newton_increment(double t_new, double dt, double ratio)
    {
        using clock = std::chrono::steady_clock;
        const auto start = clock::now();
        const Work w0 = micro_work();
        const bool staggered = model_.scheme == Scheme::staggered;
        const bool extrapolate = settings_.extrapolate && committed_ >= 2;

        Attempt at;
        IncrementRecord& rec = at.record;
        rec.load_factor = t_new;
        rec.dt = dt;

        U_ = extrapolate_initial_guess(U_n_, U_nm1_, ratio, extrapolate);
        for (const auto& p : model_.prescribed) U_[static_cast<Eigen::Index>(p.dof)] = t_new * p.value;
        for (auto& r : rves_) {
            r.begin_increment();
            if (staggered) r.predict(ratio, settings_.extrapolate);
        }

        const std::size_t n = rves_.size();
        std::vector<char> failed(n, 0);
        double reference = 0.0;
        const auto finish = [&](bool ok, std::string why) {
            at.converged = ok;
            at.failure = std::move(why);
            const Work w1 = micro_work();
            rec.factorizations = w1.factorizations - w0.factorizations;
            rec.micro_solves = w1.solves - w0.solves;
            rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
            return std::move(at);
        };

        for (std::size_t k = 0; k < settings_.max_macro_iter; ++k) {
            rec.macro_iters = k + 1;
            std::fill(failed.begin(), failed.end(), 0);
            const Work before = micro_work();
            parallel_for(n, settings_.parallel_workers, [&](std::size_t a) {
                try {
                    const rve::Vector4 H = gradient_at(a);
                    if (staggered) {
                        outputs_[a] = rves_[a].solve_staggered(H, settings_.tol_micro, settings_.n_max);
                    } else {
                        rves_[a].update_monolithic(H);
                        outputs_[a] = rves_[a].refresh();
                    }
                    const auto& o = outputs_[a];
                    if (!o.sigma_alg.allFinite() || !o.c_tangent.allFinite() || !std::isfinite(o.residual_norm)) failed[a] = 1;
                } catch (const rve::MicroDivergence&) {
                    failed[a] = 1;
                } catch (const linalg::SingularMatrixError&) {
                    failed[a] = 1;
                }
            });

            IterationTrace tr;
            const Work after = micro_work();
            tr.factorizations = after.factorizations - before.factorizations;
            tr.micro_solves = after.solves - before.solves;
            for (std::size_t a = 0; a < n; ++a) {
                if (failed[a]) return finish(false, "micro problem " + std::to_string(a) + " failed");
                const auto& o = outputs_[a];
                tr.micro_iterations += o.micro_iterations;
                tr.micro_residual = std::max(tr.micro_residual, o.residual_norm / o.reference);
                if (o.plastic || plastic_[a]) ++tr.nonlinear_rves;
                if (o.plastic) ++tr.plastic_rves;
                rec.max_micro_iters = std::max(rec.max_micro_iters, o.micro_iterations);
                plastic_[a] = o.plastic ? 1 : 0;
            }
            rec.micro_iters_total += tr.micro_iterations;
            rec.plastic = tr.plastic_rves > 0;

            MacroSystem sys = assemble_macro(!staggered);
            if (!sys.force.allFinite()) return finish(false, "non-finite macro force");
            reference = std::max(reference, sys.force.cwiseAbs().maxCoeff());
            Eigen::VectorXd residual(static_cast<Eigen::Index>(n_free_));
            for (std::size_t d = 0; d < equation_.size(); ++d) {
                if (equation_[d] == kNoIndex) continue;
                const auto di = static_cast<Eigen::Index>(d);
                residual[static_cast<Eigen::Index>(equation_[d])] = sys.force[di] - t_new * f_ext_[di];
            }
            tr.residual = n_free_ == 0 ? 0.0 : residual.cwiseAbs().maxCoeff();
            tr.reference = std::max(reference, floor_);
            rec.trace.push_back(tr);
            physical_ = std::move(sys.physical);

            bool micro_ok = true;
            if (!staggered) {
                for (const auto& o : outputs_) micro_ok = micro_ok && o.converged(settings_.tol_micro);
            }
            if (tr.residual <= settings_.tol_macro * tr.reference && micro_ok) return finish(true, {});
            if (k + 1 == settings_.max_macro_iter) break;

            try {
                const linalg::Factorization f(sys.stiffness, symbolic_);
                ++rec.macro_factorizations;
                const Eigen::VectorXd du = f.solve(residual);
                for (std::size_t d = 0; d < equation_.size(); ++d) {
                    if (equation_[d] != kNoIndex) U_[static_cast<Eigen::Index>(d)] -= du[static_cast<Eigen::Index>(equation_[d])];
                }
            } catch (const linalg::SingularMatrixError&) {
                return finish(false, "singular macro stiffness");
            }
        }
        return finish(false, "macro Newton did not converge in " + std::to_string(settings_.max_macro_iter) + " iterations");
    }

    CurvePoint curve_point(double t) const
    {
        CurvePoint p;
        p.load_factor = t;
        if (!model_.control_dofs.empty()) p.control_value = U_n_[static_cast<Eigen::Index>(model_.control_dofs.front())];
        for (std::size_t c : model_.control_dofs) p.reaction += physical_[static_cast<Eigen::Index>(c)];
        return p;
    }

    TwoScaleModel model_;
    SolverSettings settings_;
    std::vector<mesh::IntegrationPoint> points_;
    std::vector<std::size_t> equation_;
    std::size_t n_free_ = 0;
    Eigen::VectorXd f_ext_;
    linalg::SparsityPattern pattern_;
    std::shared_ptr<const linalg::SymbolicFactorization> symbolic_;
    std::vector<std::vector<std::size_t>> element_dofs_;
    std::vector<std::vector<std::size_t>> element_slots_;
    double floor_ = 0.0;

    std::vector<rve::RveProblem> rves_;
    std::vector<rve::HomogenizedOutput> outputs_;
    std::vector<char> plastic_, plastic_n_; // plastic flag of the latest evaluation, current and committed
    Eigen::VectorXd U_, U_n_, U_nm1_;
    Eigen::VectorXd physical_;
    std::size_t committed_ = 0;
};

inline SolveReport run(const TwoScaleModel& model, const SolverSettings& settings)
{
    TwoScaleSolver solver(model, settings);
    return solver.run();
}

} // namespace fescale::macro
