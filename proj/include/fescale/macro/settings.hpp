#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fescale::macro {

enum class Scheme { staggered, monolithic, monolithic_stored };

inline std::string_view to_string(Scheme s)
{
    switch (s) {
    case Scheme::staggered: return "staggered";
    case Scheme::monolithic: return "monolithic";
    case Scheme::monolithic_stored: return "monolithic-stored";
    }
    return "?";
}

inline Scheme parse_scheme(std::string_view name)
{
    if (name == "staggered") return Scheme::staggered;
    if (name == "monolithic") return Scheme::monolithic;
    if (name == "monolithic-stored" || name == "monolithic-stored-factorization") return Scheme::monolithic_stored;
    throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

inline bool is_monolithic(Scheme s) { return s != Scheme::staggered; }

struct SolverSettings {
    double tol_macro = 5e-3;
    double tol_micro = 5e-3;
    std::size_t max_macro_iter = 16;
    std::size_t n_max = 12; // micro iteration budget, also drives step adaptivity
    double t_end = 1.0;
    double dt_initial = 0.1;
    double dt_min = 1e-4;
    double dt_max = 0.25;
    double cut_factor = 0.5;
    double growth_factor = 1.5;
    bool extrapolate = true;
    std::size_t parallel_workers = 1;

    void validate() const
    {
        const auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
        if (!(tol_macro > 0.0)) fail("tol_macro must be positive");
        if (!(tol_micro > 0.0)) fail("tol_micro must be positive");
        if (max_macro_iter == 0) fail("max_macro_iter must be at least 1");
        if (n_max == 0) fail("n_max must be at least 1");
        if (!(t_end > 0.0)) fail("t_end must be positive");
        if (!(cut_factor > 0.0 && cut_factor < 1.0)) fail("cut_factor must lie in (0, 1)");
        if (!(growth_factor > 1.0)) fail("growth_factor must exceed 1");
        if (!(dt_min > 0.0)) fail("dt_min must be positive");
        if (!(dt_min <= dt_initial && dt_initial <= dt_max)) fail("require dt_min <= dt_initial <= dt_max");
        if (parallel_workers == 0) fail("parallel_workers must be at least 1");
    }
};

enum class StepEvent { cut, hold, grow, abort };

inline std::string_view to_string(StepEvent e)
{
    switch (e) {
    case StepEvent::cut: return "cut";
    case StepEvent::hold: return "hold";
    case StepEvent::grow: return "grow";
    case StepEvent::abort: return "abort";
    }
    return "?";
}

struct StepOutcome {
    bool cut_signal = false;
    std::size_t max_micro_iterations = 0; // largest per-RVE count in the increment
    std::size_t macro_iterations = 0;
};

struct StepDecision {
    double dt = 0.0;
    bool retry = false; // repeat the same target with the new dt
    StepEvent event = StepEvent::hold;
};

inline std::size_t half_up(std::size_t n) { return (n + 1) / 2; }

/// Cut on failure; grow when the increment needed at most half the budget.
inline StepDecision adapt_step(const StepOutcome& outcome, double dt, const SolverSettings& s, Scheme scheme)
{
    if (outcome.cut_signal) {
        const double next = s.cut_factor * dt;
        if (next < s.dt_min) return {next, false, StepEvent::abort};
        return {next, true, StepEvent::cut};
    }
    const bool easy = scheme == Scheme::staggered ? outcome.max_micro_iterations <= half_up(s.n_max)
                                                  : outcome.macro_iterations <= half_up(s.max_macro_iter);
    if (easy) return {std::min(s.growth_factor * dt, s.dt_max), false, StepEvent::grow};
    return {dt, false, StepEvent::hold};
}

} // namespace fescale::macro
