#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "../macro/solver.hpp"
#include "config.hpp"

namespace fescale::cli {

inline std::string format_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_number(std::size_t v) { return std::to_string(v); }

inline void write_curve_csv(std::ostream& out, const macro::SolveReport& r)
{
    out << "load_factor,control_value,reaction\n";
    for (const auto& p : r.curve) {
        out << format_number(p.load_factor) << ',' << format_number(p.control_value) << ',' << format_number(p.reaction) << '\n';
    }
}

inline void write_stats_csv(std::ostream& out, const macro::SolveReport& r)
{
    out << "increment,dt,macro_iters,micro_iters_total,factorizations,wall_ms,cut_events\n";
    for (const auto& rec : r.increments) {
        out << rec.increment << ',' << format_number(rec.dt) << ',' << rec.macro_iters << ',' << rec.micro_iters_total << ','
            << rec.factorizations << ',' << format_number(rec.wall_ms) << ',' << rec.cut_events << '\n';
    }
}

struct SchemeRun {
    macro::Scheme scheme = macro::Scheme::staggered;
    macro::SolveReport report;
    std::filesystem::path curve_csv;
    std::filesystem::path stats_csv;
};

struct SummaryRow {
    std::string scheme;
    bool converged = false;
    std::size_t increments = 0;
    std::size_t macro_iters = 0;
    std::size_t micro_iters_total = 0;
    std::size_t factorizations = 0;
    double wall_ms = 0.0;
    std::size_t cut_events = 0;
    double final_control = 0.0;
    double final_reaction = 0.0;
    double wall_ratio = 1.0;          // relative to the baseline scheme
    double micro_iters_ratio = 1.0;
    double factorization_ratio = 1.0;
    double reaction_rel_diff = 0.0;   // max pointwise, NaN when the load factors differ
};

struct SuiteResult {
    std::vector<SchemeRun> runs;
    std::vector<SummaryRow> summary;
    std::filesystem::path summary_csv;
    int exit_code = 0;
};

inline double ratio(double a, double b) { return b == 0.0 ? (a == 0.0 ? 1.0 : std::numeric_limits<double>::infinity()) : a / b; }

/// Largest pointwise relative reaction difference, NaN if the curves are not on the same load factors.
inline double curve_difference(const macro::SolveReport& a, const macro::SolveReport& b)
{
    if (a.curve.size() != b.curve.size()) return std::numeric_limits<double>::quiet_NaN();
    double d = 0.0;
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
        if (a.curve[i].load_factor != b.curve[i].load_factor) return std::numeric_limits<double>::quiet_NaN();
        const double scale = std::max({std::abs(a.curve[i].reaction), std::abs(b.curve[i].reaction), 1e-300});
        d = std::max(d, std::abs(a.curve[i].reaction - b.curve[i].reaction) / scale);
    }
    return d;
}

/// Baseline for the ratios: staggered when selected, otherwise the first scheme.
inline std::vector<SummaryRow> summarize(const std::vector<SchemeRun>& runs)
{
    std::vector<SummaryRow> rows;
    if (runs.empty()) return rows;
    std::size_t base = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i].scheme == macro::Scheme::staggered) {
            base = i;
            break;
        }
    }
    for (const auto& run : runs) {
        const auto& r = run.report;
        SummaryRow row;
        row.scheme = std::string(macro::to_string(run.scheme));
        row.converged = r.converged;
        row.increments = r.increments.size();
        row.macro_iters = r.total_macro_iters();
        row.micro_iters_total = r.total_micro_iters();
        row.factorizations = r.total_factorizations();
        row.wall_ms = r.total_wall_ms();
        row.cut_events = r.total_cut_events();
        if (!r.curve.empty()) {
            row.final_control = r.curve.back().control_value;
            row.final_reaction = r.curve.back().reaction;
        }
        rows.push_back(row);
    }
    const SummaryRow b = rows[base];
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].wall_ratio = ratio(rows[i].wall_ms, b.wall_ms);
        rows[i].micro_iters_ratio = ratio(static_cast<double>(rows[i].micro_iters_total), static_cast<double>(b.micro_iters_total));
        rows[i].factorization_ratio = ratio(static_cast<double>(rows[i].factorizations), static_cast<double>(b.factorizations));
        rows[i].reaction_rel_diff = curve_difference(runs[i].report, runs[base].report);
    }
    return rows;
}

inline void write_summary_csv(std::ostream& out, const std::string& name, const std::vector<SummaryRow>& rows)
{
    out << "name,scheme,converged,increments,macro_iters,micro_iters_total,factorizations,wall_ms,cut_events,"
           "final_control,final_reaction,wall_ratio,micro_iters_ratio,factorization_ratio,reaction_rel_diff\n";
    for (const auto& r : rows) {
        out << name << ',' << r.scheme << ',' << (r.converged ? 1 : 0) << ',' << r.increments << ',' << r.macro_iters << ','
            << r.micro_iters_total << ',' << r.factorizations << ',' << format_number(r.wall_ms) << ',' << r.cut_events << ','
            << format_number(r.final_control) << ',' << format_number(r.final_reaction) << ',' << format_number(r.wall_ratio)
            << ',' << format_number(r.micro_iters_ratio) << ',' << format_number(r.factorization_ratio) << ','
            << format_number(r.reaction_rel_diff) << '\n';
    }
}

/// Runs every selected scheme and writes curves, statistics and the comparison summary.
inline SuiteResult run_suite(const RunConfig& config, std::ostream& log)
{
    SuiteResult result;
    std::filesystem::create_directories(config.output_dir);
    {
        std::ofstream echo(config.output_dir / (config.name + "_config.json"));
        echo << to_json(config).dump(2) << '\n';
    }
    for (macro::Scheme scheme : config.schemes) {
        SchemeRun run;
        run.scheme = scheme;
        run.report = macro::run(build_model(config, scheme), config.settings);
        const std::string stem = config.name + "_" + std::string(macro::to_string(scheme));
        run.curve_csv = config.output_dir / (stem + "_curve.csv");
        run.stats_csv = config.output_dir / (stem + "_stats.csv");
        {
            std::ofstream out(run.curve_csv);
            write_curve_csv(out, run.report);
        }
        {
            std::ofstream out(run.stats_csv);
            write_stats_csv(out, run.report);
        }
        const auto& r = run.report;
        char line[256];
        std::snprintf(line, sizeof line, "%-18s %s  increments=%zu macro=%zu micro=%zu factorizations=%zu cuts=%zu wall=%.1f ms",
                      std::string(macro::to_string(scheme)).c_str(), r.converged ? "converged" : "FAILED", r.increments.size(),
                      r.total_macro_iters(), r.total_micro_iters(), r.total_factorizations(), r.total_cut_events(),
                      r.total_wall_ms());
        log << config.name << ": " << line << '\n';
        if (!r.converged) {
            log << config.name << ": " << macro::to_string(scheme) << ": " << r.message << '\n';
            result.exit_code = 1;
        }
        result.runs.push_back(std::move(run));
    }
    result.summary = summarize(result.runs);
    result.summary_csv = config.output_dir / (config.name + "_summary.csv");
    std::ofstream out(result.summary_csv);
    write_summary_csv(out, config.name, result.summary);
    for (const auto& row : result.summary) {
        log << config.name << ": " << row.scheme << " factorization_ratio=" << format_number(row.factorization_ratio)
            << " wall_ratio=" << format_number(row.wall_ratio) << " reaction_rel_diff=" << format_number(row.reaction_rel_diff)
            << '\n';
    }
    return result;
}

} // namespace fescale::cli
