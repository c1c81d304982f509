#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "../macro/model.hpp"
#include "../macro/settings.hpp"
#include "../material/j2_plasticity.hpp"
#include "benchmarks.hpp"
#include "mesh_io.hpp"

namespace fescale::cli {

using nlohmann::json;

/// Invalid or unreadable configuration; `field` names the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field))
    {
    }
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Axis-aligned node selector; absent bounds are unbounded.
struct Region {
    double x_min = -std::numeric_limits<double>::infinity();
    double x_max = std::numeric_limits<double>::infinity();
    double y_min = -std::numeric_limits<double>::infinity();
    double y_max = std::numeric_limits<double>::infinity();

    bool contains(const mesh::Vec2& p, double tol) const
    {
        return p.x() >= x_min - tol && p.x() <= x_max + tol && p.y() >= y_min - tol && p.y() <= y_max + tol;
    }
};

struct BoundarySpec {
    enum class Kind { displacement, force };
    Region region;
    int component = 0;
    Kind kind = Kind::displacement;
    double value = 0.0; // at load factor 1, per selected node
};

struct RunConfig {
    std::string name;
    std::string benchmark; // empty when macro_mesh is given
    std::filesystem::path macro_mesh;
    std::vector<BoundarySpec> boundary;
    std::optional<Region> control_region;
    int control_component = 0;
    std::string rve_name;
    std::filesystem::path rve_mesh;
    std::vector<material::MaterialParams> materials;
    bool elastic_only = false;
    macro::SolverSettings settings;
    std::vector<macro::Scheme> schemes;
    std::filesystem::path output_dir = "results";
};

namespace detail {

inline const std::set<std::string>& known_solver_keys()
{
    static const std::set<std::string> keys = {"tol_macro", "tol_micro", "max_macro_iter", "n_max", "t_end",
                                               "dt_initial", "dt_min", "dt_max", "cut_factor", "growth_factor",
                                               "extrapolate", "parallel_workers"};
    return keys;
}

template <class T>
T get(const json& j, const std::string& field)
{
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(field, std::string("wrong type (") + j.type_name() + ")");
    }
}

inline double number(const json& j, const std::string& field)
{
    if (!j.is_number()) throw ConfigError(field, std::string("expected a number, got ") + j.type_name());
    return j.get<double>();
}

inline std::size_t count(const json& j, const std::string& field)
{
    if (!j.is_number_integer() || j.get<long long>() < 0) throw ConfigError(field, "expected a non-negative integer");
    return j.get<std::size_t>();
}

inline void only_keys(const json& j, const std::string& field, const std::set<std::string>& keys)
{
    if (!j.is_object()) throw ConfigError(field, "expected an object");
    for (const auto& [k, v] : j.items()) {
        if (!keys.count(k)) throw ConfigError(field.empty() ? k : field + "." + k, "unknown key");
    }
}

inline int component(const json& j, const std::string& field)
{
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "x") return 0;
        if (s == "y") return 1;
    } else if (j.is_number_integer()) {
        const auto c = j.get<int>();
        if (c == 0 || c == 1) return c;
    }
    throw ConfigError(field, "component must be \"x\", \"y\", 0 or 1");
}

inline Region region(const json& j, const std::string& field)
{
    only_keys(j, field, {"x", "y"});
    Region r;
    const auto range = [&](const char* axis, double& lo, double& hi) {
        if (!j.contains(axis)) return;
        const json& a = j.at(axis);
        const std::string f = field + "." + axis;
        if (a.is_number()) {
            lo = hi = a.get<double>();
        } else if (a.is_array() && a.size() == 2) {
            lo = number(a[0], f + "[0]");
            hi = number(a[1], f + "[1]");
            if (lo > hi) throw ConfigError(f, "lower bound exceeds upper bound");
        } else {
            throw ConfigError(f, "expected a coordinate or a [min, max] pair");
        }
    };
    range("x", r.x_min, r.x_max);
    range("y", r.y_min, r.y_max);
    return r;
}

inline json region_to_json(const Region& r)
{
    json j = json::object();
    const auto put = [&](const char* axis, double lo, double hi) {
        if (std::isinf(lo) && std::isinf(hi)) return;
        j[axis] = json::array({lo, hi});
    };
    put("x", r.x_min, r.x_max);
    put("y", r.y_min, r.y_max);
    return j;
}

inline material::MaterialParams material_from(const json& j, const std::string& field)
{
    only_keys(j, field, {"E", "nu", "sigma0", "h"});
    for (const char* k : {"E", "nu"}) {
        if (!j.contains(k)) throw ConfigError(field + "." + k, "required");
    }
    material::ElasticParams e{number(j.at("E"), field + ".E"), number(j.at("nu"), field + ".nu")};
    material::MaterialParams p = e;
    if (j.contains("sigma0")) {
        const double h = j.contains("h") ? number(j.at("h"), field + ".h") : 0.0;
        p = material::PlasticParams{e, number(j.at("sigma0"), field + ".sigma0"), h};
    } else if (j.contains("h")) {
        throw ConfigError(field + ".h", "hardening modulus given without sigma0");
    }
    try {
        material::validate(p);
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(field, ex.what());
    }
    return p;
}

inline json material_to_json(const material::MaterialParams& p)
{
    const auto& e = material::elastic_part(p);
    json j = {{"E", e.youngs_modulus}, {"nu", e.poisson_ratio}};
    if (const auto* pl = std::get_if<material::PlasticParams>(&p)) {
        j["sigma0"] = pl->yield_stress;
        j["h"] = pl->hardening_modulus;
    }
    return j;
}

inline void apply_solver(const json& j, macro::SolverSettings& s)
{
    only_keys(j, "solver", known_solver_keys());
    const auto real = [&](const char* k, double& v) {
        if (j.contains(k)) v = number(j.at(k), std::string("solver.") + k);
    };
    const auto whole = [&](const char* k, std::size_t& v) {
        if (j.contains(k)) v = count(j.at(k), std::string("solver.") + k);
    };
    real("tol_macro", s.tol_macro);
    real("tol_micro", s.tol_micro);
    whole("max_macro_iter", s.max_macro_iter);
    whole("n_max", s.n_max);
    real("t_end", s.t_end);
    real("dt_initial", s.dt_initial);
    real("dt_min", s.dt_min);
    real("dt_max", s.dt_max);
    real("cut_factor", s.cut_factor);
    real("growth_factor", s.growth_factor);
    if (j.contains("extrapolate")) {
        if (!j.at("extrapolate").is_boolean()) throw ConfigError("solver.extrapolate", "expected true or false");
        s.extrapolate = j.at("extrapolate").get<bool>();
    }
    whole("parallel_workers", s.parallel_workers);
}

inline json solver_to_json(const macro::SolverSettings& s)
{
    return {{"tol_macro", s.tol_macro},
            {"tol_micro", s.tol_micro},
            {"max_macro_iter", s.max_macro_iter},
            {"n_max", s.n_max},
            {"t_end", s.t_end},
            {"dt_initial", s.dt_initial},
            {"dt_min", s.dt_min},
            {"dt_max", s.dt_max},
            {"cut_factor", s.cut_factor},
            {"growth_factor", s.growth_factor},
            {"extrapolate", s.extrapolate},
            {"parallel_workers", s.parallel_workers}};
}

} // namespace detail

inline void validate_settings(const macro::SolverSettings& s)
{
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("solver", e.what());
    }
}

/// Builds a validated configuration. Relative paths resolve against `base_dir`.
inline RunConfig parse_config(const json& j, const std::filesystem::path& base_dir = {})
{
    using detail::only_keys;
    only_keys(j, "", {"name", "benchmark", "macro_mesh", "boundary", "control", "rve", "materials", "elastic_only",
                      "solver", "schemes", "output"});
    RunConfig c;
    const auto resolve = [&](const std::filesystem::path& p) { return p.is_absolute() || base_dir.empty() ? p : base_dir / p; };

    const bool has_bench = j.contains("benchmark");
    const bool has_mesh = j.contains("macro_mesh");
    if (has_bench == has_mesh) throw ConfigError("benchmark", "give exactly one of 'benchmark' and 'macro_mesh'");

    std::optional<Benchmark> bench;
    if (has_bench) {
        c.benchmark = detail::get<std::string>(j.at("benchmark"), "benchmark");
        try {
            bench = make_benchmark(c.benchmark);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("benchmark", e.what());
        }
        c.rve_name = bench->rve;
        c.materials = bench->phases;
        c.settings = bench->settings;
        if (j.contains("boundary") || j.contains("control")) {
            throw ConfigError("boundary", "boundary conditions of a built-in benchmark are fixed");
        }
    } else {
        c.macro_mesh = resolve(detail::get<std::string>(j.at("macro_mesh"), "macro_mesh"));
        if (!std::filesystem::exists(c.macro_mesh)) throw ConfigError("macro_mesh", "file '" + c.macro_mesh.string() + "' does not exist");
        if (!j.contains("boundary") || !j.at("boundary").is_array() || j.at("boundary").empty()) {
            throw ConfigError("boundary", "a non-empty list is required with macro_mesh");
        }
        for (std::size_t i = 0; i < j.at("boundary").size(); ++i) {
            const json& b = j.at("boundary")[i];
            const std::string f = "boundary[" + std::to_string(i) + "]";
            only_keys(b, f, {"region", "component", "displacement", "force"});
            BoundarySpec s;
            if (!b.contains("region")) throw ConfigError(f + ".region", "required");
            s.region = detail::region(b.at("region"), f + ".region");
            if (!b.contains("component")) throw ConfigError(f + ".component", "required");
            s.component = detail::component(b.at("component"), f + ".component");
            if (b.contains("displacement") == b.contains("force")) throw ConfigError(f, "give exactly one of 'displacement' and 'force'");
            s.kind = b.contains("force") ? BoundarySpec::Kind::force : BoundarySpec::Kind::displacement;
            s.value = detail::number(b.contains("force") ? b.at("force") : b.at("displacement"), f);
            c.boundary.push_back(s);
        }
        if (j.contains("control")) {
            const json& ctl = j.at("control");
            only_keys(ctl, "control", {"region", "component"});
            if (!ctl.contains("region")) throw ConfigError("control.region", "required");
            c.control_region = detail::region(ctl.at("region"), "control.region");
            c.control_component = ctl.contains("component") ? detail::component(ctl.at("component"), "control.component") : 0;
        }
    }

    if (j.contains("name")) c.name = detail::get<std::string>(j.at("name"), "name");
    if (c.name.empty()) c.name = has_bench ? c.benchmark : c.macro_mesh.stem().string();

    if (j.contains("rve")) {
        const json& r = j.at("rve");
        if (r.is_string()) {
            c.rve_name = r.get<std::string>();
            const auto names = builtin_rve_names();
            if (std::find(names.begin(), names.end(), c.rve_name) == names.end()) {
                throw ConfigError("rve", "unknown built-in RVE '" + c.rve_name + "'");
            }
        } else {
            only_keys(r, "rve", {"mesh"});
            if (!r.contains("mesh")) throw ConfigError("rve.mesh", "required");
            c.rve_name.clear();
            c.rve_mesh = resolve(detail::get<std::string>(r.at("mesh"), "rve.mesh"));
            if (!std::filesystem::exists(c.rve_mesh)) throw ConfigError("rve.mesh", "file '" + c.rve_mesh.string() + "' does not exist");
        }
    } else if (!has_bench) {
        throw ConfigError("rve", "required with macro_mesh");
    }

    if (j.contains("materials")) {
        const json& m = j.at("materials");
        if (!m.is_array() || m.empty()) throw ConfigError("materials", "expected a non-empty list");
        c.materials.clear();
        for (std::size_t i = 0; i < m.size(); ++i) c.materials.push_back(detail::material_from(m[i], "materials[" + std::to_string(i) + "]"));
    } else if (!has_bench) {
        throw ConfigError("materials", "required with macro_mesh");
    }
    if (j.contains("elastic_only")) {
        if (!j.at("elastic_only").is_boolean()) throw ConfigError("elastic_only", "expected true or false");
        c.elastic_only = j.at("elastic_only").get<bool>();
    }

    if (j.contains("solver")) detail::apply_solver(j.at("solver"), c.settings);
    validate_settings(c.settings);

    if (j.contains("schemes")) {
        const json& s = j.at("schemes");
        const auto one = [&](const json& v, const std::string& f) {
            try {
                c.schemes.push_back(macro::parse_scheme(detail::get<std::string>(v, f)));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(f, e.what());
            }
        };
        if (s.is_string()) {
            one(s, "schemes");
        } else if (s.is_array()) {
            for (std::size_t i = 0; i < s.size(); ++i) one(s[i], "schemes[" + std::to_string(i) + "]");
        } else {
            throw ConfigError("schemes", "expected a scheme name or a list of them");
        }
    } else {
        c.schemes = {macro::Scheme::staggered, macro::Scheme::monolithic, macro::Scheme::monolithic_stored};
    }
    if (c.schemes.empty()) throw ConfigError("schemes", "select at least one scheme");

    if (j.contains("output")) c.output_dir = resolve(detail::get<std::string>(j.at("output"), "output"));
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open configuration file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string(), e.what());
    }
    return parse_config(j, path.parent_path());
}

/// Fully resolved configuration, defaults included.
inline json to_json(const RunConfig& c)
{
    json j;
    j["name"] = c.name;
    if (!c.benchmark.empty()) {
        j["benchmark"] = c.benchmark;
    } else {
        j["macro_mesh"] = c.macro_mesh.string();
        json b = json::array();
        for (const auto& s : c.boundary) {
            json e = {{"region", detail::region_to_json(s.region)}, {"component", s.component == 0 ? "x" : "y"}};
            e[s.kind == BoundarySpec::Kind::force ? "force" : "displacement"] = s.value;
            b.push_back(e);
        }
        j["boundary"] = b;
        if (c.control_region) {
            j["control"] = {{"region", detail::region_to_json(*c.control_region)}, {"component", c.control_component == 0 ? "x" : "y"}};
        }
    }
    if (!c.rve_name.empty()) {
        j["rve"] = c.rve_name;
    } else {
        j["rve"] = {{"mesh", c.rve_mesh.string()}};
    }
    j["materials"] = json::array();
    for (const auto& m : c.materials) j["materials"].push_back(detail::material_to_json(m));
    j["elastic_only"] = c.elastic_only;
    j["solver"] = detail::solver_to_json(c.settings);
    j["schemes"] = json::array();
    for (auto s : c.schemes) j["schemes"].push_back(std::string(macro::to_string(s)));
    j["output"] = c.output_dir.string();
    return j;
}

/// Macro model for one scheme, RVE geometry and phases attached.
inline macro::TwoScaleModel build_model(const RunConfig& c, macro::Scheme scheme)
{
    macro::TwoScaleModel m;
    m.scheme = scheme;
    if (!c.benchmark.empty()) {
        Benchmark b = make_benchmark(c.benchmark);
        m.macro_mesh = std::move(b.macro_mesh);
        m.prescribed = std::move(b.prescribed);
        m.loads = std::move(b.loads);
        m.control_dofs = std::move(b.control_dofs);
    } else {
        m.macro_mesh = read_mesh(c.macro_mesh);
        const auto [lo, hi] = m.macro_mesh.bounds();
        const double tol = 1e-9 * std::max(hi.x() - lo.x(), hi.y() - lo.y());
        for (std::size_t i = 0; i < c.boundary.size(); ++i) {
            const auto& s = c.boundary[i];
            const auto nodes = macro::select_nodes(m.macro_mesh, [&](const mesh::Vec2& x) { return s.region.contains(x, tol); });
            if (nodes.empty()) throw ConfigError("boundary[" + std::to_string(i) + "].region", "selects no node");
            for (std::size_t d : macro::component_dofs(nodes, s.component)) {
                if (s.kind == BoundarySpec::Kind::force) {
                    m.loads.push_back({d, s.value});
                } else {
                    m.prescribed.push_back({d, s.value});
                }
            }
        }
        if (c.control_region) {
            const auto nodes = macro::select_nodes(m.macro_mesh, [&](const mesh::Vec2& x) { return c.control_region->contains(x, tol); });
            if (nodes.empty()) throw ConfigError("control.region", "selects no node");
            m.control_dofs = macro::component_dofs(nodes, c.control_component);
        } else {
            // DOFs with a non-zero prescribed value, else the loaded DOFs
            for (const auto& p : m.prescribed) {
                if (p.value != 0.0) m.control_dofs.push_back(p.dof);
            }
            if (m.control_dofs.empty()) {
                for (const auto& l : m.loads) m.control_dofs.push_back(l.dof);
            }
        }
    }
    mesh::Mesh cell = c.rve_name.empty() ? read_mesh(c.rve_mesh) : builtin_rve(c.rve_name);
    for (const auto& b : cell.blocks) {
        if (b.phase >= c.materials.size()) {
            throw ConfigError("materials", "RVE mesh uses phase " + std::to_string(b.phase) + " but only " +
                                               std::to_string(c.materials.size()) + " materials are defined");
        }
    }
    m.rve = rve::make_geometry(std::move(cell));
    m.phases = c.elastic_only ? elastic_only(c.materials) : c.materials;
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("boundary", e.what());
    }
    return m;
}

} // namespace fescale::cli
