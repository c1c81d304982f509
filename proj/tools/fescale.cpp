#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fescale/cli/benchmarks.hpp"
#include "fescale/cli/config.hpp"
#include "fescale/cli/mesh_io.hpp"
#include "fescale/cli/self_check.hpp"
#include "fescale/cli/suite.hpp"
#include "fescale/mesh/mesh.hpp"

namespace {

using namespace fescale;

struct Overrides {
    std::vector<std::string> schemes;
    std::optional<std::size_t> workers;
    std::string out;
    bool elastic = false;
};

void add_overrides(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--schemes", o.schemes, "schemes to run (staggered, monolithic, monolithic-stored)")->delimiter(',');
    cmd->add_option("--workers", o.workers, "parallel RVE workers (overrides FESCALE_WORKERS)")->check(CLI::PositiveNumber);
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_flag("--elastic", o.elastic, "replace every plastic phase by its elastic part");
}

std::optional<std::size_t> env_workers()
{
    const char* v = std::getenv("FESCALE_WORKERS");
    if (v == nullptr || *v == '\0') return std::nullopt;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1) throw cli::ConfigError("FESCALE_WORKERS", "expected a positive integer, got '" + std::string(v) + "'");
    return static_cast<std::size_t>(n);
}

void apply(cli::RunConfig& c, const Overrides& o)
{
    if (!o.schemes.empty()) {
        c.schemes.clear();
        for (const auto& s : o.schemes) {
            try {
                c.schemes.push_back(macro::parse_scheme(s));
            } catch (const std::invalid_argument& e) {
                throw cli::ConfigError("--schemes", e.what());
            }
        }
    }
    if (o.workers) {
        c.settings.parallel_workers = *o.workers;
    } else if (const auto w = env_workers()) {
        c.settings.parallel_workers = *w;
    }
    if (!o.out.empty()) c.output_dir = o.out;
    if (o.elastic) c.elastic_only = true;
    cli::validate_settings(c.settings);
}

int run_config(cli::RunConfig c)
{
    std::cout << cli::to_json(c).dump(2) << '\n';
    return cli::run_suite(c, std::cout).exit_code;
}

int run_checks()
{
    int failed = 0;
    for (const auto& r : cli::run_self_checks()) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        failed += r.passed ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Two-scale FE2 solver for periodic elastoplastic microstructures"};
    app.require_subcommand(1);

    Overrides run_o, bench_o;
    std::string config_path, suite;

    auto* run = app.add_subcommand("run", "solve the problem described by a JSON configuration");
    run->add_option("config", config_path, "configuration file")->required();
    add_overrides(run, run_o);

    auto* bench = app.add_subcommand("bench", "run a built-in benchmark, or all of them");
    std::vector<std::string> choices = cli::benchmark_names();
    choices.push_back("all");
    bench->add_option("suite", suite, "benchmark name or 'all'")->required()->check(CLI::IsMember(choices));
    add_overrides(bench, bench_o);

    auto* check = app.add_subcommand("check", "run the built-in consistency checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (check->parsed()) return run_checks();
        if (run->parsed()) {
            auto c = cli::load_config(config_path);
            apply(c, run_o);
            return run_config(std::move(c));
        }
        const auto names = suite == "all" ? cli::benchmark_names() : std::vector<std::string>{suite};
        int code = 0;
        for (const auto& name : names) {
            auto c = cli::parse_config(nlohmann::json{{"benchmark", name}});
            apply(c, bench_o);
            code = std::max(code, run_config(std::move(c)));
        }
        return code;
    } catch (const cli::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
    } catch (const cli::MeshParseError& e) {
        std::cerr << "mesh error: " << e.what() << '\n';
    } catch (const mesh::MeshError& e) {
        std::cerr << "mesh error: " << e.what() << '\n';
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
    }
    return 2;
}
