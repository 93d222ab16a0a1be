// wqed -- command-line front door.  Every subcommand reads a JSON run config,
// executes the experiment through the C API, and writes artifacts (CSV tables,
// JSON reports, manifest.json, plots.gp) into the output directory.

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "wqed/wqed.h"

namespace {

struct SubcommandDef {
    const char* name;
    const char* description;
};

constexpr SubcommandDef kSubcommands[] = {
    {"groundstate", "minimum-energy state, photon cloud and correlator bounds"},
    {"commutator", "free-field commutator vs packet separation"},
    {"scatter", "time-domain scattering run (density, two-photon field)"},
    {"fluorescence-scan", "fluorescence vs packet separation"},
    {"cluster-check", "two-photon vs product-of-singles factorization"},
    {"smatrix", "analytic transmission matrix on a momentum grid"},
    {"decay-fit", "fluorescence decay-rate extraction from the analytic kernel"},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"few-photon scattering in a waveguide coupled to a point scatterer"};
    app.set_version_flag("--version", std::string(wqed_version()));
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;  // < 0: use the config's seed
    int threads = 0;         // 0: use the config's thread count

    for (const auto& def : kSubcommands) {
        CLI::App* sub = app.add_subcommand(def.name, def.description);
        sub->add_option("--config", config_path, "run configuration JSON")
            ->required();
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->add_option("--seed", seed, "RNG seed (overrides the config)");
        sub->add_option("--threads", threads, "worker threads (overrides the config)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // flag/usage problems are configuration errors
    }

    const CLI::App* active = app.get_subcommands().front();
    const wqed_status status = wqed_run_config_file(
        config_path.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(), seed, threads,
        active->get_name().c_str());
    if (status != WQED_OK) {
        std::fprintf(stderr, "error: %s\n", wqed_last_error());
        return static_cast<int>(status);
    }
    return 0;
}
