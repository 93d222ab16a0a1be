// experiments.hpp -- experiment orchestration behind the CLI: resolved run
// configurations for every command, artifact emission (CSV tables, JSON
// reports, manifest, gnuplot scripts) into an output directory.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wqed/causality.hpp"
#include "wqed/dynamics.hpp"
#include "wqed/groundstate.hpp"
#include "wqed/smatrix.hpp"

namespace wqed::exp {

// Tag-style version string stamped into manifests and the C API.
const char* version();

enum class Command {
    GroundState,
    Commutator,
    Scatter,
    FluorescenceScan,
    ClusterCheck,
    SMatrix,
    DecayFit,
};

const char* command_name(Command c);
Command command_from_name(const std::string& name);  // throws config_error

// ---- per-command job payloads ---------------------------------------------

struct GroundStateJob {
    model::LatticeSpec lattice;
    ground::LanczosOptions lanczos;
};

struct CommutatorJob {
    packet::Envelope env1;
    packet::Envelope env2;
    packet::Dispersion dispersion;
    std::vector<double> separations;  // x1 - x2 samples
    double t_offset = 0.0;            // t1 - t2, fixed over the scan
};

struct ScatterJob {
    dynamics::ScatterConfig cfg;
};

struct FluorescenceJob {
    dynamics::FluorescenceScanConfig cfg;
};

struct ClusterJob {
    dynamics::ClusterCheckConfig cfg;
};

struct SMatrixJob {
    smx::ScattererSpec scatterer;
    std::vector<double> k_grid;  // evaluation momenta
};

// One simple-pole contribution to the plugged-in inelastic kernel.
struct KernelPole {
    cplx pole{0.0, 0.0};
    cplx strength{0.0, 0.0};
};

struct DecayFitJob {
    smx::ScattererSpec scatterer;
    packet::Envelope in1;
    packet::Envelope in2;
    smx::DecayScanConfig scan;
    std::vector<KernelPole> kernel_c;  // empty: elastic t-matrix only
};

// ---- resolved run configuration ---------------------------------------------

struct RunConfig {
    Command command = Command::GroundState;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string format = "csv";
    std::string out_dir = ".";

    // exactly one payload is set, matching `command`
    std::optional<GroundStateJob> groundstate;
    std::optional<CommutatorJob> commutator;
    std::optional<ScatterJob> scatter;
    std::optional<FluorescenceJob> fluorescence;
    std::optional<ClusterJob> cluster;
    std::optional<SMatrixJob> smatrix;
    std::optional<DecayFitJob> decay_fit;

    void validate() const;  // payload/command consistency
};

// Executes the configured experiment and writes all artifacts into
// cfg.out_dir: manifest.json (resolved config + version), the per-command
// data files, and plots.gp.  Outputs are deterministic for a fixed seed.
// Throws config_error / numeric_error / io_error.
void run(const RunConfig& cfg);

}  // namespace wqed::exp
