// dynamics.hpp -- real-time propagation in the truncated sector and the
// scattering experiments built on it: two-photon fields, fluorescence windows,
// cluster-factorization checks, and free-evolution (causality) comparisons.

#pragma once

#include <cstdint>
#include <functional>

#include "wqed/groundstate.hpp"
#include "wqed/wavepacket.hpp"

namespace wqed::dynamics {

// ---- propagators ------------------------------------------------------------

enum class PropagatorKind { Chebyshev, Krylov };

struct EvolutionPlan {
    double t_final = 0.0;
    double dt_report = 0.0;  // 0: no intermediate reports
    PropagatorKind method = PropagatorKind::Chebyshev;
    double tol = 1e-10;  // per-step truncation target

    void validate() const;
};

struct SpectralBounds {
    double e_min = 0.0;
    double e_max = 0.0;
};

// Plain (non-reorthogonalized) Lanczos sweep for propagation bounds, padded by
// a safety margin; deterministic for fixed seed.
SpectralBounds estimate_bounds(const model::SparseOperator& H, std::uint64_t seed,
                               int iterations = 80);

struct EvolveResult {
    model::StateVector state;
    double norm_drift = 0.0;    // max |  ||psi(t)|| - ||psi(0)||  |
    double energy_drift = 0.0;  // max | <H>(t) - <H>(0) |
};

// psi(t_final) = e^{-i H t_final} psi0.  The observer (if any) is invoked at
// every report time, including t_final.  Chebyshev uses a Bessel-series kernel
// over the estimated spectral range; Krylov uses adaptive short-iterate
// exponentials.  Norms are never silently renormalized.
EvolveResult evolve(const model::SparseOperator& H, const model::StateVector& psi0,
                    const EvolutionPlan& plan, std::uint64_t seed,
                    const std::function<void(double, const model::StateVector&)>& observer = {});

// ---- scattering runs -----------------------------------------------------------

struct ScatterConfig {
    model::LatticeSpec lattice;
    std::vector<packet::PacketSpec> packets;  // one or two
    EvolutionPlan plan;
    packet::PacketMargins margins;
    std::uint64_t seed = 1;
};

struct Diagnostics {
    std::vector<double> times;
    std::vector<double> n_fly;    // flying photons: <N>(t) - <N>_ground
    std::vector<double> n_total;  // qubit + photon excitations above the ground level
    std::vector<double> norms;    // ||psi(t)||
    std::vector<double> energy;   // <H>(t)
    double flying_drift = 0.0;    // max |n_fly(t) - n_fly(0)|
    double total_drift = 0.0;     // max |n_total(t) - n_total(0)|; zero when the
                                  // coupling conserves excitation number (RWA)
    double norm_drift = 0.0;
    double energy_drift = 0.0;
    double ground_energy = 0.0;
    double boundary_density = 0.0;  // worst outer-edge photon density seen
};

// phi(p1, p2) = <GS| a_{p1} a_{p2} |psi> on the FFT momentum grid (symmetric).
struct TwoPhotonField {
    std::vector<double> momenta;
    Eigen::MatrixXcd phi;
};

struct ScatterResult {
    model::StateVector ground;
    model::StateVector in_state;
    model::StateVector out_state;
    Eigen::VectorXd out_density;  // per-site photon density at t_final
    Diagnostics diag;
    TwoPhotonField field;  // populated for two-packet runs
};

ScatterResult scatter_run(const ScatterConfig& cfg);

// Field builders usable on any state (left vector = interacting ground state).
Eigen::MatrixXcd two_photon_position_field(const model::SectorBasis& basis,
                                           const model::StateVector& ground,
                                           const model::StateVector& psi);
TwoPhotonField two_photon_field(const model::LatticeSpec& spec,
                                const model::SectorBasis& basis,
                                const model::StateVector& ground,
                                const model::StateVector& psi);
Eigen::VectorXcd single_photon_field(const model::LatticeSpec& spec,
                                     const model::SectorBasis& basis,
                                     const model::StateVector& ground,
                                     const model::StateVector& psi);

// ---- fluorescence ---------------------------------------------------------------

// Inelastic ("fluorescent") weight of a two-photon field: points inside the
// total-energy shell |w1 + w2 - 2 wbar| <= shell_factor * sigma_omega whose
// single-photon energies both fall outside (wbar -/+ exclusion_factor * sigma_omega),
// normalized by the total shell weight.
struct FluorescenceWindow {
    double omega_bar = 0.0;
    double sigma_omega = 0.0;
    double shell_factor = 2.0;
    double exclusion_factor = 4.0;

    void validate() const;
};

struct FluorescenceResult {
    double value = 0.0;  // window weight / shell weight
    double window_weight = 0.0;
    double shell_weight = 0.0;
    long window_points = 0;
    long shell_points = 0;
};

// Throws numeric_error when the window holds no grid points.
FluorescenceResult fluorescence(const model::LatticeSpec& spec, const TwoPhotonField& field,
                                const FluorescenceWindow& win);

struct FluorescenceScanConfig {
    ScatterConfig base;          // two packets; the second is displaced by l
    std::vector<double> separations;
    FluorescenceWindow window;   // omega_bar/sigma_omega <= 0 means "derive from packet 1"
    int threads = 1;
};

struct FluorescenceScanResult {
    std::vector<double> separations;
    std::vector<double> values;
    double l_c = 0.0;  // smallest separation with two resolvable density peaks
};

FluorescenceScanResult fluorescence_scan(const FluorescenceScanConfig& cfg);

// Smallest packet separation at which the two input density bumps show two
// local maxima with a >= 50% dip between them (continuum envelope profile).
double resolvable_separation(const packet::PacketSpec& base);

// Windowed same-site vs separated two-photon correlation of the position-space
// field: G(r) = mean_x |M(x, x+r)|^2 over a site window.  ratio < 1 flags
// antibunching, > 1 bunching.
struct CorrelationDiagnostic {
    double same_point = 0.0;  // G(0)
    double plateau = 0.0;     // mean G(r) over the plateau offsets
    double ratio = 0.0;       // G(0) / plateau
};

CorrelationDiagnostic field_correlation(const model::LatticeSpec& spec,
                                        const Eigen::MatrixXcd& position_field,
                                        int window_lo_x, int window_hi_x, int plateau_lo_r,
                                        int plateau_hi_r);

// ---- cluster factorization --------------------------------------------------------

struct ClusterCheckConfig {
    model::LatticeSpec lattice;
    packet::PacketSpec in1;       // nearer packet (x_bar < 0, k_bar > 0)
    packet::PacketSpec in2_base;  // displaced to x_bar(in1) - l per separation
    std::vector<double> separations;
    EvolutionPlan plan;
    packet::PacketMargins margins;
    std::uint64_t seed = 1;
    int threads = 1;
};

struct ClusterPoint {
    double separation = 0.0;
    cplx a12{0.0, 0.0};  // two-packet amplitude onto the predicted out state
    cplx a1{0.0, 0.0};   // single-packet amplitudes
    cplx a2{0.0, 0.0};
    double deviation = 0.0;  // |a12 - a1 a2| / |a1 a2|
};

struct ClusterCheckResult {
    std::vector<ClusterPoint> points;
    double ground_energy = 0.0;
};

// Reflection-channel factorization test: amplitudes onto reflected packets at
// their ballistic positions, two-packet vs product of single-packet runs.
ClusterCheckResult cluster_check(const ClusterCheckConfig& cfg);

// ---- free-evolution (causality) comparison ------------------------------------------

struct FreeEvolutionCheck {
    double infidelity = 0.0;     // 1 - |<reference | evolved>|
    double cone_distance = 0.0;  // |x_bar| - 2J t_final at the end of the run
};

// Compares e^{-iHT} psi^dag|GS> against the freely evolved packet operator
// applied to the same ground state (phases e^{-i omega_k T} folded into the
// packet's emission time).
FreeEvolutionCheck free_evolution_check(const model::LatticeSpec& spec,
                                        const model::SectorBasis& basis,
                                        const model::StateVector& gs,
                                        const packet::PacketSpec& p,
                                        const EvolutionPlan& plan, std::uint64_t seed);

}  // namespace wqed::dynamics
