// groundstate.hpp -- interacting ground state of the chain and the dressing
// cloud around the scatterer: Lanczos eigensolver, cloud profile, correlator
// bound checks, and the packet-over-vacuum deviation scan.

#pragma once

#include <cstdint>

#include "wqed/numerics.hpp"
#include "wqed/wavepacket.hpp"

namespace wqed::ground {

// ---- eigensolver ------------------------------------------------------------

struct LanczosOptions {
    int block_size = 40;    // Krylov vectors per restart cycle (memory permitting)
    int max_cycles = 250;
    double tol = 1e-10;     // residual ||H v - E v|| target
    std::uint64_t seed = 1; // start-vector seed
};

struct GroundStateResult {
    double energy = 0.0;
    model::StateVector state;  // normalized
    double residual = 0.0;
    int cycles = 0;
};

// Restarted Lanczos with full reorthogonalization inside each cycle.
// Throws numeric_error when the residual target is not met within max_cycles.
GroundStateResult ground_state(const model::SparseOperator& H,
                               const LanczosOptions& opt = {});

// ---- dressing cloud -----------------------------------------------------------

struct CloudProfile {
    Eigen::VectorXd site_density;  // <a_x^dag a_x>, indexed by site
    double qubit_occupation = 0.0;
    double total_photons = 0.0;
    double peak_density = 0.0;       // at the scatterer site
    bool tail_fit_ok = false;        // false when the tail is numerically empty
    double correlation_length = 0.0; // xi in n_x ~ e^{-|x|/xi}
    double tail_r2 = 0.0;
};

CloudProfile cloud_profile(const model::LatticeSpec& spec, const model::SectorBasis& basis,
                           const model::StateVector& gs);

// ---- correlators and bounds -----------------------------------------------------

// C_xy = <a_x^dag a_y> in the given state (Hermitian, PSD).
Eigen::MatrixXcd position_correlations(const model::SectorBasis& basis,
                                       const model::StateVector& v);

// C_kp = W C_xy W^dag with W_kx = e^{-ikx}/sqrt(L) on the FFT momentum grid.
Eigen::MatrixXcd momentum_correlations(const model::LatticeSpec& spec,
                                       const Eigen::MatrixXcd& c_xy);

// Ground-state correlator bound  |<a_k^dag a_p>| <= |g_k g_p / (omega_k omega_p)|^{1/2} <G G^dag>
// with g_k = g/sqrt(L) and G the qubit coupling operator.
struct BoundCheck {
    double worst_violation = 0.0;  // max over (k,p) of |C_kp| - bound_kp
    double max_diag = 0.0;         // largest <a_k^dag a_k>
    double min_diag = 0.0;         // most negative diagonal (PSD watchdog)
};

BoundCheck correlator_bound_check(const model::LatticeSpec& spec,
                                  const model::SectorBasis& basis,
                                  const model::StateVector& gs,
                                  const Eigen::MatrixXcd& c_kp);

// Rayleigh-quotient sanity of the computed minimum: min over lattice momenta of
// <v|H|v> - E0 <v|v> with v = a_k |gs>  (must be >= -tolerance).
double variational_margin(const model::LatticeSpec& spec, const model::SectorBasis& basis,
                          const model::SparseOperator& H, const model::StateVector& gs,
                          double energy);

// ---- packet-over-vacuum deviation -----------------------------------------------

// D(x_bar) = <GS| psi psi^dag |GS> - 1 for a unit-normalized packet operator:
// the weight of the packet's contraction with the dressing cloud, which decays
// with the packet-scatterer distance.
struct PacketVacuumScan {
    std::vector<double> x_bars;
    std::vector<double> deviation;
    num::DecayFitResult fit;
};

PacketVacuumScan packet_vacuum_scan(const model::LatticeSpec& spec,
                                    const model::SectorBasis& basis,
                                    const model::StateVector& gs,
                                    const packet::PacketSpec& base,
                                    std::span<const double> x_bars);

}  // namespace wqed::ground
