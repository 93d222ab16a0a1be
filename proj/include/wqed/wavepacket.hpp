// wavepacket.hpp -- momentum-space envelopes, dispersion relations, and the
// construction of normalized photon wave packets over a reference state.
//
// Envelope conventions (unit L2 norm on the real line):
//   gaussian    phi(k) = (2 pi)^{-1/4} sigma^{-1/2} exp[-(k - k_bar)^2 / 4 sigma^2]
//   lorentzian  phi(k) = sqrt(sigma / pi) / (k - k_bar + i sigma)
//
// A packet emitted at (t0, x_bar) is created by
//   psi^dag = sum_k phi(k) e^{-i k x_bar + i omega_k t0} a_k^dag ,
// with a_k^dag = L^{-1/2} sum_x e^{+i k x} a_x^dag on the chain, so the photon
// density peaks at x_bar and the centroid moves at +v_g(k_bar).

#pragma once

#include <optional>

#include "wqed/lattice.hpp"
#include "wqed/types.hpp"

namespace wqed::packet {

enum class EnvelopeKind { Gaussian, Lorentzian };

struct Envelope {
    EnvelopeKind kind = EnvelopeKind::Gaussian;
    double k_bar = 0.0;
    double sigma = 0.05;  // momentum-space width, > 0

    void validate() const;
    cplx value(double k) const;
};

// Dispersion relations the analytic modules integrate over.
struct Dispersion {
    enum class Kind { Linear, Cosine };
    Kind kind = Kind::Linear;
    double c = 1.0;        // linear: omega = c k
    double epsilon = 1.0;  // cosine: omega = epsilon - 2 J cos k
    double J = 1.0 / pi;

    void validate() const;
    double omega(double k) const;
    double group_velocity(double k) const;
    double max_speed() const;
};

struct PacketSpec {
    EnvelopeKind kind = EnvelopeKind::Gaussian;
    double k_bar = pi / 2;
    double sigma = 0.05;
    double x_bar = 0.0;
    double t0 = 0.0;

    Envelope envelope() const { return Envelope{kind, k_bar, sigma}; }
    void validate() const;
};

// Boundary/scatterer clearance demanded of packet centers, in units of 1/sigma.
struct PacketMargins {
    double boundary_sigmas = 5.0;
    double scatterer_sigmas = 5.0;
};

// Momentum-grid creation amplitudes w_n = phi(k_n) e^{-i k_n x_bar + i omega(k_n) t0}
// (not normalized), aligned with LatticeSpec::momentum_grid().
std::vector<cplx> creation_amplitudes(const model::LatticeSpec& spec, const PacketSpec& p);

// Position amplitudes c(x) = L^{-1/2} sum_k w_k e^{ikx}, aligned with site index.
std::vector<cplx> position_amplitudes(const model::LatticeSpec& spec, const PacketSpec& p);

// Applies psi^dag to `reference` (components beyond the excitation cap are
// dropped).  Result is NOT normalized.
model::StateVector apply_packet_creation(const model::LatticeSpec& spec,
                                         const model::SectorBasis& basis,
                                         const PacketSpec& p,
                                         const model::StateVector& reference);

// Normalized packet state psi_1^dag ... psi_m^dag |reference> with margin
// enforcement; throws config_error when a packet center sits too close to a
// boundary or the scatterer.
model::StateVector make_packet_state(const model::LatticeSpec& spec,
                                     const model::SectorBasis& basis,
                                     std::span<const PacketSpec> packets,
                                     const model::StateVector& reference,
                                     const PacketMargins& margins = {});

}  // namespace wqed::packet
