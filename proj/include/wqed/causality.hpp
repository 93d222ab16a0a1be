// causality.hpp -- emergent light-cone diagnostics for free packet operators.
//
// Central object: the overlap/commutator amplitude of two packet operators at
// distinct spacetime points,
//   I = int dk  e^{i k (x1 - x2) - i omega_k (t1 - t2)}  phi_1(k) conj(phi_2(k)),
// which is O(1) inside the light cone and decays with the cone distance
//   d_c = |x1 - x2| - c_max |t1 - t2|
// outside it (exponentially for Gaussian envelopes, power-law for envelopes
// with finite smoothness).

#pragma once

#include <span>

#include "wqed/numerics.hpp"
#include "wqed/wavepacket.hpp"

namespace wqed::causality {

struct SpacetimePair {
    double x1 = 0.0;
    double t1 = 0.0;
    double x2 = 0.0;
    double t2 = 0.0;
};

// d_c = |x1 - x2| - speed * |t1 - t2|  (positive outside the cone).
double cone_distance(const SpacetimePair& pair, double speed);

struct CommutatorResult {
    cplx value{0.0, 0.0};
    double quad_error = 0.0;
    double cone_dist = 0.0;
};

// Direct quadrature of I.  Linear dispersion integrates over a window wide
// enough for the envelope tails (with analytic contour tails for slowly
// decaying Lorentzian pairs); cosine dispersion integrates over the Brillouin
// zone [-pi, pi].  Oscillation-aware initial subdivision.
CommutatorResult free_commutator(const packet::Envelope& e1, const packet::Envelope& e2,
                                 const packet::Dispersion& disp, const SpacetimePair& pair,
                                 const num::QuadOptions& opt = {1e-12, 1e-10, 400000, 1});

// Exact result for two equal-width Gaussian envelopes under linear dispersion:
//   I = exp[-k_minus^2/(2 sigma^2)]  exp[i k_plus d]  exp[-sigma^2 d^2 / 2],
// with k_plus/minus = (k1 +/- k2)/2 and d = (x1 - x2) - c (t1 - t2).
// Throws std::invalid_argument unless both envelopes are Gaussian with equal sigma.
cplx gaussian_linear_closed_form(const packet::Envelope& e1, const packet::Envelope& e2,
                                 double c, const SpacetimePair& pair);

// |I| sampled at fixed time offset over a set of spatial separations, plus the
// competing power-law/exponential fit of magnitude vs cone distance.
struct ScanPoint {
    double separation = 0.0;  // x1 - x2
    double cone_dist = 0.0;
    double magnitude = 0.0;
};
struct ScanResult {
    std::vector<ScanPoint> points;
    num::DecayFitResult fit;
};

ScanResult commutator_scan(const packet::Envelope& e1, const packet::Envelope& e2,
                           const packet::Dispersion& disp,
                           std::span<const double> separations, double t_offset,
                           double fit_floor = 1e-12);

// Competing decay-law fit (re-exported so callers need not reach into num::).
inline num::DecayFitResult fit_decay(std::span<const double> d, std::span<const double> m,
                                     double floor = 1e-14) {
    return num::fit_decay(d, m, floor);
}

}  // namespace wqed::causality
