#include "wqed/causality.hpp"

#include <algorithm>
#include <cmath>

namespace wqed::causality {

namespace {

using packet::Dispersion;
using packet::Envelope;
using packet::EnvelopeKind;

// Envelope continued to complex momentum (needed for rotated tail contours).
cplx envelope_at(const Envelope& e, cplx k) {
    const cplx d = k - e.k_bar;
    if (e.kind == EnvelopeKind::Gaussian)
        return std::pow(2.0 * pi, -0.25) / std::sqrt(e.sigma) *
               std::exp(-d * d / (4.0 * e.sigma * e.sigma));
    return std::sqrt(e.sigma / pi) / (d + iu * e.sigma);
}

cplx conj_envelope_at(const Envelope& e, cplx k) {
    // conj(phi(conj(k))) -- the analytic continuation of conj(phi(k)) off the axis.
    return std::conj(envelope_at(e, std::conj(k)));
}

double window_halfwidth(const Envelope& e) {
    // Lorentzian tails beyond the window are recovered analytically (rotated
    // contours below), so the window only has to clear the poles comfortably.
    return e.kind == EnvelopeKind::Gaussian ? 60.0 * e.sigma : 300.0 * e.sigma;
}

}  // namespace

double cone_distance(const SpacetimePair& pair, double speed) {
    return std::abs(pair.x1 - pair.x2) - speed * std::abs(pair.t1 - pair.t2);
}

CommutatorResult free_commutator(const Envelope& e1, const Envelope& e2,
                                 const Dispersion& disp, const SpacetimePair& pair,
                                 const num::QuadOptions& opt) {
    e1.validate();
    e2.validate();
    disp.validate();
    const double dx = pair.x1 - pair.x2;
    const double dt = pair.t1 - pair.t2;

    auto integrand = [&](double k) {
        return std::exp(iu * (k * dx - disp.omega(k) * dt)) * e1.value(k) *
               std::conj(e2.value(k));
    };

    CommutatorResult out;
    out.cone_dist = cone_distance(pair, disp.max_speed());
    num::QuadOptions o = opt;

    if (disp.kind == Dispersion::Kind::Cosine) {
        // Compact Brillouin zone; phase turns at most (|dx| + 2J|dt|) times.
        const double cycles = std::abs(dx) + 2.0 * disp.J * std::abs(dt);
        o.initial_panels = std::max(o.initial_panels, static_cast<int>(2.0 * cycles) + 8);
        const auto r = num::integrate(integrand, -pi, pi, o);
        out.value = r.value;
        out.quad_error = r.error;
        return out;
    }

    // Linear dispersion: phase is k*d with d the retarded separation.
    const double d = dx - disp.c * dt;
    const double a = std::min(e1.k_bar - window_halfwidth(e1), e2.k_bar - window_halfwidth(e2));
    const double b = std::max(e1.k_bar + window_halfwidth(e1), e2.k_bar + window_halfwidth(e2));
    const double cycles = std::abs(d) * (b - a) / (2.0 * pi);
    o.initial_panels = std::max(o.initial_panels, static_cast<int>(1.5 * cycles) + 8);
    auto core = num::integrate([&](double k) { return std::exp(iu * (k * d)) * e1.value(k) *
                                                      std::conj(e2.value(k)); },
                               a, b, o);
    out.value = core.value;
    out.quad_error = core.error;

    // Gaussian factors make the clipped tails < 1e-300; only Lorentzian pairs
    // leave slowly decaying tails worth recovering.
    if (e1.kind == EnvelopeKind::Lorentzian && e2.kind == EnvelopeKind::Lorentzian) {
        auto f = [&](cplx k) { return envelope_at(e1, k) * conj_envelope_at(e2, k); };
        num::QuadOptions ot = opt;
        ot.initial_panels = 16;
        if (d == 0.0) {
            // Non-oscillatory tails: substitute k = edge +/- 1/u.
            auto right = num::integrate(
                [&](double u) { return f(cplx{b + (1.0 - u) / u, 0.0}) / (u * u); }, 0.0, 1.0,
                ot);
            auto left = num::integrate(
                [&](double u) { return f(cplx{a - (1.0 - u) / u, 0.0}) / (u * u); }, 0.0, 1.0,
                ot);
            out.value += right.value + left.value;
            out.quad_error += right.error + left.error;
        } else {
            // Rotate each tail into the half plane where e^{ikd} decays; the
            // vertical lines at the window edges stay clear of the envelope poles.
            const double sgn = d > 0.0 ? 1.0 : -1.0;
            const double ad = std::abs(d);
            auto vertical = [&](double edge, double orientation) {
                auto r = num::integrate(
                    [&](double y) {
                        const cplx k = cplx{edge, sgn * y};
                        return std::exp(iu * k * d) * f(k);
                    },
                    0.0, 60.0 / ad + 10.0, ot);
                out.value += orientation * sgn * iu * r.value;
                out.quad_error += r.error;
            };
            vertical(b, +1.0);  // int_b^inf
            vertical(a, -1.0);  // int_-inf^a
        }
    }
    return out;
}

cplx gaussian_linear_closed_form(const Envelope& e1, const Envelope& e2, double c,
                                 const SpacetimePair& pair) {
    if (e1.kind != EnvelopeKind::Gaussian || e2.kind != EnvelopeKind::Gaussian)
        throw std::invalid_argument("closed form requires Gaussian envelopes");
    if (std::abs(e1.sigma - e2.sigma) > 1e-15 * std::max(e1.sigma, e2.sigma))
        throw std::invalid_argument("closed form requires equal envelope widths");
    const double sigma = e1.sigma;
    const double d = (pair.x1 - pair.x2) - c * (pair.t1 - pair.t2);
    const double k_minus = 0.5 * (e1.k_bar - e2.k_bar);
    const double k_plus = 0.5 * (e1.k_bar + e2.k_bar);
    return std::exp(-k_minus * k_minus / (2.0 * sigma * sigma)) *
           std::exp(-sigma * sigma * d * d / 2.0) * std::exp(iu * (k_plus * d));
}

ScanResult commutator_scan(const Envelope& e1, const Envelope& e2, const Dispersion& disp,
                           std::span<const double> separations, double t_offset,
                           double fit_floor) {
    ScanResult out;
    std::vector<double> dists, mags;
    for (double s : separations) {
        SpacetimePair pair{s, t_offset, 0.0, 0.0};
        const auto r = free_commutator(e1, e2, disp, pair);
        out.points.push_back(ScanPoint{s, r.cone_dist, std::abs(r.value)});
        if (r.cone_dist > 0.0) {
            dists.push_back(r.cone_dist);
            mags.push_back(std::abs(r.value));
        }
    }
    out.fit = num::fit_decay(dists, mags, fit_floor);
    return out;
}

}  // namespace wqed::causality
