// Envelope normalization and packet-construction checks.  Norms are verified
// by quadrature, lattice amplitudes by Parseval's identity, and margins /
// truncation semantics by direct construction.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "wqed/numerics.hpp"
#include "wqed/wavepacket.hpp"

using namespace wqed;

// ---- envelopes -------------------------------------------------------------

TEST_CASE("envelopes: unit L2 norm on the real line") {
    packet::Envelope e;
    e.k_bar = pi / 2;
    e.sigma = 0.07;

    e.kind = packet::EnvelopeKind::Gaussian;
    auto norm2 = [&](double lo, double hi) {
        return num::integrate([&](double k) { return cplx{std::norm(e.value(k)), 0.0}; }, lo,
                              hi)
            .value.real();
    };
    CHECK(norm2(e.k_bar - 12 * e.sigma, e.k_bar + 12 * e.sigma) ==
          doctest::Approx(1.0).epsilon(1e-10));

    // Lorentzian tails carry weight 1 - (2/pi) atan(R/sigma) beyond k_bar +/- R
    e.kind = packet::EnvelopeKind::Lorentzian;
    const double R = 100.0 * e.sigma;
    CHECK(norm2(e.k_bar - R, e.k_bar + R) ==
          doctest::Approx(2.0 / pi * std::atan(100.0)).epsilon(1e-9));
}

TEST_CASE("envelopes: peak values") {
    packet::Envelope e;
    e.k_bar = 1.3;
    e.sigma = 0.05;

    e.kind = packet::EnvelopeKind::Gaussian;
    const double peak = std::pow(2.0 * pi, -0.25) / std::sqrt(e.sigma);
    CHECK(std::abs(e.value(e.k_bar) - cplx{peak, 0.0}) < 1e-14);
    CHECK(std::abs(e.value(e.k_bar + 2.0 * e.sigma)) ==
          doctest::Approx(peak * std::exp(-1.0)).epsilon(1e-12));

    e.kind = packet::EnvelopeKind::Lorentzian;
    // sqrt(sigma/pi) / (i sigma) = -i / sqrt(pi sigma)
    const cplx at_center = e.value(e.k_bar);
    CHECK(std::abs(at_center.real()) < 1e-14);
    CHECK(at_center.imag() == doctest::Approx(-1.0 / std::sqrt(pi * e.sigma)).epsilon(1e-12));
}

TEST_CASE("envelopes and packets: invalid widths are rejected") {
    packet::Envelope e;
    e.sigma = 0.0;
    CHECK_THROWS_AS(e.validate(), config_error);
    packet::PacketSpec p;
    p.sigma = -0.1;
    CHECK_THROWS_AS(p.validate(), config_error);
}

TEST_CASE("dispersion relations") {
    packet::Dispersion lin;  // linear, c = 1
    CHECK(lin.omega(0.3) == doctest::Approx(0.3));
    CHECK(lin.group_velocity(2.0) == doctest::Approx(1.0));
    CHECK(lin.max_speed() == doctest::Approx(1.0));

    packet::Dispersion cos_band;
    cos_band.kind = packet::Dispersion::Kind::Cosine;
    CHECK(cos_band.omega(pi / 2) == doctest::Approx(cos_band.epsilon));
    CHECK(cos_band.omega(0.0) == doctest::Approx(cos_band.epsilon - 2.0 * cos_band.J));
    CHECK(cos_band.group_velocity(pi / 2) == doctest::Approx(2.0 * cos_band.J));
    CHECK(cos_band.max_speed() == doctest::Approx(2.0 / pi));
}

// ---- lattice amplitudes -------------------------------------------------------

TEST_CASE("packet amplitudes: Parseval, density, centroid and emission time") {
    model::LatticeSpec spec;
    spec.L = 101;
    packet::PacketSpec p;
    p.k_bar = pi / 2;
    p.sigma = 0.1;
    p.x_bar = -20.0;

    const auto w = packet::creation_amplitudes(spec, p);
    const auto c = packet::position_amplitudes(spec, p);
    REQUIRE(w.size() == 101);
    REQUIRE(c.size() == 101);

    double wk2 = 0.0, cx2 = 0.0;
    for (const auto& v : w) wk2 += std::norm(v);
    for (const auto& v : c) cx2 += std::norm(v);
    CHECK(cx2 == doctest::Approx(wk2).epsilon(1e-12));
    // Riemann sum of the unit-norm envelope: sum_k |phi|^2 ~ L / (2 pi)
    CHECK(wk2 == doctest::Approx(spec.L / (2.0 * pi)).epsilon(1e-6));

    auto centroid = [&](const std::vector<cplx>& amp) {
        double m = 0.0, s = 0.0;
        for (int i = 0; i < spec.L; ++i) {
            m += std::norm(amp[i]);
            s += std::norm(amp[i]) * spec.site_coord(i);
        }
        return s / m;
    };
    CHECK(std::abs(centroid(c) - p.x_bar) < 0.05);

    // emitted earlier: by t = 0 the centroid has advanced by v_g |t0|
    packet::PacketSpec early = p;
    early.t0 = -10.0;
    const auto ce = packet::position_amplitudes(spec, early);
    const double expect = p.x_bar + spec.group_velocity(p.k_bar) * 10.0;
    CHECK(std::abs(centroid(ce) - expect) < 0.2);
}

// ---- packet states over a reference ------------------------------------------

namespace {
model::StateVector vacuum_state(const model::SectorBasis& basis) {
    const auto idx = basis.find(false, std::vector<int>{});
    REQUIRE(idx.has_value());
    model::StateVector v = model::StateVector::Zero(basis.size());
    v(*idx) = 1.0;
    return v;
}
}  // namespace

TEST_CASE("packet states: normalization and photon content over the vacuum") {
    model::LatticeSpec spec;
    spec.L = 101;
    spec.n_max = 2;
    const auto basis = model::SectorBasis::build(spec);
    const auto vac = vacuum_state(basis);

    packet::PacketSpec p;
    p.k_bar = pi / 2;
    p.sigma = 0.25;  // margin 5/sigma = 20 sites
    p.x_bar = -25.0;

    const auto one = packet::make_packet_state(spec, basis, std::vector{p}, vac);
    CHECK(model::norm_of(one) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(model::photon_number_expectation(basis, one) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(model::qubit_expectation(basis, one) < 1e-14);

    packet::PacketSpec q = p;
    q.x_bar = +25.0;
    q.k_bar = -pi / 2;
    const auto two = packet::make_packet_state(spec, basis, std::vector{p, q}, vac);
    CHECK(model::norm_of(two) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(model::photon_number_expectation(basis, two) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("packet states: margin enforcement") {
    model::LatticeSpec spec;
    spec.L = 101;
    spec.n_max = 1;
    const auto basis = model::SectorBasis::build(spec);
    const auto vac = vacuum_state(basis);

    packet::PacketSpec p;
    p.sigma = 0.25;
    p.x_bar = -45.0;  // 5 sites from the boundary, margin demands 20
    CHECK_THROWS_AS(packet::make_packet_state(spec, basis, std::vector{p}, vac), config_error);
    p.x_bar = -10.0;  // too close to the scatterer
    CHECK_THROWS_AS(packet::make_packet_state(spec, basis, std::vector{p}, vac), config_error);

    // margins are configuration, not hard-coded physics
    packet::PacketMargins loose{1.0, 1.0};
    CHECK_NOTHROW(packet::make_packet_state(spec, basis, std::vector{p}, vac, loose));
}

TEST_CASE("packet states: excitation cap truncates to nothing when overfilled") {
    model::LatticeSpec spec;
    spec.L = 101;
    spec.n_max = 1;  // no room for a second photon
    const auto basis = model::SectorBasis::build(spec);
    const auto vac = vacuum_state(basis);

    packet::PacketSpec p;
    p.sigma = 0.25;
    p.x_bar = -25.0;
    packet::PacketSpec q = p;
    q.x_bar = +25.0;
    CHECK_THROWS_AS(packet::make_packet_state(spec, basis, std::vector{p, q}, vac),
                    numeric_error);
}
