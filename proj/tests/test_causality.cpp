// Free-commutator oracle checks: Gaussian/linear closed form, the exact
// Lorentzian Fourier pair, translation invariance, and decay-law fits on
// both sides of the emergent light cone.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "wqed/causality.hpp"

using namespace wqed;

TEST_CASE("cone distance") {
    causality::SpacetimePair pair{12.0, 3.0, -4.0, 1.0};
    // |x1 - x2| - speed |t1 - t2| = 16 - 2 * 0.5
    CHECK(causality::cone_distance(pair, 0.5) == doctest::Approx(15.0));
    CHECK(causality::cone_distance(pair, 10.0) == doctest::Approx(-4.0));
}

TEST_CASE("gaussian/linear: quadrature matches the closed form") {
    packet::Dispersion disp;  // linear, c = 1
    for (double sigma : {0.08, 0.2}) {
        for (double km : {0.0, 0.15}) {
            for (double d : {0.0, 4.0, 12.0}) {
                packet::Envelope e1, e2;
                e1.k_bar = pi / 2 + km;
                e2.k_bar = pi / 2 - km;
                e1.sigma = e2.sigma = sigma;
                causality::SpacetimePair pair{d + 2.5, 2.5, 0.0, 0.0};
                const auto I = causality::free_commutator(e1, e2, disp, pair);
                const cplx closed = causality::gaussian_linear_closed_form(e1, e2, 1.0, pair);
                CHECK(std::abs(I.value - closed) < 1e-10);
                // independent expression: |I| = exp[-km^2/(2 s^2) - s^2 d^2 / 2]
                const double mag =
                    std::exp(-km * km / (2 * sigma * sigma) - sigma * sigma * d * d / 2);
                CHECK(std::abs(std::abs(I.value) - mag) < 1e-10);
            }
        }
    }
}

TEST_CASE("gaussian/linear closed form: input validation") {
    packet::Envelope g1, g2;
    g2.sigma = 2.0 * g1.sigma;
    causality::SpacetimePair pair{};
    CHECK_THROWS_AS(causality::gaussian_linear_closed_form(g1, g2, 1.0, pair),
                    std::invalid_argument);
    g2.sigma = g1.sigma;
    g2.kind = packet::EnvelopeKind::Lorentzian;
    CHECK_THROWS_AS(causality::gaussian_linear_closed_form(g1, g2, 1.0, pair),
                    std::invalid_argument);
}

TEST_CASE("free commutator: depends only on spacetime differences") {
    packet::Envelope e;
    e.k_bar = pi / 2;
    e.sigma = 0.1;
    packet::Dispersion disp;
    causality::SpacetimePair a{7.0, 2.0, 1.0, 0.5};
    causality::SpacetimePair b{17.0, 5.5, 11.0, 4.0};  // both shifted by (10, 3.5)
    const auto Ia = causality::free_commutator(e, e, disp, a);
    const auto Ib = causality::free_commutator(e, e, disp, b);
    CHECK(std::abs(Ia.value - Ib.value) < 1e-12);
}

TEST_CASE("lorentzian/linear: exact Fourier pair") {
    // equal Lorentzian envelopes give I(d) = e^{i k_bar d} e^{-sigma |d|}
    packet::Envelope e;
    e.kind = packet::EnvelopeKind::Lorentzian;
    e.k_bar = pi / 2;
    e.sigma = 0.12;
    packet::Dispersion disp;
    for (double d : {0.5, 3.0, 10.0, -4.0}) {
        causality::SpacetimePair pair{d, 0.0, 0.0, 0.0};
        const auto I = causality::free_commutator(e, e, disp, pair);
        const cplx closed = std::exp(iu * e.k_bar * d - e.sigma * std::abs(d));
        CHECK(std::abs(I.value - closed) < 1e-8);
    }
}

TEST_CASE("free commutator: unit overlap at coincident points") {
    packet::Envelope e;
    e.k_bar = pi / 2;
    e.sigma = 0.3;
    causality::SpacetimePair same{0.0, 0.0, 0.0, 0.0};

    packet::Dispersion lin;
    CHECK(std::abs(causality::free_commutator(e, e, lin, same).value - cplx{1.0, 0.0}) <
          1e-10);

    packet::Dispersion band;
    band.kind = packet::Dispersion::Kind::Cosine;
    // Brillouin-zone truncation leaves only the envelope's sub-1e-5 tails
    CHECK(std::abs(causality::free_commutator(e, e, band, same).value - cplx{1.0, 0.0}) <
          1e-5);
}

TEST_CASE("commutator scan: Lorentzian pair fits an exponential at rate sigma") {
    packet::Envelope e;
    e.kind = packet::EnvelopeKind::Lorentzian;
    e.k_bar = pi / 2;
    e.sigma = 0.12;
    packet::Dispersion disp;
    std::vector<double> seps{2, 4, 6, 8, 12, 16};
    const auto scan = causality::commutator_scan(e, e, disp, seps, 0.0);
    REQUIRE(scan.points.size() == seps.size());
    for (std::size_t i = 0; i < seps.size(); ++i)
        CHECK(scan.points[i].cone_dist == doctest::Approx(seps[i]));
    CHECK(scan.fit.best == num::DecayModel::Exponential);
    CHECK(scan.fit.exp_rate == doctest::Approx(e.sigma).epsilon(0.01));
    CHECK(scan.fit.exp_r2 > 0.9999);
}

TEST_CASE("commutator scan: cosine band decays outside the cone") {
    packet::Envelope e;
    e.k_bar = pi / 2;
    e.sigma = 0.25;
    packet::Dispersion band;
    band.kind = packet::Dispersion::Kind::Cosine;
    const double T = 20.0, cone = band.max_speed() * T;
    std::vector<double> seps;
    for (double dc : {4.0, 6.0, 8.0, 10.0, 12.0, 14.0}) seps.push_back(cone + dc);
    const auto scan = causality::commutator_scan(e, e, band, seps, T);
    CHECK(scan.points.front().magnitude > scan.points.back().magnitude * 100.0);
    CHECK(scan.fit.power_exponent > 2.0);
}
