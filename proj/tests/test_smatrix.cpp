// Analytic scattering machinery: closed-form transmission matrices, kernel
// representations and their exact singular algebra, contour-residue output
// wavefunctions against a quadrature oracle, and decay-rate extraction.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "wqed/smatrix.hpp"

using namespace wqed;

namespace {

// two-level pole data: t(k) = 1 - 2 pi i g^2 / (k - z0), z0 = E_x - i pi g^2
cplx two_level_t(double Ex, double g, cplx k) {
    const cplx z0 = Ex - iu * pi * g * g;
    return 1.0 - 2.0 * pi * iu * g * g / (k - z0);
}

}  // namespace

// ---- transmission matrices ---------------------------------------------------

TEST_CASE("two-level t-matrix: closed form, pole, residue, resonance") {
    const double Ex = 1.0, g = 0.3;
    const auto spec = smx::ScattererSpec::two_level(Ex, g);
    CHECK(spec.channels() == 1);
    CHECK(spec.levels() == 1);
    const auto heff = spec.effective_hamiltonian();
    CHECK(std::abs(heff(0, 0) - (Ex - iu * pi * g * g)) < 1e-14);

    const auto t = smx::t_matrix(spec);
    for (double k : {-2.0, 0.3, 0.9, 1.0, 1.4, 5.0}) {
        CHECK(std::abs(t.at(k)(0, 0) - two_level_t(Ex, g, k)) < 1e-12);
        CHECK(t.unitarity_defect(k) < 1e-12);
    }
    // full reflection of the inelastic phase at resonance
    CHECK(std::abs(t.at(Ex)(0, 0) - cplx{-1.0, 0.0}) < 1e-12);

    REQUIRE(t.poles.size() == 1);
    CHECK(std::abs(t.poles[0].position - (Ex - iu * pi * g * g)) < 1e-12);
    CHECK(std::abs(t.poles[0].residue(0, 0) - (-2.0 * pi * iu * g * g)) < 1e-12);
}

TEST_CASE("lambda atom: unitarity, Raman channel, rational reconstruction") {
    const auto spec = smx::ScattererSpec::lambda_atom(0.2, 1.0, 0.3, 0.25);
    CHECK(spec.channels() == 2);
    CHECK(spec.levels() == 1);
    const auto t = smx::t_matrix(spec);

    for (int i = 0; i < 20; ++i) {
        const double k = -1.0 + 0.17 * i;
        CHECK(t.unitarity_defect(k) < 1e-10);
    }
    // channel exchange is open near resonance
    CHECK(std::abs(t.at(1.0)(1, 0)) > 0.05);

    // poles: one excited level seen from each entry channel
    REQUIRE(t.poles.size() == 2);
    for (const auto& p : t.poles) CHECK(p.position.imag() < 0.0);

    // eval is exactly identity plus the sum of simple-pole terms
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 12; ++trial) {
        const cplx k{u(rng), u(rng)};
        Eigen::MatrixXcd recon = Eigen::MatrixXcd::Identity(2, 2);
        bool too_close = false;
        for (const auto& p : t.poles) {
            if (std::abs(k - p.position) < 0.05) too_close = true;
            recon += p.residue / (k - p.position);
        }
        if (too_close) continue;
        CHECK((t.at(k) - recon).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("identity t-matrix and failure modes") {
    const auto t = smx::identity_t(3);
    CHECK(t.poles.empty());
    CHECK((t.at(0.7) - Eigen::MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(t.unitarity_defect(0.7) == 0.0);

    // zero coupling degenerates to the free line
    CHECK(smx::t_matrix(smx::ScattererSpec::two_level(1.0, 0.0)).poles.empty());

    // decoupled excited level: bound state in the continuum, no scattering solution
    smx::ScattererSpec bic;
    bic.e_ground = Eigen::VectorXd::Zero(1);
    bic.e_excited = Eigen::VectorXd(2);
    bic.e_excited << 1.0, 1.3;
    bic.coupling = Eigen::MatrixXcd::Zero(2, 1);
    bic.coupling(0, 0) = 0.3;
    CHECK_THROWS_AS(smx::t_matrix(bic), numeric_error);

    smx::ScattererSpec bad = smx::ScattererSpec::two_level(1.0, 0.3);
    bad.coupling.resize(1, 2);  // wrong channel count
    CHECK_THROWS_AS(bad.validate(), config_error);
}

// ---- position kernels ----------------------------------------------------------

TEST_CASE("scattered kernel: two-level residue closed form and causal support") {
    const double Ex = 1.0, g = 0.3;
    const auto spec = smx::ScattererSpec::two_level(Ex, g);
    const auto t = smx::t_matrix(spec);
    const cplx z0 = Ex - iu * pi * g * g;
    for (double r : {-0.3, -1.0, -2.5, -7.0}) {
        const cplx got = smx::scattered_kernel(spec, t, 0, 0, r, 0.0);
        const cplx want = -2.0 * pi * g * g * std::exp(iu * z0 * r);
        CHECK(std::abs(got - want) < 1e-12);
    }
    // the scattered wave trails the free front
    CHECK(std::abs(smx::scattered_kernel(spec, t, 0, 0, 0.8, 0.0)) == 0.0);
    CHECK(std::abs(smx::scattered_kernel(spec, t, 0, 0, 1.5, -1.0)) == 0.0);
}

TEST_CASE("two-photon position kernel: bosonic exchange symmetry") {
    const auto spec = smx::ScattererSpec::two_level(1.0, 0.3);
    const auto t = smx::t_matrix(spec);
    const double x1 = 1.7, x2 = 0.4, y1 = -0.6, y2 = -2.3;
    const cplx base = smx::s0_position(spec, t, x1, x2, y1, y2, 0, 0);
    CHECK(std::abs(base - smx::s0_position(spec, t, x2, x1, y1, y2, 0, 0)) < 1e-13);
    CHECK(std::abs(base - smx::s0_position(spec, t, x1, x2, y2, y1, 0, 0)) < 1e-13);
    CHECK(std::abs(base) > 1e-6);  // the probe point actually carries weight

    // both outputs ahead of both inputs: nothing has scattered yet
    CHECK(std::abs(smx::s0_position(spec, t, -1.0, -2.0, 3.0, 4.0, 0, 0)) == 0.0);
}

// ---- momentum kernel as a distribution -------------------------------------------

TEST_CASE("momentum kernel: causal Cauchy terms sum to the hand-built bracket") {
    const double Ex = 0.7, g = 0.22;
    const auto spec = smx::ScattererSpec::two_level(Ex, g);
    const auto t = smx::t_matrix(spec);
    const auto amp = smx::s0_momentum(spec, t, 0, 0);

    CHECK(amp.terms.size() == 4);  // two output slots x two input pairings
    // overall energy delta: p1 + p2 - k1 - k2
    CHECK(amp.energy_delta(1.0, 0.0, 0.0, 0.0) == doctest::Approx(1.0));
    CHECK(amp.energy_delta(0.0, 1.0, 0.0, 0.0) == doctest::Approx(1.0));
    CHECK(amp.energy_delta(0.0, 0.0, 1.0, 0.0) == doctest::Approx(-1.0));
    CHECK(amp.energy_delta(0.0, 0.0, 0.0, 1.0) == doctest::Approx(-1.0));

    const double eta = 1e-3;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int trial = 0; trial < 8; ++trial) {
        const double p1 = u(rng), p2 = u(rng), k1 = u(rng), k2 = u(rng);
        cplx hand = 0.0;
        for (double pm : {p1, p2}) {
            hand += (iu / (2.0 * pi)) * two_level_t(Ex, g, k1) * two_level_t(Ex, g, k2) /
                    (pm - k1 + iu * eta);
            hand += (iu / (2.0 * pi)) * two_level_t(Ex, g, k2) * two_level_t(Ex, g, k1) /
                    (pm - k2 + iu * eta);
        }
        const cplx got = amp.kernel_value(t, p1, p2, k1, k2, eta);
        CHECK(std::abs(got - hand) < 1e-12);
    }
}

TEST_CASE("on-shell reduction: single-channel kernel collapses to two delta terms") {
    const auto spec = smx::ScattererSpec::two_level(0.7, 0.22);
    const auto t = smx::t_matrix(spec);
    const auto red = smx::reduce_on_shell(smx::s0_momentum(spec, t, 0, 0));

    REQUIRE(red.terms.size() == 2);
    // evaluate the singular arguments at a generic on-shell point
    const double p1 = 0.3, p2 = 0.9, k1 = 0.5, k2 = 0.7;  // p1 + p2 == k1 + k2
    std::vector<double> delta_args, t_args;
    for (const auto& term : red.terms) {
        REQUIRE(term.singular.size() == 1);
        CHECK(term.singular[0].kind == smx::SingularKind::Delta);
        delta_args.push_back(std::abs(term.singular[0].form(p1, p2, k1, k2)));
        REQUIRE(term.t_factors.size() == 2);
        CHECK(std::abs(term.prefactor - red.terms[0].prefactor) < 1e-12);
        std::vector<double> args{term.t_factors[0].arg(p1, p2, k1, k2),
                                 term.t_factors[1].arg(p1, p2, k1, k2)};
        std::sort(args.begin(), args.end());
        CHECK(args[0] == doctest::Approx(k1));  // t(k1) t(k2) in every term
        CHECK(args[1] == doctest::Approx(k2));
    }
    std::sort(delta_args.begin(), delta_args.end());
    CHECK(delta_args[0] == doctest::Approx(std::abs(p1 - k1)));  // delta(p1 - k1)
    CHECK(delta_args[1] == doctest::Approx(std::abs(p1 - k2)));  // delta(p1 - k2)

    // a distribution has no pointwise value
    CHECK_THROWS_AS(red.kernel_value(t, 0.3, 0.9, 0.5, 0.7, 1e-6), numeric_error);
}

TEST_CASE("smeared consistency: momentum and position kernels agree (free line)") {
    const auto spec = smx::ScattererSpec::two_level(1.0, 0.3);
    const auto t = smx::identity_t(1);
    smx::GaussProbe out1{1.05, 0.02}, out2{0.95, 0.02}, in1{1.0, 0.02}, in2{1.0, 0.02};
    const auto pair = smx::s0_smeared(spec, t, 0, 0, out1, out2, in1, in2);
    CHECK(std::abs(pair.momentum_side) > 1e-8);
    CHECK(std::abs(pair.momentum_side - pair.position_side) /
              std::abs(pair.momentum_side) <
          1e-8);
}

// ---- contour-residue output wavefunctions ------------------------------------------

TEST_CASE("mode sums evaluate as stated") {
    smx::ModeSum m;
    m.amplitude = {cplx{1.0, 0.0}, cplx{0.0, 2.0}};
    m.phase_rate = {cplx{0.3, 0.0}, cplx{0.1, 0.05}};
    const double l = 3.7;
    const cplx want = std::exp(iu * 0.3 * l) + cplx{0.0, 2.0} * std::exp(iu * cplx{0.1, 0.05} * l);
    CHECK(std::abs(m(l) - want) < 1e-14);
}

TEST_CASE("identity line: residue modes reproduce the free two-packet input") {
    const auto spec = smx::ScattererSpec::two_level(1.0, 0.3);
    const auto t = smx::identity_t(1);
    packet::Envelope e1{packet::EnvelopeKind::Lorentzian, 1.0, 0.01};
    packet::Envelope e2{packet::EnvelopeKind::Lorentzian, 1.0, 0.01};
    auto phi = [&](double k) { return e1.value(k); };

    double worst = 0.0;
    for (double p1 : {0.9, 1.02, 1.13}) {
        for (double p2 : {0.83, 0.97}) {
            const auto modes = smx::output_modes(spec, t, smx::KernelC{}, e1, e2, p1, p2, 0, 0);
            for (const auto& r : modes.phase_rate) CHECK(r.imag() > -1e-12);
            for (double l : {3.0, 11.0, 40.0}) {
                const cplx want = phi(p1) * phi(p2) *
                                  (std::exp(iu * p2 * l) + std::exp(iu * p1 * l));
                worst = std::max(worst, std::abs(modes(l) - want));
            }
        }
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("scattered output: residues agree with the quadrature oracle") {
    const auto spec = smx::ScattererSpec::two_level(0.0, 0.108);
    const auto t = smx::t_matrix(spec);
    const auto c = smx::synthetic_kernel_c(cplx{0.0, -0.11}, cplx{0.02, 0.0});
    packet::Envelope e1{packet::EnvelopeKind::Lorentzian, 0.0, 0.01};
    packet::Envelope e2{packet::EnvelopeKind::Lorentzian, 0.0, 0.01};

    const auto v = smx::output_wavefunction(spec, t, c, e1, e2, 12.0, 0.14, -0.11, 0, 0, 1e-9);
    CHECK(std::abs(v.residue) > 1e-8);
    CHECK(v.difference < 1e-6);
}

TEST_CASE("synthetic inelastic kernel: exchange symmetry and pole report") {
    const cplx pole{0.05, -0.09}, strength{0.3, 0.1};
    const auto c = smx::synthetic_kernel_c(pole, strength);
    REQUIRE(!c.empty());
    const double p1 = 0.2, p2 = -0.1, s = 0.4;
    for (double k : {0.3, -0.7, 1.1}) {
        CHECK(std::abs(c.eval(p1, p2, s, k) - c.eval(p1, p2, s, s - k)) < 1e-13);
    }
    const auto ps = c.poles(s);
    REQUIRE(ps.size() == 2);
    const bool direct = std::abs(ps[0] - pole) < 1e-13 || std::abs(ps[1] - pole) < 1e-13;
    const bool image = std::abs(ps[0] - (s - pole)) < 1e-13 || std::abs(ps[1] - (s - pole)) < 1e-13;
    CHECK(direct);
    CHECK(image);
}

TEST_CASE("output modes: configuration and degeneracy failures") {
    const auto spec = smx::ScattererSpec::two_level(0.0, 0.1085);
    const auto t = smx::t_matrix(spec);
    packet::Envelope lor{packet::EnvelopeKind::Lorentzian, 0.0, 0.01};
    packet::Envelope gau{packet::EnvelopeKind::Gaussian, 0.0, 0.01};

    // residue closure requires rational envelopes
    CHECK_THROWS_AS(smx::output_modes(spec, t, smx::KernelC{}, gau, lor, 0.1, -0.05, 0, 0),
                    config_error);

    // an inelastic pole riding the real axis is rejected outright
    CHECK_THROWS_AS(smx::synthetic_kernel_c(cplx{0.05, -1e-12}, cplx{0.1, 0.0}),
                    config_error);

    // a kernel pole grazing the transmission pole defeats the residue split
    const cplx z0{0.0, -pi * 0.1085 * 0.1085};
    const auto grazing = smx::synthetic_kernel_c(z0 + cplx{1e-10, 0.0}, cplx{0.1, 0.0});
    CHECK_THROWS_AS(smx::output_modes(spec, t, grazing, lor, lor, 0.1, -0.05, 0, 0),
                    numeric_error);
}

// ---- decay-rate extraction -----------------------------------------------------

TEST_CASE("decay scan: validation and degenerate expected rates") {
    smx::DecayScanConfig cfg;
    cfg.l_grid = {1.0, 2.0, 3.0};  // far below the 16-point minimum
    CHECK_THROWS_AS(cfg.validate(), config_error);

    for (int i = 0; i < 20; ++i) cfg.l_grid.push_back(4.0 + i);
    cfg.l_grid.insert(cfg.l_grid.begin(), {1.0, 2.0, 3.0});
    cfg.l_grid.erase(cfg.l_grid.begin(), cfg.l_grid.begin() + 3);  // uniform 4..23
    cfg.l_grid.push_back(100.0);                                    // breaks uniformity
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg.l_grid.pop_back();
    CHECK_NOTHROW(cfg.validate());

    // sigma within 1% of the radiative width: rates cannot be told apart
    const double g = std::sqrt(0.0101 / pi);  // pi g^2 = 1.01 sigma
    const auto spec = smx::ScattererSpec::two_level(0.0, g);
    const auto t = smx::t_matrix(spec);
    packet::Envelope e{packet::EnvelopeKind::Lorentzian, 0.0, 0.01};
    CHECK_THROWS_AS(smx::decay_rates(spec, t, smx::KernelC{}, e, e, cfg), numeric_error);
}

TEST_CASE("decay scan: recovers envelope, radiative, and inelastic rates") {
    const double sigma = 0.01;
    const auto spec = smx::ScattererSpec::two_level(0.0, 0.1085);  // pi g^2 = 0.03698
    const auto t = smx::t_matrix(spec);
    const auto c = smx::synthetic_kernel_c(cplx{0.0, -0.11}, cplx{0.02, 0.0});
    packet::Envelope e1{packet::EnvelopeKind::Lorentzian, +0.06, sigma};
    packet::Envelope e2{packet::EnvelopeKind::Lorentzian, -0.06, sigma};

    smx::DecayScanConfig cfg;
    for (int i = 0; i < 200; ++i) cfg.l_grid.push_back(2.0 + i);
    cfg.exclusion = 0.50;
    cfg.max_modes = 24;
    cfg.amp_floor = 0.01;

    const auto res = smx::decay_rates(spec, t, c, e1, e2, cfg);
    REQUIRE(res.expected.size() == 3);
    CHECK(res.all_explained);

    // every expected amplitude rate is evidenced by a diagonal (Matched) mode
    // or by a beat (Cross) against another expected rate
    auto evidenced = [&](double target) {
        for (const auto& m : res.modes) {
            if (m.kind == smx::ModeClass::Matched &&
                std::abs(m.rate - target) <= 0.05 * target)
                return true;
            if (m.kind == smx::ModeClass::Cross) {
                for (double other : res.expected) {
                    const double beat = target + other;
                    if (std::abs(m.raw_rate - beat) <= 0.05 * beat) return true;
                }
            }
        }
        return false;
    };
    for (double e : res.expected) CHECK(evidenced(e));

    // deterministic across worker counts
    smx::DecayScanConfig cfg4 = cfg;
    cfg4.threads = 4;
    const auto res4 = smx::decay_rates(spec, t, c, e1, e2, cfg4);
    REQUIRE(res4.weight.size() == res.weight.size());
    for (std::size_t i = 0; i < res.weight.size(); ++i)
        CHECK(res4.weight[i] == res.weight[i]);
}
