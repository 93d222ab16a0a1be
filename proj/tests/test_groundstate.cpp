// Ground-state physics on small chains: exact RWA vacuum, dressing-cloud
// shape and ordering in the coupling, correlator bounds, and the variational
// sanity of the Lanczos minimum.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "wqed/groundstate.hpp"
#include "wqed/lattice.hpp"

using namespace wqed;

namespace {

ground::GroundStateResult solve(const model::LatticeSpec& spec,
                                const model::SectorBasis& basis) {
    const auto H = model::build_hamiltonian(spec, basis);
    return ground::ground_state(H);
}

}  // namespace

TEST_CASE("RWA ground state is the bare vacuum") {
    model::LatticeSpec spec;
    spec.L = 21;
    spec.n_max = 2;
    spec.g = 0.3;
    spec.rwa = true;
    const auto basis = model::SectorBasis::build(spec);
    const auto gs = solve(spec, basis);

    CHECK(std::abs(gs.energy) < 1e-10);
    const auto vac = basis.find(false, std::vector<int>{});
    REQUIRE(vac.has_value());
    const double off_vacuum = 1.0 - std::norm(gs.state(*vac));
    CHECK(off_vacuum < 1e-10);
}

TEST_CASE("Rabi ground state: energy decreases with coupling") {
    model::LatticeSpec spec;
    spec.L = 21;
    spec.n_max = 2;
    spec.rwa = false;
    const auto basis = model::SectorBasis::build(spec);

    spec.g = 0.0;
    const double e0 = solve(spec, basis).energy;
    spec.g = 0.3;
    const double e3 = solve(spec, basis).energy;
    spec.g = 0.6;
    const double e6 = solve(spec, basis).energy;

    CHECK(std::abs(e0) < 1e-10);        // decoupled chain: empty vacuum
    CHECK(e3 < -1e-6);                  // level repulsion pushes the minimum down
    CHECK(e6 < e3);
}

TEST_CASE("dressing cloud: peak, symmetry, and photon-number ordering") {
    model::LatticeSpec spec;
    spec.L = 21;
    spec.n_max = 3;
    spec.rwa = false;

    ground::CloudProfile clouds[2];
    const double gs_values[2] = {0.3, 0.6};
    for (int i = 0; i < 2; ++i) {
        spec.g = gs_values[i];
        const auto basis = model::SectorBasis::build(spec);
        const auto gs = solve(spec, basis);
        clouds[i] = ground::cloud_profile(spec, basis, gs.state);
    }

    for (const auto& c : clouds) {
        REQUIRE(c.site_density.size() == spec.L);
        // peak at the scatterer
        int imax = 0;
        c.site_density.maxCoeff(&imax);
        CHECK(imax == spec.site_index(0));
        CHECK(c.peak_density == doctest::Approx(c.site_density(imax)));
        // reflection symmetry about x = 0
        for (int x = 1; x <= spec.half(); ++x)
            CHECK(std::abs(c.site_density(spec.site_index(x)) -
                           c.site_density(spec.site_index(-x))) < 1e-8);
        // total photons equals the density sum
        CHECK(c.total_photons == doctest::Approx(c.site_density.sum()).epsilon(1e-10));
        CHECK(c.qubit_occupation > 0.0);
        CHECK(c.qubit_occupation < 1.0);
        // exponential tail
        CHECK(c.tail_fit_ok);
        CHECK(c.correlation_length > 0.0);
        CHECK(c.tail_r2 > 0.9);
    }

    CHECK(clouds[1].total_photons > clouds[0].total_photons);
    CHECK(clouds[0].total_photons > 0.0);
}

TEST_CASE("correlators: hermiticity, positive diagonal, and the momentum bound") {
    model::LatticeSpec spec;
    spec.L = 21;
    spec.n_max = 3;
    spec.g = 0.6;
    spec.rwa = false;
    const auto basis = model::SectorBasis::build(spec);
    const auto gs = solve(spec, basis);

    const auto c_xy = ground::position_correlations(basis, gs.state);
    REQUIRE(c_xy.rows() == spec.L);
    CHECK((c_xy - c_xy.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    for (int i = 0; i < spec.L; ++i) CHECK(c_xy(i, i).real() > -1e-12);

    const auto c_kp = ground::momentum_correlations(spec, c_xy);
    // the transform is unitary: traces agree
    CHECK(std::abs(c_kp.trace() - c_xy.trace()) < 1e-10);

    const auto bound = ground::correlator_bound_check(spec, basis, gs.state, c_kp);
    CHECK(bound.worst_violation < 1e-9);
    CHECK(bound.min_diag > -1e-12);
    CHECK(bound.max_diag > 0.0);
}

TEST_CASE("variational margin: no single-photon excitation undercuts the minimum") {
    model::LatticeSpec spec;
    spec.L = 21;
    spec.n_max = 3;
    spec.g = 0.6;
    spec.rwa = false;
    const auto basis = model::SectorBasis::build(spec);
    const auto H = model::build_hamiltonian(spec, basis);
    const auto gs = ground::ground_state(H);
    CHECK(ground::variational_margin(spec, basis, H, gs.state, gs.energy) > -1e-9);
}

TEST_CASE("lanczos: deterministic for a fixed seed, stable across block sizes") {
    model::LatticeSpec spec;
    spec.L = 15;
    spec.n_max = 2;
    spec.g = 0.5;
    spec.rwa = false;
    const auto basis = model::SectorBasis::build(spec);
    const auto H = model::build_hamiltonian(spec, basis);

    ground::LanczosOptions opt;
    opt.seed = 42;
    const auto a = ground::ground_state(H, opt);
    const auto b = ground::ground_state(H, opt);
    CHECK(a.energy == b.energy);
    CHECK((a.state - b.state).norm() == 0.0);

    opt.block_size = 12;
    opt.seed = 7;
    const auto c = ground::ground_state(H, opt);
    CHECK(std::abs(c.energy - a.energy) < 1e-10);
    CHECK(a.residual < 1e-9);
}

TEST_CASE("packet-over-vacuum deviation decays with scatterer distance") {
    model::LatticeSpec spec;
    spec.L = 101;
    spec.n_max = 2;
    spec.g = 0.4;
    spec.rwa = false;
    const auto basis = model::SectorBasis::build(spec);
    const auto gs = solve(spec, basis);

    packet::PacketSpec base;
    base.k_bar = pi / 2;
    base.sigma = 0.25;
    std::vector<double> x_bars{-30.0, -27.0, -24.0, -21.0};
    const auto scan = ground::packet_vacuum_scan(spec, basis, gs.state, base, x_bars);
    REQUIRE(scan.deviation.size() == x_bars.size());
    for (double d : scan.deviation) CHECK(d > -1e-10);
    // farther packets contract less with the cloud
    CHECK(std::abs(scan.deviation.front()) < std::abs(scan.deviation.back()));
}
