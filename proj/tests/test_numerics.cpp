// Oracle checks for the shared numerical primitives.  Reference values are
// either textbook integrals, convergent series evaluated in the test, or the
// standard-library Bessel functions.

#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "wqed/numerics.hpp"
#include "wqed/types.hpp"

using namespace wqed;

// ---- adaptive quadrature -------------------------------------------------

TEST_CASE("quadrature: polynomial and trigonometric references") {
    auto sq = [](double x) { return cplx{x * x, 0.0}; };
    auto r1 = num::integrate(sq, 0.0, 1.0);
    CHECK(r1.converged);
    CHECK(std::abs(r1.value - cplx{1.0 / 3.0, 0.0}) < 1e-12);

    auto r2 = num::integrate([](double x) { return cplx{std::sin(x), 0.0}; }, 0.0, pi);
    CHECK(std::abs(r2.value - cplx{2.0, 0.0}) < 1e-12);

    // full periods of e^{3ix} cancel exactly
    auto r3 = num::integrate([](double x) { return std::exp(iu * (3.0 * x)); }, 0.0, 2.0 * pi,
                             {1e-12, 1e-12, 200000, 8});
    CHECK(std::abs(r3.value) < 1e-10);
}

TEST_CASE("quadrature: Gaussian integral over a wide window") {
    auto g = [](double x) { return cplx{std::exp(-x * x), 0.0}; };
    auto r = num::integrate(g, -8.0, 8.0);
    CHECK(r.converged);
    CHECK(std::abs(r.value.real() - std::sqrt(pi)) < 1e-12);
    CHECK(std::abs(r.value.imag()) < 1e-14);
}

TEST_CASE("quadrature: seeded split handles an interior kink") {
    // int_{-1}^{1} |x - 0.3| dx = (1.3^2 + 0.7^2) / 2 = 1.09
    auto f = [](double x) { return cplx{std::abs(x - 0.3), 0.0}; };
    auto r = num::integrate_seeded(f, -1.0, 1.0, {0.3});
    CHECK(r.converged);
    CHECK(std::abs(r.value.real() - 1.09) < 1e-12);
}

TEST_CASE("principal value: logarithmic and entire-part references") {
    // P int_{-1}^{2} dx / x = ln 2
    auto one = [](double) { return cplx{1.0, 0.0}; };
    auto r1 = num::principal_value(one, -1.0, 2.0, 0.0);
    CHECK(std::abs(r1.value.real() - std::log(2.0)) < 1e-12);

    // P int_{-1}^{1} e^x / x dx = 2 Shi(1), Shi(1) = sum_n 1 / ((2n+1)(2n+1)!)
    double shi = 0.0, fact = 1.0;
    for (int n = 0; n <= 12; ++n) {
        const int m = 2 * n + 1;
        if (n > 0) fact *= (2.0 * n) * (2.0 * n + 1.0);  // (2n+1)!
        shi += 1.0 / (m * fact);
    }
    auto ex = [](double x) { return cplx{std::exp(x), 0.0}; };
    auto r2 = num::principal_value(ex, -1.0, 1.0, 0.0);
    CHECK(std::abs(r2.value.real() - 2.0 * shi) < 1e-11);
}

// ---- least-squares fits --------------------------------------------------

TEST_CASE("linear fit: exact line") {
    std::vector<double> x{0.0, 1.0, 2.0, 3.0, 4.5}, y;
    for (double v : x) y.push_back(3.0 * v - 2.0);
    auto f = num::linear_fit(x, y);
    CHECK(f.slope == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("decay fit: recovers a pure power law") {
    std::vector<double> d, m;
    for (double x : {1.0, 2.0, 3.0, 5.0, 8.0, 13.0}) {
        d.push_back(x);
        m.push_back(5.0 * std::pow(x, -3.0));
    }
    auto fit = num::fit_decay(d, m);
    CHECK(fit.best == num::DecayModel::PowerLaw);
    CHECK(fit.power_exponent == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(fit.power_r2 > 0.999999);
}

TEST_CASE("decay fit: recovers a pure exponential") {
    std::vector<double> d, m;
    for (double x : {1.0, 2.0, 3.0, 5.0, 8.0, 13.0}) {
        d.push_back(x);
        m.push_back(2.0 * std::exp(-0.7 * x));
    }
    auto fit = num::fit_decay(d, m);
    CHECK(fit.best == num::DecayModel::Exponential);
    CHECK(fit.exp_rate == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(fit.exp_r2 > 0.999999);
}

TEST_CASE("decay fit: floor drops noise samples, starvation throws") {
    // the floor removes the last three samples, leaving too few to fit
    std::vector<double> d{1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
    std::vector<double> m{1e-1, 1e-2, 1e-3, 1e-16, 1e-17, 1e-18};
    CHECK_THROWS_AS(num::fit_decay(d, m, 1e-14), numeric_error);
    CHECK_THROWS_AS(num::fit_decay(std::vector<double>{1.0, 2.0, 3.0},
                                   std::vector<double>{1.0, 0.5, 0.2}),
                    numeric_error);
    // with the floor lowered, every sample participates
    auto fit = num::fit_decay(d, m, 1e-20);
    CHECK(fit.used_samples == 6);
}

// ---- matrix pencil ---------------------------------------------------------

TEST_CASE("matrix pencil: three-mode synthetic signal") {
    // y(x) = 2 e^{-0.3 x} + e^{-0.05 x} cos(2 x): one real mode plus a
    // conjugate pair with amplitudes 0.5.
    const double dx = 0.1;
    std::vector<double> y;
    for (int j = 0; j < 120; ++j) {
        const double x = dx * j;
        y.push_back(2.0 * std::exp(-0.3 * x) + std::exp(-0.05 * x) * std::cos(2.0 * x));
    }
    auto modes = num::matrix_pencil(y, dx, 6);
    REQUIRE(modes.size() >= 3);
    // dominant mode: the real exponential
    CHECK(std::abs(modes[0].s - cplx{-0.3, 0.0}) < 1e-7);
    CHECK(std::abs(modes[0].amplitude - cplx{2.0, 0.0}) < 1e-7);
    // the pair straddles the real axis at rate 0.05, frequency 2
    int found = 0;
    for (std::size_t i = 1; i < modes.size(); ++i) {
        if (std::abs(modes[i].s.real() + 0.05) < 1e-6 &&
            std::abs(std::abs(modes[i].s.imag()) - 2.0) < 1e-6) {
            CHECK(std::abs(modes[i].amplitude - cplx{0.5, 0.0}) < 1e-6);
            ++found;
        }
    }
    CHECK(found == 2);
}

TEST_CASE("matrix pencil: refuses starved sample sets") {
    std::vector<double> y(7, 1.0);
    CHECK_THROWS_AS(num::matrix_pencil(y, 0.1, 4), numeric_error);
}

// ---- Bessel functions -------------------------------------------------------

TEST_CASE("bessel array: matches the standard library") {
    for (double x : {0.5, 1.0, 5.0, 20.0}) {
        auto j = num::bessel_j_array(30, x);
        REQUIRE(j.size() == 31);
        for (int n = 0; n <= 30; ++n) {
            const double ref = std::cyl_bessel_j(static_cast<double>(n), x);
            CHECK(std::abs(j[n] - ref) < 1e-13);
        }
    }
    auto j0 = num::bessel_j_array(0, 0.0);
    CHECK(j0[0] == doctest::Approx(1.0));
}

TEST_CASE("bessel array: closure sum rule") {
    // J_0(x)^2 + 2 sum_{n>=1} J_n(x)^2 = 1
    auto j = num::bessel_j_array(60, 7.3);
    double s = j[0] * j[0];
    for (int n = 1; n <= 60; ++n) s += 2.0 * j[n] * j[n];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-13));
}
