// numerics.hpp -- shared numerical primitives: adaptive Gauss-Kronrod
// quadrature (complex integrands), Cauchy principal values, decay-law fits,
// multi-exponential extraction (matrix pencil), Bessel-J arrays.

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "wqed/types.hpp"

namespace wqed::num {

// ---- adaptive quadrature ----------------------------------------------

struct QuadOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    long max_panels = 200000;  // refinement budget
    int initial_panels = 1;    // uniform pre-split; raise for oscillatory integrands
};

struct QuadResult {
    cplx value{0.0, 0.0};
    double error = 0.0;  // accumulated error estimate
    long evaluations = 0;
    bool converged = false;
};

// Adaptive 15-point Gauss-Kronrod on [a, b].  Never evaluates f at a or b.
QuadResult integrate(const std::function<cplx(double)>& f, double a, double b,
                     const QuadOptions& opt = {});

// Same, but the initial subdivision additionally splits at the given interior
// points (pole locations, kinks, packet centers...).
QuadResult integrate_seeded(const std::function<cplx(double)>& f, double a, double b,
                            std::vector<double> seeds, const QuadOptions& opt = {});

// Cauchy principal value of  \int_a^b f(x)/(x - x0) dx,  a < x0 < b.
// Symmetric fold around x0 plus ordinary quadrature of the remainder.
QuadResult principal_value(const std::function<cplx(double)>& f, double a, double b,
                           double x0, const QuadOptions& opt = {});

// ---- least-squares fits ------------------------------------------------

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

enum class DecayModel { PowerLaw, Exponential };

// Competing fits of positive magnitudes m(d):  log m vs log d  (power law,
// m ~ A d^-n)  against  log m vs d  (exponential, m ~ A e^{-r d}).
struct DecayFitResult {
    DecayModel best = DecayModel::PowerLaw;
    double power_exponent = 0.0;  // n in m ~ A d^-n
    double power_r2 = 0.0;
    double exp_rate = 0.0;  // r in m ~ A e^{-r d}
    double exp_r2 = 0.0;
    int used_samples = 0;
};

// Samples with m <= floor are dropped (numeric noise); requires >= 4 usable
// samples at distinct positive d, else throws numeric_error.
DecayFitResult fit_decay(std::span<const double> d, std::span<const double> m,
                         double floor = 1e-14);

// ---- multi-exponential extraction --------------------------------------

struct ExpMode {
    cplx s;          // samples ~ sum_i amplitude_i * exp(s_i * (x - x0))
    cplx amplitude;  // on the uniform sample grid
};

// Matrix-pencil (Hua/Sarkar) fit of uniformly sampled data y_j = y(x0 + j*dx).
// Rank chosen by relative singular-value cutoff; modes sorted by |amplitude|
// descending.  Throws numeric_error if fewer than 2*max_modes samples.
std::vector<ExpMode> matrix_pencil(std::span<const double> y, double dx,
                                   int max_modes, double sv_rel_tol = 1e-8);

// ---- special functions ---------------------------------------------------

// J_0(x) .. J_n(x) by Miller downward recurrence (stable for all n, x >= 0).
std::vector<double> bessel_j_array(int n, double x);

}  // namespace wqed::num
