// smatrix.hpp -- closed-form scattering machinery for a chiral (one-way,
// linear-dispersion, c = 1) waveguide coupled to a point scatterer with
// several ground/metastable channels and several excited levels:
//
//   * single-photon transmission matrices t_{mu nu}(k): rational in k, column
//     unitarity on the real axis, simple poles in the lower half-plane;
//   * the causally ordered two-photon kernel built from independent
//     single-photon events, in position representation (Heaviside-ordered
//     kernel products) and in momentum representation (a distribution-valued
//     sum of Cauchy terms over an overall energy delta), plus exact singular
//     algebra (delta / principal-value split and on-shell cancellation);
//   * scattered two-photon wavefunctions for a pair of Lorentzian packets at
//     separation l, evaluated both by contour residues and by an adaptive
//     quadrature oracle, including an optional genuinely inelastic kernel
//     with user-supplied pole structure;
//   * fluorescence-window decay scans F(l) with multi-exponential rate
//     extraction and classification against the known pole/width rates.

#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "wqed/types.hpp"
#include "wqed/wavepacket.hpp"

namespace wqed::smx {

// ---- scatterer ---------------------------------------------------------

struct ScattererSpec {
    Eigen::VectorXd e_ground;    // channel energies E_mu (one per ground/metastable state)
    Eigen::VectorXd e_excited;   // bare excited-level energies, before radiative shifts
    Eigen::MatrixXcd coupling;   // coupling(j, mu): excited level j <-> channel mu, units energy^(1/2)

    int channels() const { return static_cast<int>(e_ground.size()); }
    int levels() const { return static_cast<int>(e_excited.size()); }
    void validate() const;

    // diag(e_excited) - i pi G G^dagger; eigenvalues sit in the closed lower
    // half-plane and carry the radiative widths.
    Eigen::MatrixXcd effective_hamiltonian() const;

    static ScattererSpec two_level(double excited_energy, double g);
    // Ground channels {0, raman_shift}, one excited level coupled to both.
    static ScattererSpec lambda_atom(double raman_shift, double excited_energy, double g1,
                                     double g2);
};

// ---- single-photon transmission matrix ----------------------------------

struct TPole {
    cplx position;              // pole location in the incident momentum k
    Eigen::MatrixXcd residue;   // matrix residue; zero columns for channels not sharing the pole
};

struct TMatrix {
    int channels = 1;
    std::function<Eigen::MatrixXcd(cplx)> eval;  // analytic continuation, simple poles only
    std::vector<TPole> poles;                    // all poles of eval (lower half-plane)

    Eigen::MatrixXcd at(cplx k) const;
    // max over columns nu of | sum_mu |t_{mu nu}(k)|^2 - 1 |  (lossless line)
    double unitarity_defect(double k) const;
};

// Single-excitation scattering solution for the chiral point coupling:
//   t_{mu nu}(k) = delta_{mu nu} - 2 pi i [G^dag M(E)^{-1} G]_{mu nu},
//   E = k + E_nu,  M(E) = E - diag(E_tilde) + i pi G G^dag.
// Throws numeric_error when the effective Hamiltonian has a real eigenvalue
// (bound state in the continuum: M singular at real energy).
TMatrix t_matrix(const ScattererSpec& spec);

// Free line: t = identity, no poles.
TMatrix identity_t(int channels);

// ---- one- and two-photon position kernels -------------------------------

// Smooth (scattered) part of the single-photon position kernel; the full
// kernel is delta_{mu nu} delta(y - x) plus this.  The scattered wave trails
// the free front: the value vanishes for y > x.
cplx scattered_kernel(const ScattererSpec& spec, const TMatrix& t, int mu, int nu, double y,
                      double x);

// Two-photon kernel value at generic points (all y_i != x_j, y1 != y2):
// sum over intermediate channels of ordered products of single-photon
// kernels, with both input pairings and both output orderings.  The
// delta-supported (free pass-through) pieces live on the diagonals y_i = x_j
// and are excluded from the pointwise value.
cplx s0_position(const ScattererSpec& spec, const TMatrix& t, double x1, double x2, double y1,
                 double y2, int mu, int nu);

// ---- momentum-space kernel as a symbolic distribution --------------------

// Affine form c . (p1, p2, k1, k2) + constant, the argument of singular
// factors and transmission factors.
struct LinearForm {
    double p1 = 0.0, p2 = 0.0, k1 = 0.0, k2 = 0.0;
    double constant = 0.0;

    double operator()(double vp1, double vp2, double vk1, double vk2) const {
        return p1 * vp1 + p2 * vp2 + k1 * vk1 + k2 * vk2 + constant;
    }
};

enum class SingularKind {
    CauchyPlus,      // 1 / (f + i0+)
    Delta,           // delta(f)
    PrincipalValue,  // P (1/f)
};

struct SingularFactor {
    SingularKind kind = SingularKind::CauchyPlus;
    LinearForm form;
};

struct TFactor {
    int row = 0, col = 0;  // t_{row col}
    LinearForm arg;
};

struct AmplitudeTerm {
    cplx prefactor{0.0, 0.0};
    std::vector<TFactor> t_factors;
    std::vector<SingularFactor> singular;
};

// Distribution-valued two-photon amplitude: an overall energy delta times a
// sum of terms, each a product of transmission factors and singular factors.
struct TwoPhotonAmplitude {
    int mu = 0, nu = 0;
    LinearForm energy_delta;           // p1 + p2 - k1 - k2 + (E_mu - E_nu)
    std::vector<AmplitudeTerm> terms;

    // Pointwise kernel value (the overall delta excluded) with the causal
    // regulator i0+ -> i eta.  Requires all singular factors to be CauchyPlus;
    // reduced amplitudes containing Delta/PrincipalValue factors have no
    // pointwise value and throw numeric_error.
    cplx kernel_value(const TMatrix& t, double vp1, double vp2, double vk1, double vk2,
                      double eta) const;
};

// The causally ordered two-photon kernel: for each output slot m, input slot n
// and intermediate channel lambda one Cauchy term
//   (i/2pi) t_{mu lambda}(k_n) t_{lambda nu}(k_n') / (p_m + E_mu - k_n - E_lambda + i0+).
TwoPhotonAmplitude s0_momentum(const ScattererSpec& spec, const TMatrix& t, int mu, int nu);

// Exact singular algebra modulo the overall energy delta: splits each Cauchy
// factor into -i pi delta + principal value, canonicalizes arguments on the
// delta shell, cancels principal values and merges equal terms.
TwoPhotonAmplitude reduce_on_shell(const TwoPhotonAmplitude& amp);

// ---- smeared consistency of the two representations ----------------------

// Narrow momentum-space test packet f(k) = exp(-(k - center)^2 / (4 width^2)).
struct GaussProbe {
    double center = 0.0;
    double width = 0.02;
};

struct SmearedPair {
    cplx momentum_side = 0.0;  // probes contracted with the momentum kernel
    cplx position_side = 0.0;  // Fourier-transformed probes against the position kernel
};

// Contracts conj(out1 x out2) . S0 . (in1 x in2) in both representations.
// The two values agree identically in exact arithmetic; the returned pair
// exposes the numerical difference.
SmearedPair s0_smeared(const ScattererSpec& spec, const TMatrix& t, int mu, int nu,
                       const GaussProbe& out1, const GaussProbe& out2, const GaussProbe& in1,
                       const GaussProbe& in2);

// ---- scattered wavefunction for a separated packet pair ------------------

// Contracted inelastic kernel supplement C~(p1, p2, k) with simple k-poles.
// `poles` reports the pole positions for a given total energy s (poles may
// ride on s through the k <-> s - k exchange symmetry).
struct KernelC {
    std::function<cplx(double p1, double p2, double s, cplx k)> eval;
    std::function<std::vector<cplx>(double s)> poles;

    bool empty() const { return !static_cast<bool>(eval); }
};

// strength * [ 1/(k - pole) + 1/((s - k) - pole) ], exchange-symmetric.
KernelC synthetic_kernel_c(cplx pole, cplx strength);

// One exponential mode of the scattered wavefunction at fixed (p1, p2):
// phi(l) = sum_a amplitude[a] * exp(i * phase_rate[a] * l).  Im(phase_rate)
// >= 0; zero imaginary part marks the non-decaying elastic component.
struct ModeSum {
    std::vector<cplx> amplitude;
    std::vector<cplx> phase_rate;

    cplx operator()(double l) const;
};

struct OutputValue {
    cplx residue = 0.0;     // contour-residue evaluation
    cplx quadrature = 0.0;  // adaptive quadrature oracle with i0+ -> i eta
    double difference = 0.0;
};

// Residue data of the scattered two-photon wavefunction at fixed outgoing
// momenta: the integral over the internal momentum is closed downward for the
// e^{i(s-k)l} summand and upward for the e^{ikl} summand.  Envelope poles,
// transmission poles, inelastic-kernel poles and the causal i0+ poles each
// contribute one mode.  Both envelopes must be Lorentzian.  Throws
// numeric_error on pole degeneracy or on a non-causal pole within 1e-9 of the
// real axis (use the principal-value/quadrature path for such kernels).
ModeSum output_modes(const ScattererSpec& spec, const TMatrix& t, const KernelC& c,
                     const packet::Envelope& in1, const packet::Envelope& in2, double p1,
                     double p2, int mu, int nu);

// Scattered wavefunction at (p1, p2) for packets separated by l > 0,
// evaluated by residues and independently by the quadrature oracle.
OutputValue output_wavefunction(const ScattererSpec& spec, const TMatrix& t, const KernelC& c,
                                const packet::Envelope& in1, const packet::Envelope& in2,
                                double separation, double p1, double p2, int mu, int nu,
                                double eta = 1e-8);

// ---- fluorescence decay-rate extraction ----------------------------------

struct DecayScanConfig {
    std::vector<double> l_grid;     // uniform ascending separations, >= 16 points
    double shell_halfwidth = 0.0;   // |p1 + p2 - (kbar1 + kbar2)| window; 0 -> 4 (sigma1 + sigma2)
    double exclusion = 0.0;         // min_i,j |p_i - kbar_j| >= this; 0 -> 12 max(sigma)
    double box_halfwidth = 0.0;     // momentum box around (kbar1, kbar2); 0 -> exclusion + 8 max(sigma)
    int grid_n = 48;                // quadrature points per momentum axis
    int max_modes = 8;              // matrix-pencil mode budget
    double amp_floor = 3e-3;        // relative amplitude cutoff for retained modes
    double match_tol = 0.05;        // fractional tolerance against expected rates
    int mu = 0, nu = 0;
    int threads = 1;

    void validate() const;
};

enum class ModeClass {
    Matched,      // intensity mode at twice a known amplitude rate
    Cross,        // beat between two amplitude modes (sum of two known rates)
    Elastic,      // non-decaying remnant of the elastic component
    Unexplained,  // nothing in the expected set accounts for it
};

struct DecayMode {
    double raw_rate = 0.0;   // decay rate of the F(l) intensity mode
    double rate = 0.0;       // halved rate for Matched modes, else raw
    cplx amplitude = 0.0;    // pencil amplitude at the first grid point
    ModeClass kind = ModeClass::Unexplained;
    int matched_to = -1;     // index into `expected` for Matched modes
};

struct DecayResult {
    std::vector<double> l;         // separation grid
    std::vector<double> weight;    // fluorescence-window weight F(l)
    std::vector<double> expected;  // {sigma} + {|Im t-poles|} + {|Im C-poles|}
    std::vector<DecayMode> modes;  // retained pencil modes, classified
    std::vector<double> matched;   // recovered amplitude rates, ascending
    bool all_explained = false;    // no Unexplained mode above the floor
};

// Window weight of the scattered wavefunction versus packet separation, with
// multi-exponential extraction.  Intensity modes decay at sums of pairs of
// amplitude rates; diagonal modes are halved back to the amplitude rate and
// matched against the expected set.  Throws numeric_error if two expected
// rates lie within 1% of each other (degenerate fit).
DecayResult decay_rates(const ScattererSpec& spec, const TMatrix& t, const KernelC& c,
                        const packet::Envelope& in1, const packet::Envelope& in2,
                        const DecayScanConfig& cfg);

}  // namespace wqed::smx
