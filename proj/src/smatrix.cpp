#include "wqed/smatrix.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "wqed/numerics.hpp"
#include "wqed/parallel.hpp"

namespace wqed::smx {

namespace {

constexpr cplx kTwoPiI{0.0, 2.0 * pi};

// Lorentzian envelope continued off the real axis; the residue machinery
// leans on the single simple pole at k_bar - i sigma.
cplx lorentzian_value(const packet::Envelope& e, cplx k) {
    return std::sqrt(e.sigma / pi) / (k - e.k_bar + iu * e.sigma);
}

void require_lorentzian(const packet::Envelope& e, const char* who) {
    e.validate();
    if (e.kind != packet::EnvelopeKind::Lorentzian)
        throw config_error(std::string(who) + ": Lorentzian envelopes required");
}

// Sum of the residues of f enclosed by a circle; exact (up to the trapezoid
// tail ~ (radius/dist)^n) for meromorphic f when every enclosed pole is
// centered.  Evaluations never touch the center.
cplx circle_residue(const std::function<cplx(cplx)>& f, cplx center, double radius,
                    int n = 48) {
    cplx acc = 0.0;
    for (int j = 0; j < n; ++j) {
        const double th = 2.0 * pi * (j + 0.5) / n;
        const cplx d = radius * cplx{std::cos(th), std::sin(th)};
        acc += f(center + d) * d;
    }
    return acc / static_cast<double>(n);
}

Eigen::MatrixXcd matrix_circle_residue(const std::function<Eigen::MatrixXcd(cplx)>& f,
                                       cplx center, double radius, int channels,
                                       int n = 64) {
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(channels, channels);
    for (int j = 0; j < n; ++j) {
        const double th = 2.0 * pi * (j + 0.5) / n;
        const cplx d = radius * cplx{std::cos(th), std::sin(th)};
        acc += f(center + d) * d;
    }
    return acc / static_cast<double>(n);
}

int check_channel(const ScattererSpec& spec, int ch, const char* who) {
    if (ch < 0 || ch >= spec.channels())
        throw config_error(std::string(who) + ": channel index out of range");
    return ch;
}

}  // namespace

// ---- scatterer ---------------------------------------------------------

void ScattererSpec::validate() const {
    if (channels() < 1) throw config_error("scatterer: need at least one ground channel");
    if (levels() < 1) throw config_error("scatterer: need at least one excited level");
    if (coupling.rows() != levels() || coupling.cols() != channels())
        throw config_error("scatterer: coupling must be levels x channels");
    if (!e_ground.allFinite() || !e_excited.allFinite() || !coupling.allFinite())
        throw config_error("scatterer: entries must be finite");
}

Eigen::MatrixXcd ScattererSpec::effective_hamiltonian() const {
    Eigen::MatrixXcd h = e_excited.cast<cplx>().asDiagonal();
    h -= iu * pi * (coupling * coupling.adjoint());
    return h;
}

ScattererSpec ScattererSpec::two_level(double excited_energy, double g) {
    ScattererSpec s;
    s.e_ground = Eigen::VectorXd::Zero(1);
    s.e_excited = Eigen::VectorXd::Constant(1, excited_energy);
    s.coupling = Eigen::MatrixXcd::Constant(1, 1, g);
    return s;
}

ScattererSpec ScattererSpec::lambda_atom(double raman_shift, double excited_energy, double g1,
                                         double g2) {
    ScattererSpec s;
    s.e_ground = Eigen::VectorXd::Zero(2);
    s.e_ground[1] = raman_shift;
    s.e_excited = Eigen::VectorXd::Constant(1, excited_energy);
    s.coupling = Eigen::MatrixXcd::Zero(1, 2);
    s.coupling(0, 0) = g1;
    s.coupling(0, 1) = g2;
    return s;
}

// ---- transmission matrix -------------------------------------------------

Eigen::MatrixXcd TMatrix::at(cplx k) const {
    if (!eval) throw config_error("TMatrix: missing evaluator");
    return eval(k);
}

double TMatrix::unitarity_defect(double k) const {
    const Eigen::MatrixXcd t = at(cplx{k, 0.0});
    double worst = 0.0;
    for (int nu = 0; nu < t.cols(); ++nu)
        worst = std::max(worst, std::abs(t.col(nu).squaredNorm() - 1.0));
    return worst;
}

TMatrix identity_t(int channels) {
    if (channels < 1) throw config_error("identity_t: need at least one channel");
    TMatrix t;
    t.channels = channels;
    t.eval = [channels](cplx) { return Eigen::MatrixXcd::Identity(channels, channels); };
    return t;
}

TMatrix t_matrix(const ScattererSpec& spec) {
    spec.validate();
    const int m = spec.channels();
    const int mp = spec.levels();
    if (spec.coupling.norm() == 0.0) return identity_t(m);  // free line

    const Eigen::MatrixXcd heff = spec.effective_hamiltonian();
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(heff);
    if (es.info() != Eigen::Success)
        throw numeric_error("t_matrix: eigen decomposition failed");
    const Eigen::VectorXcd lam = es.eigenvalues();
    const Eigen::MatrixXcd v = es.eigenvectors();

    const double scale = 1.0 + heff.norm();
    for (int j = 0; j < mp; ++j)
        if (lam[j].imag() > -1e-12 * scale)
            throw numeric_error(
                "t_matrix: scattering pole on the real axis (bound state in the continuum)");

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(v);
    if (svd.singularValues()(mp - 1) < 1e-10 * svd.singularValues()(0))
        throw numeric_error("t_matrix: defective effective Hamiltonian (degenerate poles)");
    const Eigen::MatrixXcd vi = v.inverse();

    const Eigen::MatrixXcd a = spec.coupling.adjoint() * v;  // channels x levels
    const Eigen::MatrixXcd b = vi * spec.coupling;           // levels x channels

    TMatrix t;
    t.channels = m;
    for (int j = 0; j < mp; ++j) {
        for (int nu = 0; nu < m; ++nu) {
            const cplx pos = lam[j] - spec.e_ground[nu];
            Eigen::MatrixXcd res = Eigen::MatrixXcd::Zero(m, m);
            res.col(nu) = -kTwoPiI * a.col(j) * b(j, nu);
            bool merged = false;
            for (auto& p : t.poles) {
                const double d = std::abs(p.position - pos);
                if (d <= 1e-12 * (1.0 + std::abs(pos))) {
                    p.residue += res;
                    merged = true;
                    break;
                }
                if (d < 1e-9)
                    throw numeric_error("t_matrix: nearly degenerate poles");
            }
            if (!merged) t.poles.push_back({pos, std::move(res)});
        }
    }

    const Eigen::MatrixXcd g = spec.coupling;
    const Eigen::VectorXd eg = spec.e_ground;
    t.eval = [heff, g, eg, m, mp](cplx k) {
        Eigen::MatrixXcd t_of_k = Eigen::MatrixXcd::Identity(m, m);
        for (int nu = 0; nu < m; ++nu) {
            const cplx energy = k + eg[nu];
            const Eigen::MatrixXcd mm =
                energy * Eigen::MatrixXcd::Identity(mp, mp) - heff;
            const Eigen::VectorXcd x = mm.partialPivLu().solve(g.col(nu));
            t_of_k.col(nu) -= kTwoPiI * (g.adjoint() * x);
        }
        return t_of_k;
    };
    return t;
}

namespace {

// Residue matrix of a pole; computed by a circle around the pole when the
// table entry was built from a user closure without explicit residues.
Eigen::MatrixXcd t_pole_residue(const TMatrix& t, std::size_t idx) {
    const TPole& p = t.poles[idx];
    if (p.residue.size() > 0) return p.residue;
    double dist = 0.5;
    for (std::size_t j = 0; j < t.poles.size(); ++j)
        if (j != idx) dist = std::min(dist, std::abs(t.poles[j].position - p.position));
    dist = std::min(dist, std::abs(p.position.imag()));  // keep clear of the real axis
    if (dist <= 0.0) throw numeric_error("TMatrix: pole on the real axis");
    return matrix_circle_residue(t.eval, p.position, 0.25 * dist, t.channels);
}

}  // namespace

// ---- position kernels ----------------------------------------------------

cplx scattered_kernel(const ScattererSpec& spec, const TMatrix& t, int mu, int nu, double y,
                      double x) {
    check_channel(spec, mu, "scattered_kernel");
    check_channel(spec, nu, "scattered_kernel");
    if (y > x) return 0.0;  // the scattered wave trails the free front
    const double step = (y == x) ? 0.5 : 1.0;
    cplx acc = 0.0;
    for (std::size_t i = 0; i < t.poles.size(); ++i) {
        const Eigen::MatrixXcd res = t_pole_residue(t, i);
        const cplx r = res(mu, nu);
        if (r == cplx{0.0, 0.0}) continue;
        acc += r * std::exp(iu * t.poles[i].position * (y - x));
    }
    const double ephase = spec.e_ground[nu] - spec.e_ground[mu];
    return -iu * step * std::exp(iu * ephase * y) * acc;
}

cplx s0_position(const ScattererSpec& spec, const TMatrix& t, double x1, double x2, double y1,
                 double y2, int mu, int nu) {
    check_channel(spec, mu, "s0_position");
    check_channel(spec, nu, "s0_position");
    const double early = (y2 > y1) ? 1.0 : (y1 > y2 ? 0.0 : 0.5);  // weight of theta(y2 - y1)
    cplx acc = 0.0;
    for (int lam = 0; lam < spec.channels(); ++lam) {
        const cplx a11 = scattered_kernel(spec, t, mu, lam, y1, x1);
        const cplx a12 = scattered_kernel(spec, t, mu, lam, y1, x2);
        const cplx a21 = scattered_kernel(spec, t, mu, lam, y2, x1);
        const cplx a22 = scattered_kernel(spec, t, mu, lam, y2, x2);
        const cplx b11 = scattered_kernel(spec, t, lam, nu, y1, x1);
        const cplx b12 = scattered_kernel(spec, t, lam, nu, y1, x2);
        const cplx b21 = scattered_kernel(spec, t, lam, nu, y2, x1);
        const cplx b22 = scattered_kernel(spec, t, lam, nu, y2, x2);
        acc += early * (a11 * b22 + a12 * b21);
        acc += (1.0 - early) * (a21 * b12 + a22 * b11);
    }
    return acc;
}

// ---- symbolic momentum kernel ---------------------------------------------

namespace {

double form_coeff(const LinearForm& f, int var) {
    switch (var) {
        case 0: return f.p1;
        case 1: return f.p2;
        case 2: return f.k1;
        default: return f.k2;
    }
}

void form_set(LinearForm& f, int var, double v) {
    switch (var) {
        case 0: f.p1 = v; break;
        case 1: f.p2 = v; break;
        case 2: f.k1 = v; break;
        default: f.k2 = v; break;
    }
}

LinearForm form_axpy(const LinearForm& f, double factor, const LinearForm& g) {
    LinearForm out = f;
    out.p1 += factor * g.p1;
    out.p2 += factor * g.p2;
    out.k1 += factor * g.k1;
    out.k2 += factor * g.k2;
    out.constant += factor * g.constant;
    return out;
}

LinearForm form_scale(const LinearForm& f, double s) {
    LinearForm out;
    out.p1 = f.p1 * s;
    out.p2 = f.p2 * s;
    out.k1 = f.k1 * s;
    out.k2 = f.k2 * s;
    out.constant = f.constant * s;
    return out;
}

bool form_equal(const LinearForm& a, const LinearForm& b, double tol = 1e-10) {
    return std::abs(a.p1 - b.p1) <= tol && std::abs(a.p2 - b.p2) <= tol &&
           std::abs(a.k1 - b.k1) <= tol && std::abs(a.k2 - b.k2) <= tol &&
           std::abs(a.constant - b.constant) <= tol;
}

// lexicographic order on (coeffs, constant)
int form_compare(const LinearForm& a, const LinearForm& b) {
    const double av[5] = {a.p1, a.p2, a.k1, a.k2, a.constant};
    const double bv[5] = {b.p1, b.p2, b.k1, b.k2, b.constant};
    for (int i = 0; i < 5; ++i) {
        if (av[i] < bv[i] - 1e-10) return -1;
        if (av[i] > bv[i] + 1e-10) return 1;
    }
    return 0;
}

bool tfactor_less(const TFactor& a, const TFactor& b) {
    if (a.row != b.row) return a.row < b.row;
    if (a.col != b.col) return a.col < b.col;
    return form_compare(a.arg, b.arg) < 0;
}

bool singular_less(const SingularFactor& a, const SingularFactor& b) {
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    return form_compare(a.form, b.form) < 0;
}

bool term_structure_equal(const AmplitudeTerm& a, const AmplitudeTerm& b) {
    if (a.t_factors.size() != b.t_factors.size() || a.singular.size() != b.singular.size())
        return false;
    for (std::size_t i = 0; i < a.t_factors.size(); ++i) {
        if (a.t_factors[i].row != b.t_factors[i].row ||
            a.t_factors[i].col != b.t_factors[i].col ||
            !form_equal(a.t_factors[i].arg, b.t_factors[i].arg))
            return false;
    }
    for (std::size_t i = 0; i < a.singular.size(); ++i) {
        if (a.singular[i].kind != b.singular[i].kind ||
            !form_equal(a.singular[i].form, b.singular[i].form))
            return false;
    }
    return true;
}

}  // namespace

cplx TwoPhotonAmplitude::kernel_value(const TMatrix& t, double vp1, double vp2, double vk1,
                                      double vk2, double eta) const {
    cplx acc = 0.0;
    for (const auto& term : terms) {
        cplx val = term.prefactor;
        for (const auto& tf : term.t_factors)
            val *= t.at(cplx{tf.arg(vp1, vp2, vk1, vk2), 0.0})(tf.row, tf.col);
        for (const auto& sf : term.singular) {
            if (sf.kind != SingularKind::CauchyPlus)
                throw numeric_error(
                    "kernel_value: reduced amplitude has no pointwise value");
            val /= (sf.form(vp1, vp2, vk1, vk2) + iu * eta);
        }
        acc += val;
    }
    return acc;
}

TwoPhotonAmplitude s0_momentum(const ScattererSpec& spec, const TMatrix& t, int mu, int nu) {
    spec.validate();
    check_channel(spec, mu, "s0_momentum");
    check_channel(spec, nu, "s0_momentum");
    if (t.channels != spec.channels())
        throw config_error("s0_momentum: channel count mismatch");

    TwoPhotonAmplitude amp;
    amp.mu = mu;
    amp.nu = nu;
    amp.energy_delta.p1 = 1.0;
    amp.energy_delta.p2 = 1.0;
    amp.energy_delta.k1 = -1.0;
    amp.energy_delta.k2 = -1.0;
    amp.energy_delta.constant = spec.e_ground[mu] - spec.e_ground[nu];

    for (int n = 0; n < 2; ++n) {          // which input momentum is integrated
        for (int m = 0; m < 2; ++m) {      // which output momentum sits in the denominator
            for (int lam = 0; lam < spec.channels(); ++lam) {
                AmplitudeTerm term;
                term.prefactor = iu / (2.0 * pi);
                TFactor first;   // t_{mu lam}(k_n)
                first.row = mu;
                first.col = lam;
                form_set(first.arg, 2 + n, 1.0);
                TFactor second;  // t_{lam nu}(k_{n'})
                second.row = lam;
                second.col = nu;
                form_set(second.arg, 2 + (1 - n), 1.0);
                term.t_factors = {first, second};
                SingularFactor cauchy;  // p_m + E_mu - k_n - E_lam + i0+
                cauchy.kind = SingularKind::CauchyPlus;
                form_set(cauchy.form, m, 1.0);
                form_set(cauchy.form, 2 + n, -1.0);
                cauchy.form.constant = spec.e_ground[mu] - spec.e_ground[lam];
                term.singular = {cauchy};
                amp.terms.push_back(std::move(term));
            }
        }
    }
    return amp;
}

TwoPhotonAmplitude reduce_on_shell(const TwoPhotonAmplitude& amp) {
    // 1) split every Cauchy factor into -i pi delta + principal value
    std::vector<AmplitudeTerm> split;
    std::vector<AmplitudeTerm> queue = amp.terms;
    while (!queue.empty()) {
        AmplitudeTerm term = std::move(queue.back());
        queue.pop_back();
        std::size_t idx = term.singular.size();
        for (std::size_t i = 0; i < term.singular.size(); ++i)
            if (term.singular[i].kind == SingularKind::CauchyPlus) {
                idx = i;
                break;
            }
        if (idx == term.singular.size()) {
            split.push_back(std::move(term));
            continue;
        }
        AmplitudeTerm delta_part = term;
        delta_part.singular[idx].kind = SingularKind::Delta;
        delta_part.prefactor *= -iu * pi;
        AmplitudeTerm pv_part = std::move(term);
        pv_part.singular[idx].kind = SingularKind::PrincipalValue;
        queue.push_back(std::move(delta_part));
        queue.push_back(std::move(pv_part));
    }

    // 2) eliminate p2 on the shell of the overall delta, then normalize the
    //    leading coefficient of every singular form
    const LinearForm& shell = amp.energy_delta;
    if (std::abs(shell.p2) < 1e-12)
        throw numeric_error("reduce_on_shell: energy delta does not involve p2");
    std::vector<AmplitudeTerm> canon;
    for (auto& term : split) {
        bool drop = false;
        for (auto& tf : term.t_factors)
            tf.arg = form_axpy(tf.arg, -form_coeff(tf.arg, 1) / shell.p2, shell);
        for (auto& sf : term.singular) {
            sf.form = form_axpy(sf.form, -form_coeff(sf.form, 1) / shell.p2, shell);
            double lead = 0.0;
            for (int var : {0, 2, 3}) {
                if (std::abs(form_coeff(sf.form, var)) > 1e-12) {
                    lead = form_coeff(sf.form, var);
                    break;
                }
            }
            if (lead == 0.0) {  // constant form
                if (sf.kind == SingularKind::Delta) {
                    if (std::abs(sf.form.constant) < 1e-12)
                        throw numeric_error("reduce_on_shell: delta of a vanishing form");
                    drop = true;  // delta of a nonzero constant
                    break;
                }
                term.prefactor /= sf.form.constant;
                sf.form.constant = 1.0;  // neutral factor, removed below
                continue;
            }
            if (sf.kind == SingularKind::Delta)
                term.prefactor /= std::abs(lead);
            else
                term.prefactor /= lead;
            sf.form = form_scale(sf.form, 1.0 / lead);
        }
        if (drop) continue;
        std::erase_if(term.singular, [](const SingularFactor& sf) {
            return sf.kind == SingularKind::PrincipalValue && sf.form.p1 == 0.0 &&
                   sf.form.p2 == 0.0 && sf.form.k1 == 0.0 && sf.form.k2 == 0.0;
        });
        std::sort(term.t_factors.begin(), term.t_factors.end(), tfactor_less);
        std::sort(term.singular.begin(), term.singular.end(), singular_less);
        canon.push_back(std::move(term));
    }

    // 3) merge structurally equal terms, drop cancelled ones
    TwoPhotonAmplitude out;
    out.mu = amp.mu;
    out.nu = amp.nu;
    out.energy_delta = amp.energy_delta;
    for (auto& term : canon) {
        bool merged = false;
        for (auto& have : out.terms)
            if (term_structure_equal(have, term)) {
                have.prefactor += term.prefactor;
                merged = true;
                break;
            }
        if (!merged) out.terms.push_back(std::move(term));
    }
    std::erase_if(out.terms,
                  [](const AmplitudeTerm& t) { return std::abs(t.prefactor) < 1e-12; });
    std::sort(out.terms.begin(), out.terms.end(),
              [](const AmplitudeTerm& a, const AmplitudeTerm& b) {
                  if (a.singular.size() != b.singular.size())
                      return a.singular.size() < b.singular.size();
                  if (!a.singular.empty() && !b.singular.empty()) {
                      if (a.singular[0].kind != b.singular[0].kind)
                          return static_cast<int>(a.singular[0].kind) <
                                 static_cast<int>(b.singular[0].kind);
                      const int c = form_compare(a.singular[0].form, b.singular[0].form);
                      if (c != 0) return c < 0;
                  }
                  return false;
              });
    return out;
}

// ---- smeared consistency ---------------------------------------------------

namespace {

double probe_value(const GaussProbe& g, double k) {
    const double u = (k - g.center) / (2.0 * g.width);
    return std::exp(-u * u);
}

// position-space image of the probe under X(x) = (2 pi)^{-1/2} int f(k) e^{ikx} dk
cplx probe_position(const GaussProbe& g, double x) {
    return std::sqrt(2.0) * g.width *
           std::exp(iu * g.center * x - g.width * g.width * x * x);
}

struct SmearContext {
    const ScattererSpec* spec;
    const TMatrix* t;
    int mu, nu;
    GaussProbe out1, out2, in1, in2;
    double eshift;  // p2 = k1 + k2 - p1 + eshift on the shell
};

// product of probes and transmission factors at a momentum point, the
// singular factor excluded
cplx smooth_part(const SmearContext& ctx, const AmplitudeTerm& term, double p1, double k1,
                 double k2) {
    const double p2 = k1 + k2 - p1 + ctx.eshift;
    cplx val = term.prefactor;
    val *= probe_value(ctx.out1, p1) * probe_value(ctx.out2, p2);
    val *= probe_value(ctx.in1, k1) * probe_value(ctx.in2, k2);
    for (const auto& tf : term.t_factors)
        val *= ctx.t->at(cplx{tf.arg(p1, p2, k1, k2), 0.0})(tf.row, tf.col);
    return val;
}

struct TermIntegrals {
    cplx delta_part = 0.0;
    cplx pv_part = 0.0;
};

// window of a probe (everything outside contributes < e^{-72})
std::pair<double, double> probe_window(const GaussProbe& g) {
    return {g.center - 8.5 * g.width, g.center + 8.5 * g.width};
}

TermIntegrals integrate_term(const SmearContext& ctx, const AmplitudeTerm& term) {
    if (term.singular.size() != 1 || term.singular[0].kind != SingularKind::CauchyPlus)
        throw numeric_error("s0_smeared: expected one Cauchy factor per term");

    // reduce the singular form onto (p1, k1, k2)
    LinearForm shell;  // p1 + p2 - k1 - k2 + (E_mu - E_nu) == 0
    shell.p1 = 1.0;
    shell.p2 = 1.0;
    shell.k1 = -1.0;
    shell.k2 = -1.0;
    shell.constant = -ctx.eshift;  // eshift = E_nu - E_mu
    LinearForm f = form_axpy(term.singular[0].form,
                             -form_coeff(term.singular[0].form, 1) / shell.p2, shell);

    // pivot: largest coefficient among p1, k1, k2
    const int vars[3] = {0, 2, 3};
    int pivot = 0;
    double alpha = 0.0;
    for (int var : vars)
        if (std::abs(form_coeff(f, var)) > std::abs(alpha)) {
            alpha = form_coeff(f, var);
            pivot = var;
        }
    if (alpha == 0.0) throw numeric_error("s0_smeared: singular form has no momentum");
    int rest[2];
    int nrest = 0;
    for (int var : vars)
        if (var != pivot) rest[nrest++] = var;

    auto window_of = [&](int var) {
        switch (var) {
            case 0: return probe_window(ctx.out1);
            case 2: return probe_window(ctx.in1);
            default: return probe_window(ctx.in2);
        }
    };
    auto point = [&](double v, double u, double w) {
        double vals[4] = {0.0, 0.0, 0.0, 0.0};
        vals[pivot] = v;
        vals[rest[0]] = u;
        vals[rest[1]] = w;
        return std::array<double, 3>{vals[0], vals[2], vals[3]};  // (p1, k1, k2)
    };
    // root of f in the pivot variable, the others fixed
    auto pivot_root = [&](double u, double w) {
        double vals[4] = {0.0, 0.0, 0.0, 0.0};
        vals[rest[0]] = u;
        vals[rest[1]] = w;
        const double off =
            f.p1 * vals[0] + f.k1 * vals[2] + f.k2 * vals[3] + f.constant;
        return -off / alpha;
    };

    const auto [alo, ahi] = window_of(rest[0]);
    const auto [blo, bhi] = window_of(rest[1]);
    const auto [vlo, vhi] = window_of(pivot);

    num::QuadOptions inner_opt;
    inner_opt.abs_tol = 1e-11;
    inner_opt.rel_tol = 1e-8;
    num::QuadOptions mid_opt;
    mid_opt.abs_tol = 1e-10;
    mid_opt.rel_tol = 1e-8;
    num::QuadOptions outer_opt;
    outer_opt.abs_tol = 3e-10;
    outer_opt.rel_tol = 1e-7;

    TermIntegrals out;

    // delta part: -i pi / |alpha| times the smooth rest on the root manifold
    auto delta_mid = [&](double u) {
        return num::integrate(
                   [&](double w) {
                       const double v0 = pivot_root(u, w);
                       const auto [p1v, k1v, k2v] = point(v0, u, w);
                       return smooth_part(ctx, term, p1v, k1v, k2v);
                   },
                   blo, bhi, mid_opt)
            .value;
    };
    out.delta_part = -iu * pi / std::abs(alpha) *
                     num::integrate(delta_mid, alo, ahi, outer_opt).value;

    // principal-value part: (1/alpha) P int dv g(v)/(v - v0)
    auto pv_mid = [&](double u) {
        return num::integrate(
                   [&](double w) -> cplx {
                       const double v0 = pivot_root(u, w);
                       auto g = [&](double v) {
                           const auto [p1v, k1v, k2v] = point(v, u, w);
                           return smooth_part(ctx, term, p1v, k1v, k2v);
                       };
                       if (v0 > vlo + 1e-9 && v0 < vhi - 1e-9)
                           return num::principal_value(g, vlo, vhi, v0, inner_opt).value;
                       // no singularity inside the probe window
                       return num::integrate([&](double v) { return g(v) / (v - v0); },
                                             vlo, vhi, inner_opt)
                           .value;
                   },
                   blo, bhi, mid_opt)
            .value;
    };
    out.pv_part = (1.0 / alpha) * num::integrate(pv_mid, alo, ahi, outer_opt).value;
    return out;
}

// ---- position-side machinery ----------------------------------------------

constexpr double kGlNode[2] = {0.3399810435848563, 0.8611363115940526};
constexpr double kGlWeight[2] = {0.6521451548625461, 0.3478548451374538};

cplx gl4(const std::function<cplx(double)>& f, double a, double b) {
    const double h = 0.5 * (b - a);
    const double c = 0.5 * (a + b);
    cplx acc = 0.0;
    for (int i = 0; i < 2; ++i) {
        acc += kGlWeight[i] * f(c - h * kGlNode[i]);
        acc += kGlWeight[i] * f(c + h * kGlNode[i]);
    }
    return acc * h;
}

// suffix integral table: value(y) = int_y^hi f, accumulated right-to-left so
// exponentially small suffixes keep full relative precision
struct SuffixTable {
    double lo = 0.0, hi = 0.0, h = 0.0;
    std::vector<cplx> node;
    std::function<cplx(double)> f;

    void build(std::function<cplx(double)> fn, double a, double b, int cells) {
        f = std::move(fn);
        lo = a;
        hi = b;
        h = (b - a) / cells;
        node.assign(static_cast<std::size_t>(cells) + 1, cplx{0.0, 0.0});
        for (int i = cells - 1; i >= 0; --i)
            node[static_cast<std::size_t>(i)] =
                node[static_cast<std::size_t>(i) + 1] + gl4(f, lo + i * h, lo + (i + 1) * h);
    }

    cplx operator()(double y) const {
        if (y <= lo) return node.front();
        if (y >= hi) return 0.0;
        const auto i = static_cast<std::size_t>((y - lo) / h);
        const double cell_hi = lo + (static_cast<double>(i) + 1.0) * h;
        return node[i + 1] + gl4(f, y, cell_hi);
    }
};

// prefix integral table: value(y) = int_lo^y f
struct PrefixTable {
    double lo = 0.0, hi = 0.0, h = 0.0;
    std::vector<cplx> node;
    std::function<cplx(double)> f;

    void build(std::function<cplx(double)> fn, double a, double b, int cells) {
        f = std::move(fn);
        lo = a;
        hi = b;
        h = (b - a) / cells;
        node.assign(static_cast<std::size_t>(cells) + 1, cplx{0.0, 0.0});
        for (int i = 0; i < cells; ++i)
            node[static_cast<std::size_t>(i) + 1] =
                node[static_cast<std::size_t>(i)] + gl4(f, lo + i * h, lo + (i + 1) * h);
    }

    cplx operator()(double y) const {
        if (y <= lo) return 0.0;
        if (y >= hi) return node.back();
        const auto i = static_cast<std::size_t>((y - lo) / h);
        const double cell_lo = lo + static_cast<double>(i) * h;
        return node[i] + gl4(f, cell_lo, y);
    }
};

}  // namespace

SmearedPair s0_smeared(const ScattererSpec& spec, const TMatrix& t, int mu, int nu,
                       const GaussProbe& out1, const GaussProbe& out2, const GaussProbe& in1,
                       const GaussProbe& in2) {
    spec.validate();
    check_channel(spec, mu, "s0_smeared");
    check_channel(spec, nu, "s0_smeared");
    for (const GaussProbe* g : {&out1, &out2, &in1, &in2})
        if (!(g->width > 0.0)) throw config_error("s0_smeared: probe width must be positive");

    SmearContext ctx;
    ctx.spec = &spec;
    ctx.t = &t;
    ctx.mu = mu;
    ctx.nu = nu;
    ctx.out1 = out1;
    ctx.out2 = out2;
    ctx.in1 = in1;
    ctx.in2 = in2;
    ctx.eshift = spec.e_ground[nu] - spec.e_ground[mu];

    SmearedPair result;

    // momentum side: per-term delta / principal-value split
    const TwoPhotonAmplitude amp = s0_momentum(spec, t, mu, nu);
    for (const auto& term : amp.terms) {
        const TermIntegrals ti = integrate_term(ctx, term);
        result.momentum_side += ti.delta_part + ti.pv_part;
    }

    // position side: scattered single-photon images and ordered pair integrals
    const int m = spec.channels();
    double min_width = out1.width;
    for (const GaussProbe* g : {&out2, &in1, &in2}) min_width = std::min(min_width, g->width);
    double min_gamma = 1.0;
    for (const auto& p : t.poles)
        min_gamma = std::min(min_gamma, std::abs(p.position.imag()));
    const double x_extent = 8.0 / min_width;
    const double lo = -(x_extent + 12.0 / min_gamma);
    const double hi = x_extent + 2.0;
    const int cells = 16384;

    std::vector<Eigen::MatrixXcd> residues(t.poles.size());
    for (std::size_t i = 0; i < t.poles.size(); ++i) residues[i] = t_pole_residue(t, i);

    // suffix tables T_q(y) = int_y^hi e^{-i q x} X(x) dx, one per (pole, packet)
    std::vector<std::array<SuffixTable, 2>> pole_tab(t.poles.size());
    const GaussProbe in_probe[2] = {in1, in2};
    for (std::size_t qi = 0; qi < t.poles.size(); ++qi) {
        const cplx q = t.poles[qi].position;
        for (int pk = 0; pk < 2; ++pk) {
            const GaussProbe gp = in_probe[pk];
            pole_tab[qi][static_cast<std::size_t>(pk)].build(
                [q, gp](double x) { return std::exp(-iu * q * x) * probe_position(gp, x); },
                lo, hi, cells);
        }
    }

    // scattered image u_ab(y) for input packet pk
    auto u_of = [&](int a, int b, int pk, double y) -> cplx {
        cplx w = 0.0;
        for (std::size_t qi = 0; qi < t.poles.size(); ++qi) {
            const cplx r = residues[qi](a, b);
            if (r == cplx{0.0, 0.0}) continue;
            const cplx q = t.poles[qi].position;
            w += r * std::exp(iu * q * y) *
                 pole_tab[qi][static_cast<std::size_t>(pk)](y);
        }
        const double ephase = spec.e_ground[b] - spec.e_ground[a];
        cplx val = -iu * std::exp(iu * ephase * y) * w;
        if (a == b) val += probe_position(in_probe[pk], y);
        return val;
    };

    auto y2_weight = [&](double y) { return std::conj(probe_position(out2, y)); };

    // ordered-pair cumulatives of conj(Y2) u_ab for both input packets
    std::vector<SuffixTable> suffix(static_cast<std::size_t>(2 * m * 2));
    std::vector<PrefixTable> prefix(static_cast<std::size_t>(2 * m * 2));
    auto slot = [m](int which, int lam, int pk) {
        return static_cast<std::size_t>((which * m + lam) * 2 + pk);
    };
    for (int lam = 0; lam < m; ++lam) {
        for (int pk = 0; pk < 2; ++pk) {
            auto f_mu = [&u_of, &y2_weight, mu, lam, pk](double y) {
                return y2_weight(y) * u_of(mu, lam, pk, y);
            };
            auto f_nu = [&u_of, &y2_weight, lam, nu, pk](double y) {
                return y2_weight(y) * u_of(lam, nu, pk, y);
            };
            suffix[slot(0, lam, pk)].build(f_mu, lo, hi, cells);
            suffix[slot(1, lam, pk)].build(f_nu, lo, hi, cells);
            prefix[slot(0, lam, pk)].build(f_mu, lo, hi, cells);
            prefix[slot(1, lam, pk)].build(f_nu, lo, hi, cells);
        }
    }

    num::QuadOptions opt;
    opt.abs_tol = 1e-10;
    opt.rel_tol = 1e-8;
    opt.initial_panels = 64;
    cplx pos = 0.0;
    for (int lam = 0; lam < m; ++lam) {
        auto integrand = [&](double y1) -> cplx {
            const cplx yw = std::conj(probe_position(out1, y1));
            cplx acc = 0.0;
            // theta(y2 - y1): y1 carries (mu lam), y2 carries (lam nu)
            acc += u_of(mu, lam, 0, y1) * suffix[slot(1, lam, 1)](y1);
            acc += u_of(mu, lam, 1, y1) * suffix[slot(1, lam, 0)](y1);
            // theta(y1 - y2): y1 carries (lam nu), y2 carries (mu lam)
            acc += u_of(lam, nu, 1, y1) * prefix[slot(0, lam, 0)](y1);
            acc += u_of(lam, nu, 0, y1) * prefix[slot(0, lam, 1)](y1);
            return yw * acc;
        };
        pos += num::integrate(integrand, lo, hi, opt).value;
    }
    result.position_side = pos;
    return result;
}

// ---- scattered wavefunction -------------------------------------------------

KernelC synthetic_kernel_c(cplx pole, cplx strength) {
    if (std::abs(pole.imag()) < 1e-9)
        throw config_error("synthetic_kernel_c: pole must sit off the real axis");
    KernelC c;
    c.eval = [pole, strength](double, double, double s, cplx k) {
        return strength * (1.0 / (k - pole) + 1.0 / (s - k - pole));
    };
    c.poles = [pole](double s) { return std::vector<cplx>{pole, s - pole}; };
    return c;
}

cplx ModeSum::operator()(double l) const {
    cplx acc = 0.0;
    for (std::size_t i = 0; i < amplitude.size(); ++i)
        acc += amplitude[i] * std::exp(iu * phase_rate[i] * l);
    return acc;
}

namespace {

struct ContourData {
    std::vector<cplx> lower;       // enclosed by the e^{i(s-k)l} closure
    std::vector<cplx> upper;       // enclosed by the e^{ikl} closure (causal poles included)
    std::vector<cplx> spectators;  // singularities never enclosed, for radius bookkeeping
};

void push_unique(std::vector<cplx>& list, cplx pos) {
    for (const cplx& q : list) {
        const double d = std::abs(q - pos);
        if (d <= 1e-12 * (1.0 + std::abs(pos))) return;  // merged
        if (d < 1e-9)
            throw numeric_error(
                "output_modes: degenerate poles; use the quadrature/principal-value path");
    }
    list.push_back(pos);
}

struct BracketContext {
    const ScattererSpec* spec;
    const TMatrix* t;
    const KernelC* c;
    packet::Envelope env1, env2;
    double p1, p2, s;
    int mu, nu;

    cplx bracket(cplx k) const {
        const Eigen::MatrixXcd t_k = t->at(k);
        const Eigen::MatrixXcd t_sk = t->at(s - k);
        cplx acc = 0.0;
        for (int m = 0; m < 2; ++m) {
            const double pm = (m == 0) ? p1 : p2;
            for (int lam = 0; lam < spec->channels(); ++lam) {
                const cplx den =
                    pm + spec->e_ground[mu] - k - spec->e_ground[lam];
                acc += t_k(mu, lam) * t_sk(lam, nu) / den;
            }
        }
        acc *= iu / (2.0 * pi);
        if (!c->empty()) acc += iu * c->eval(p1, p2, s, k);
        return acc;
    }

    cplx ord1(cplx k) const {  // pairs with e^{i(s-k)l}
        return lorentzian_value(env1, k) * lorentzian_value(env2, s - k);
    }
    cplx ord2(cplx k) const {  // pairs with e^{ikl}
        return lorentzian_value(env1, s - k) * lorentzian_value(env2, k);
    }
};

ContourData enumerate_poles(const BracketContext& ctx) {
    ContourData cd;
    const auto& spec = *ctx.spec;
    const auto& t = *ctx.t;

    const cplx env1_pole = ctx.env1.k_bar - iu * ctx.env1.sigma;
    const cplx env2_pole = ctx.env2.k_bar - iu * ctx.env2.sigma;
    push_unique(cd.lower, env1_pole);
    push_unique(cd.upper, ctx.s - env1_pole);  // image of the first-packet pole under k -> s-k
    cd.spectators.push_back(env2_pole);
    cd.spectators.push_back(ctx.s - env2_pole);

    for (const auto& p : t.poles) {
        if (p.position.imag() > -1e-9)
            throw numeric_error(
                "output_modes: transmission pole within 1e-9 of the real axis");
        push_unique(cd.lower, p.position);
        push_unique(cd.upper, ctx.s - p.position);
    }

    for (int m = 0; m < 2; ++m) {
        const double pm = (m == 0) ? ctx.p1 : ctx.p2;
        for (int lam = 0; lam < spec.channels(); ++lam)
            push_unique(cd.upper,
                        cplx{pm + spec.e_ground[ctx.mu] - spec.e_ground[lam], 0.0});
    }

    if (!ctx.c->empty()) {
        for (const cplx& q : ctx.c->poles(ctx.s)) {
            if (std::abs(q.imag()) < 1e-9)
                throw numeric_error(
                    "output_modes: inelastic-kernel pole within 1e-9 of the real axis; "
                    "use the quadrature/principal-value path");
            if (q.imag() < 0.0)
                push_unique(cd.lower, q);
            else
                push_unique(cd.upper, q);
        }
    }
    return cd;
}

double safe_radius(cplx center, const ContourData& cd) {
    double dist = 1.0;
    auto visit = [&](const std::vector<cplx>& list) {
        for (const cplx& q : list) {
            const double d = std::abs(q - center);
            if (d > 1e-12 * (1.0 + std::abs(center))) dist = std::min(dist, d);
        }
    };
    visit(cd.lower);
    visit(cd.upper);
    visit(cd.spectators);
    return 0.25 * dist;
}

}  // namespace

ModeSum output_modes(const ScattererSpec& spec, const TMatrix& t, const KernelC& c,
                     const packet::Envelope& in1, const packet::Envelope& in2, double p1,
                     double p2, int mu, int nu) {
    spec.validate();
    check_channel(spec, mu, "output_modes");
    check_channel(spec, nu, "output_modes");
    require_lorentzian(in1, "output_modes");
    require_lorentzian(in2, "output_modes");
    if (t.channels != spec.channels())
        throw config_error("output_modes: channel count mismatch");

    BracketContext ctx;
    ctx.spec = &spec;
    ctx.t = &t;
    ctx.c = &c;
    ctx.env1 = in1;
    ctx.env2 = in2;
    ctx.p1 = p1;
    ctx.p2 = p2;
    ctx.s = p1 + p2 + spec.e_ground[mu] - spec.e_ground[nu];
    ctx.mu = mu;
    ctx.nu = nu;

    const ContourData cd = enumerate_poles(ctx);

    ModeSum out;
    for (const cplx& q : cd.lower) {
        const double r = safe_radius(q, cd);
        const cplx res = circle_residue(
            [&](cplx k) { return ctx.bracket(k) * ctx.ord1(k); }, q, r);
        out.amplitude.push_back(-kTwoPiI * res);
        out.phase_rate.push_back(ctx.s - q);
    }
    for (const cplx& q : cd.upper) {
        const double r = safe_radius(q, cd);
        const cplx res = circle_residue(
            [&](cplx k) { return ctx.bracket(k) * ctx.ord2(k); }, q, r);
        out.amplitude.push_back(kTwoPiI * res);
        out.phase_rate.push_back(q);
    }
    return out;
}

OutputValue output_wavefunction(const ScattererSpec& spec, const TMatrix& t, const KernelC& c,
                                const packet::Envelope& in1, const packet::Envelope& in2,
                                double separation, double p1, double p2, int mu, int nu,
                                double eta) {
    if (!(separation > 0.0)) throw config_error("output_wavefunction: separation must be > 0");
    if (!(eta > 0.0)) throw config_error("output_wavefunction: eta must be > 0");

    OutputValue out;
    const ModeSum modes = output_modes(spec, t, c, in1, in2, p1, p2, mu, nu);
    out.residue = modes(separation);

    BracketContext ctx;
    ctx.spec = &spec;
    ctx.t = &t;
    ctx.c = &c;
    ctx.env1 = in1;
    ctx.env2 = in2;
    ctx.p1 = p1;
    ctx.p2 = p2;
    ctx.s = p1 + p2 + spec.e_ground[mu] - spec.e_ground[nu];
    ctx.mu = mu;
    ctx.nu = nu;

    // quadrature oracle: i0+ -> i eta in the causal denominators only
    auto bracket_eta = [&](double k) {
        const Eigen::MatrixXcd t_k = t.at(cplx{k, 0.0});
        const Eigen::MatrixXcd t_sk = t.at(cplx{ctx.s - k, 0.0});
        cplx acc = 0.0;
        for (int m = 0; m < 2; ++m) {
            const double pm = (m == 0) ? p1 : p2;
            for (int lam = 0; lam < spec.channels(); ++lam) {
                const cplx den =
                    pm + spec.e_ground[mu] - k - spec.e_ground[lam] + iu * eta;
                acc += t_k(mu, lam) * t_sk(lam, nu) / den;
            }
        }
        acc *= iu / (2.0 * pi);
        if (!c.empty()) acc += iu * c.eval(p1, p2, ctx.s, cplx{k, 0.0});
        return acc;
    };
    const double l = separation;
    auto integrand = [&](double k) {
        return bracket_eta(k) * (ctx.ord1(cplx{k, 0.0}) * std::exp(iu * (ctx.s - k) * l) +
                                 ctx.ord2(cplx{k, 0.0}) * std::exp(iu * k * l));
    };

    const ContourData cd = enumerate_poles(ctx);
    std::vector<double> seeds;
    double klo = std::min(in1.k_bar, in2.k_bar);
    double khi = std::max(in1.k_bar, in2.k_bar);
    double width = std::max(in1.sigma, in2.sigma);
    auto note = [&](const std::vector<cplx>& list) {
        for (const cplx& q : list) {
            seeds.push_back(q.real());
            klo = std::min(klo, q.real());
            khi = std::max(khi, q.real());
            width = std::max(width, std::abs(q.imag()));
        }
    };
    note(cd.lower);
    note(cd.upper);
    note(cd.spectators);
    width = std::max(width, 0.5);
    const double lo = klo - 40.0 * width;
    const double hi = khi + 40.0 * width;

    num::QuadOptions opt;
    opt.abs_tol = 3e-9;
    opt.rel_tol = 1e-9;
    opt.initial_panels = 32;
    cplx quad = num::integrate_seeded(integrand, lo, hi, seeds, opt).value;

    // algebraic tails, mapped onto (0, 1)
    const double tail_scale = std::max(1.0, 0.05 * (hi - lo));
    num::QuadOptions tail_opt;
    tail_opt.abs_tol = 1e-9;
    tail_opt.rel_tol = 1e-9;
    quad += num::integrate(
                [&](double u) {
                    const double k = hi + tail_scale * u / (1.0 - u);
                    return integrand(k) * tail_scale / ((1.0 - u) * (1.0 - u));
                },
                0.0, 1.0, tail_opt)
                .value;
    quad += num::integrate(
                [&](double u) {
                    const double k = lo - tail_scale * u / (1.0 - u);
                    return integrand(k) * tail_scale / ((1.0 - u) * (1.0 - u));
                },
                0.0, 1.0, tail_opt)
                .value;

    out.quadrature = quad;
    out.difference = std::abs(out.residue - out.quadrature);
    return out;
}

// ---- fluorescence decay scan -------------------------------------------------

void DecayScanConfig::validate() const {
    if (l_grid.size() < 16) throw config_error("decay scan: need at least 16 separations");
    if (!(l_grid.front() > 0.0)) throw config_error("decay scan: separations must be > 0");
    const double dl = l_grid[1] - l_grid[0];
    if (!(dl > 0.0)) throw config_error("decay scan: separations must ascend");
    for (std::size_t i = 1; i < l_grid.size(); ++i)
        if (std::abs(l_grid[i] - l_grid[i - 1] - dl) > 1e-9 * dl)
            throw config_error("decay scan: separation grid must be uniform");
    if (grid_n < 8) throw config_error("decay scan: grid_n must be >= 8");
    if (max_modes < 2) throw config_error("decay scan: max_modes must be >= 2");
    if (!(amp_floor > 0.0) || amp_floor >= 1.0)
        throw config_error("decay scan: amp_floor must lie in (0, 1)");
    if (!(match_tol > 0.0) || match_tol > 0.5)
        throw config_error("decay scan: match_tol must lie in (0, 0.5]");
    if (threads < 1) throw config_error("decay scan: threads must be >= 1");
}

DecayResult decay_rates(const ScattererSpec& spec, const TMatrix& t, const KernelC& c,
                        const packet::Envelope& in1, const packet::Envelope& in2,
                        const DecayScanConfig& cfg) {
    spec.validate();
    cfg.validate();
    check_channel(spec, cfg.mu, "decay_rates");
    check_channel(spec, cfg.nu, "decay_rates");
    require_lorentzian(in1, "decay_rates");
    require_lorentzian(in2, "decay_rates");

    const double s_bar =
        in1.k_bar + in2.k_bar + spec.e_ground[cfg.mu] - spec.e_ground[cfg.nu];

    DecayResult out;
    out.l = cfg.l_grid;

    // expected amplitude rates: the leading packet width (the separation
    // exponential closes the contours around packet 1's poles only), the
    // transmission poles and the inelastic-kernel poles
    auto note_rate = [&](double r) {
        for (double have : out.expected)
            if (std::abs(have - r) <= 1e-6 * std::max(1.0, std::abs(r))) return;
        out.expected.push_back(r);
    };
    note_rate(in1.sigma);
    for (const auto& p : t.poles) note_rate(std::abs(p.position.imag()));
    if (!c.empty())
        for (const cplx& q : c.poles(s_bar)) note_rate(std::abs(q.imag()));
    std::sort(out.expected.begin(), out.expected.end());
    for (std::size_t i = 1; i < out.expected.size(); ++i)
        if (out.expected[i] - out.expected[i - 1] <=
            0.01 * std::max(out.expected[i], 1e-300))
            throw numeric_error("decay_rates: two expected rates within 1% (degenerate fit)");

    // fluorescence window on the momentum grid
    const double max_sigma = std::max(in1.sigma, in2.sigma);
    const double shell =
        cfg.shell_halfwidth > 0.0 ? cfg.shell_halfwidth : 4.0 * (in1.sigma + in2.sigma);
    const double excl = cfg.exclusion > 0.0 ? cfg.exclusion : 12.0 * max_sigma;
    const double boxw = cfg.box_halfwidth > 0.0 ? cfg.box_halfwidth : excl + 8.0 * max_sigma;
    const double photon_sum = in1.k_bar + in2.k_bar;

    std::vector<std::pair<double, double>> points;
    const int n = cfg.grid_n;
    const double dp = 2.0 * boxw / (n - 1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double p1 = in1.k_bar - boxw + dp * i;
            const double p2 = in2.k_bar - boxw + dp * j;
            if (std::abs(p1 + p2 - photon_sum) > shell) continue;
            const double d1 = std::min(std::abs(p1 - in1.k_bar), std::abs(p1 - in2.k_bar));
            const double d2 = std::min(std::abs(p2 - in1.k_bar), std::abs(p2 - in2.k_bar));
            if (d1 < excl || d2 < excl) continue;
            points.emplace_back(p1, p2);
        }
    }
    if (points.empty()) throw numeric_error("decay_rates: empty fluorescence window");

    const std::size_t nl = cfg.l_grid.size();
    std::vector<std::vector<double>> partial(points.size());
    par::parallel_for(points.size(), cfg.threads, [&](std::size_t i) {
        const auto [p1, p2] = points[i];
        const ModeSum modes = output_modes(spec, t, c, in1, in2, p1, p2, cfg.mu, cfg.nu);
        std::vector<double> row(nl, 0.0);
        for (std::size_t j = 0; j < nl; ++j) row[j] = std::norm(modes(cfg.l_grid[j]));
        partial[i] = std::move(row);
    });
    out.weight.assign(nl, 0.0);
    for (const auto& row : partial)
        for (std::size_t j = 0; j < nl; ++j) out.weight[j] += row[j] * dp * dp;

    // multi-exponential extraction on the normalized weight
    double fmax = 0.0;
    for (double w : out.weight) fmax = std::max(fmax, w);
    if (fmax <= 0.0) throw numeric_error("decay_rates: window weight vanished");
    std::vector<double> normalized(nl);
    for (std::size_t j = 0; j < nl; ++j) normalized[j] = out.weight[j] / fmax;
    const double dl = cfg.l_grid[1] - cfg.l_grid[0];
    const auto pencil = num::matrix_pencil(normalized, dl, cfg.max_modes);

    double amp_max = 0.0;
    for (const auto& mode : pencil) amp_max = std::max(amp_max, std::abs(mode.amplitude));
    const double min_expected = out.expected.front();

    out.all_explained = true;
    for (const auto& mode : pencil) {
        if (std::abs(mode.amplitude) < cfg.amp_floor * amp_max) continue;
        DecayMode dm;
        dm.raw_rate = -mode.s.real();
        dm.rate = dm.raw_rate;
        dm.amplitude = mode.amplitude;
        if (std::abs(dm.raw_rate) < 0.2 * min_expected) {
            dm.kind = ModeClass::Elastic;  // non-decaying remnant
        } else if (dm.raw_rate > 0.0) {
            // diagonal intensity mode first: rate is twice an amplitude rate
            for (std::size_t e = 0; e < out.expected.size(); ++e)
                if (std::abs(0.5 * dm.raw_rate - out.expected[e]) <=
                    cfg.match_tol * out.expected[e]) {
                    dm.kind = ModeClass::Matched;
                    dm.rate = 0.5 * dm.raw_rate;
                    dm.matched_to = static_cast<int>(e);
                    break;
                }
            if (dm.kind != ModeClass::Matched) {
                // beats: sums of two amplitude rates, or one rate against the
                // elastic component
                for (std::size_t a = 0; a < out.expected.size() && dm.kind != ModeClass::Cross;
                     ++a) {
                    if (std::abs(dm.raw_rate - out.expected[a]) <=
                        cfg.match_tol * out.expected[a])
                        dm.kind = ModeClass::Cross;
                    for (std::size_t b = a; b < out.expected.size(); ++b) {
                        const double sum = out.expected[a] + out.expected[b];
                        if (std::abs(dm.raw_rate - sum) <= cfg.match_tol * sum) {
                            dm.kind = ModeClass::Cross;
                            break;
                        }
                    }
                }
            }
        }
        if (dm.kind == ModeClass::Unexplained) out.all_explained = false;
        if (dm.kind == ModeClass::Matched) out.matched.push_back(dm.rate);
        out.modes.push_back(dm);
    }
    std::sort(out.matched.begin(), out.matched.end());
    return out;
}

}  // namespace wqed::smx
