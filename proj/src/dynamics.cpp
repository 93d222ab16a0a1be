#include "wqed/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <span>

#include "wqed/parallel.hpp"

namespace wqed::dynamics {

using model::SparseOperator;
using model::StateVector;

// ---- plan / bounds -----------------------------------------------------------

void EvolutionPlan::validate() const {
    if (!(t_final >= 0.0) || !std::isfinite(t_final))
        throw config_error("plan.t_final must be >= 0");
    if (dt_report < 0.0 || !std::isfinite(dt_report))
        throw config_error("plan.dt_report must be >= 0");
    if (!(tol > 0.0) || tol > 1e-2) throw config_error("plan.tol must lie in (0, 1e-2]");
}

SpectralBounds estimate_bounds(const SparseOperator& H, std::uint64_t seed,
                               int iterations) {
    const std::size_t dim = H.dim();
    if (dim <= 256) {  // small enough for the exact answer
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H.to_dense());
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        const double pad = 1e-9 + 1e-12 * std::max(std::abs(lo), std::abs(hi));
        return SpectralBounds{lo - pad, hi + pad};
    }

    std::mt19937_64 gen(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> nd(0.0, 1.0);
    StateVector v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = cplx{nd(gen), nd(gen)};
    model::normalize(v);

    const int m = std::min<int>(iterations, static_cast<int>(dim));
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m), beta = Eigen::VectorXd::Zero(m);
    StateVector prev = StateVector::Zero(v.size());
    double b_prev = 0.0;
    int built = 0;
    for (int i = 0; i < m; ++i) {
        StateVector w = H.apply(v);
        alpha[i] = std::real(cplx{v.dot(w)});
        built = i + 1;
        if (i + 1 == m) break;
        w -= alpha[i] * v + b_prev * prev;
        const double b = w.norm();
        if (b < 1e-12) break;
        beta[i] = b;
        prev = v;
        v = w / b;
        b_prev = b;
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(built, built);
    for (int i = 0; i < built; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < built) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    // Ritz values approach the spectrum from inside; pad generously.
    const double pad = 0.08 * std::max(hi - lo, 1e-6) + 1e-8;
    return SpectralBounds{lo - pad, hi + pad};
}

// ---- Chebyshev stepper ----------------------------------------------------------

namespace {

class ChebyshevStepper {
  public:
    ChebyshevStepper(const SparseOperator& H, const SpectralBounds& bounds, double dt,
                     double tol)
        : H_(H), dt_(dt) {
        half_span_ = 0.5 * (bounds.e_max - bounds.e_min);
        center_ = 0.5 * (bounds.e_max + bounds.e_min);
        if (half_span_ < 1e-12) return;  // evolution is a pure phase

        const double z = half_span_ * std::abs(dt);
        int m = static_cast<int>(z) + 80 + static_cast<int>(15.0 * std::cbrt(z + 1.0));
        std::vector<double> js;
        for (int attempt = 0; attempt < 6; ++attempt) {
            js = num::bessel_j_array(m, z);
            if (std::abs(js.back()) < tol * 1e-4) break;
            m *= 2;
        }
        // Walk down from the top until the dropped tail would matter.
        double tail = 0.0;
        int n_terms = m;
        for (int n = m; n >= 1; --n) {
            tail += 2.0 * std::abs(js[static_cast<std::size_t>(n)]);
            if (tail > 0.125 * tol) {
                n_terms = std::min(n + 1, m);
                break;
            }
            n_terms = n;
        }
        n_terms = std::max(n_terms, 2);

        const cplx phase = std::exp(-iu * (center_ * dt));
        const cplx unit = dt >= 0.0 ? -iu : iu;  // (-i sgn dt)^n pairs with J_n(a|dt|)
        coef_.resize(static_cast<std::size_t>(n_terms) + 1);
        cplx ipow{1.0, 0.0};
        for (int n = 0; n <= n_terms; ++n) {
            const double scale = (n == 0) ? 1.0 : 2.0;
            coef_[static_cast<std::size_t>(n)] =
                scale * ipow * js[static_cast<std::size_t>(n)] * phase;
            ipow *= unit;
        }
    }

    void step(StateVector& psi) const {
        if (half_span_ < 1e-12) {
            psi *= std::exp(-iu * (center_ * dt_));
            return;
        }
        const double inv_a = 1.0 / half_span_;
        auto apply_scaled = [&](const StateVector& v) {
            StateVector w = H_.apply(v);
            w -= center_ * v;
            w *= inv_a;
            return w;
        };
        StateVector t0 = psi;
        StateVector t1 = apply_scaled(psi);
        StateVector acc = coef_[0] * t0 + coef_[1] * t1;
        for (std::size_t n = 2; n < coef_.size(); ++n) {
            StateVector t2 = apply_scaled(t1);
            t2 = 2.0 * t2 - t0;
            acc += coef_[n] * t2;
            t0.swap(t1);
            t1.swap(t2);
        }
        psi = std::move(acc);
    }

  private:
    const SparseOperator& H_;
    double dt_ = 0.0;
    double half_span_ = 0.0;
    double center_ = 0.0;
    std::vector<cplx> coef_;
};

// ---- Krylov stepper --------------------------------------------------------------

struct KrylovAttempt {
    StateVector result;
    double err = 0.0;
};

// Single Lanczos exponential with the usual last-component error estimate.
KrylovAttempt krylov_attempt(const SparseOperator& H, const StateVector& psi, double dt,
                             int m) {
    KrylovAttempt out;
    const double beta0 = psi.norm();
    if (beta0 < 1e-150) {
        out.result = psi;
        return out;
    }
    std::vector<StateVector> V;
    V.reserve(static_cast<std::size_t>(m));
    V.push_back(psi / beta0);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m), beta = Eigen::VectorXd::Zero(m);
    int built = 0;
    double b_out = 0.0;  // coupling out of the Krylov space
    for (int i = 0; i < m; ++i) {
        StateVector w = H.apply(V[static_cast<std::size_t>(i)]);
        alpha[i] = std::real(cplx{V[static_cast<std::size_t>(i)].dot(w)});
        built = i + 1;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& v : V) w -= cplx{v.dot(w)} * v;
        const double b = w.norm();
        if (b < 1e-13) {
            b_out = 0.0;  // invariant subspace: expansion is exact
            break;
        }
        if (i + 1 == m) {
            b_out = b;
            break;
        }
        beta[i] = b;
        V.push_back(w / b);
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(built, built);
    for (int i = 0; i < built; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < built) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(built);
    e1[0] = beta0;
    const Eigen::VectorXcd phases =
        (-iu * dt * es.eigenvalues().cast<cplx>().array()).exp();
    const Eigen::VectorXcd small =
        es.eigenvectors().cast<cplx>() *
        (phases.array() * (es.eigenvectors().transpose().cast<cplx>() * e1).array())
            .matrix();
    out.result = StateVector::Zero(psi.size());
    for (int i = 0; i < built; ++i) out.result += small[i] * V[static_cast<std::size_t>(i)];
    out.err = b_out * std::abs(small[built - 1]);
    return out;
}

void krylov_evolve(const SparseOperator& H, StateVector& psi, double dt_total, double tol,
                   int m) {
    if (dt_total == 0.0) return;
    double remaining = std::abs(dt_total);
    const double sign = dt_total >= 0.0 ? 1.0 : -1.0;
    double dt = remaining;
    int guard = 0;
    while (remaining > 1e-15 * std::abs(dt_total)) {
        if (++guard > 100000) throw numeric_error("krylov_evolve: step control stalled");
        dt = std::min(dt, remaining);
        const auto attempt = krylov_attempt(H, psi, sign * dt, m);
        const double budget = tol * dt / std::abs(dt_total);
        if (attempt.err <= budget) {
            psi = attempt.result;
            remaining -= dt;
            if (attempt.err < 0.01 * budget) dt *= 1.7;
        } else {
            dt *= 0.5;
            if (dt < 1e-9 * std::abs(dt_total))
                throw numeric_error("krylov_evolve: step size collapsed");
        }
    }
}

}  // namespace

// ---- evolve ------------------------------------------------------------------------

EvolveResult evolve(const SparseOperator& H, const StateVector& psi0,
                    const EvolutionPlan& plan, std::uint64_t seed,
                    const std::function<void(double, const StateVector&)>& observer) {
    plan.validate();
    EvolveResult out;
    out.state = psi0;
    const double norm0 = psi0.norm();
    const double energy0 =
        norm0 > 0 ? std::real(cplx{psi0.dot(H.apply(psi0))}) / (norm0 * norm0) : 0.0;
    if (observer) observer(0.0, out.state);
    if (plan.t_final == 0.0) return out;

    const double dt =
        plan.dt_report > 0.0 ? std::min(plan.dt_report, plan.t_final) : plan.t_final;
    const int full_steps = static_cast<int>(std::floor(plan.t_final / dt + 1e-12));
    const double rest = plan.t_final - full_steps * dt;

    std::map<double, ChebyshevStepper> steppers;
    if (plan.method == PropagatorKind::Chebyshev) {
        const SpectralBounds bounds = estimate_bounds(H, seed);
        steppers.emplace(dt, ChebyshevStepper(H, bounds, dt, plan.tol));
        if (rest > 1e-12)
            steppers.emplace(rest, ChebyshevStepper(H, bounds, rest, plan.tol));
    }
    auto advance = [&](double step_dt) {
        if (plan.method == PropagatorKind::Chebyshev)
            steppers.at(step_dt).step(out.state);
        else
            krylov_evolve(H, out.state, step_dt, plan.tol, 32);
    };

    double t = 0.0;
    auto record = [&] {
        const double n = out.state.norm();
        out.norm_drift = std::max(out.norm_drift, std::abs(n - norm0));
        const double e =
            n > 0 ? std::real(cplx{out.state.dot(H.apply(out.state))}) / (n * n) : 0.0;
        out.energy_drift = std::max(out.energy_drift, std::abs(e - energy0));
        if (observer) observer(t, out.state);
    };
    for (int s = 0; s < full_steps; ++s) {
        advance(dt);
        t += dt;
        record();
    }
    if (rest > 1e-12) {
        advance(rest);
        t = plan.t_final;
        record();
    }
    return out;
}

// ---- fields --------------------------------------------------------------------------

namespace {

// Compress the (sorted) occupied sites of a configuration into runs.
struct SiteRuns {
    int n = 0;
    std::array<int, model::SectorBasis::kMaxPhotons> site{};
    std::array<int, model::SectorBasis::kMaxPhotons> count{};
};

SiteRuns runs_of(const model::SectorBasis::Config& c) {
    SiteRuns r;
    for (int q = 0; q < c.n_photons; ++q) {
        const int s = c.site[static_cast<std::size_t>(q)];
        if (r.n > 0 && r.site[static_cast<std::size_t>(r.n - 1)] == s) {
            ++r.count[static_cast<std::size_t>(r.n - 1)];
        } else {
            r.site[static_cast<std::size_t>(r.n)] = s;
            r.count[static_cast<std::size_t>(r.n)] = 1;
            ++r.n;
        }
    }
    return r;
}

// Occupied sites with one photon removed at u (and at v unless v < 0), ascending.
int reduced_sites(const model::SectorBasis::Config& c, int u, int v,
                  std::array<int, model::SectorBasis::kMaxPhotons>& out) {
    int n = 0;
    bool du = false, dv = v < 0;
    for (int q = 0; q < c.n_photons; ++q) {
        const int s = c.site[static_cast<std::size_t>(q)];
        if (!du && s == u) {
            du = true;
            continue;
        }
        if (!dv && s == v) {
            dv = true;
            continue;
        }
        out[static_cast<std::size_t>(n++)] = s;
    }
    return n;
}

}  // namespace

Eigen::MatrixXcd two_photon_position_field(const model::SectorBasis& basis,
                                           const StateVector& ground,
                                           const StateVector& psi) {
    const int L = basis.L();
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(L, L);
    std::array<int, model::SectorBasis::kMaxPhotons> reduced{};

    for (std::size_t j = 0; j < basis.size(); ++j) {
        const cplx amp = psi[static_cast<Eigen::Index>(j)];
        if (amp == cplx{0.0, 0.0}) continue;
        const auto c = basis.decode(j);
        if (c.n_photons < 2) continue;
        const SiteRuns r = runs_of(c);
        for (int a = 0; a < r.n; ++a) {
            const int u = r.site[static_cast<std::size_t>(a)];
            const int nu = r.count[static_cast<std::size_t>(a)];
            if (nu >= 2) {  // both photons off the same site
                const int nr = reduced_sites(c, u, u, reduced);
                if (const auto row = basis.find(
                        c.qubit, std::span<const int>(reduced.data(),
                                                      static_cast<std::size_t>(nr)))) {
                    M(u, u) += std::sqrt(static_cast<double>(nu) * (nu - 1)) * amp *
                               std::conj(ground[static_cast<Eigen::Index>(*row)]);
                }
            }
            for (int b = a + 1; b < r.n; ++b) {
                const int v = r.site[static_cast<std::size_t>(b)];
                const int nv = r.count[static_cast<std::size_t>(b)];
                const int nr = reduced_sites(c, u, v, reduced);
                const auto row = basis.find(
                    c.qubit,
                    std::span<const int>(reduced.data(), static_cast<std::size_t>(nr)));
                if (!row) continue;
                const cplx val = std::sqrt(static_cast<double>(nu) * nv) * amp *
                                 std::conj(ground[static_cast<Eigen::Index>(*row)]);
                M(u, v) += val;
                M(v, u) += val;
            }
        }
    }
    return M;
}

TwoPhotonField two_photon_field(const model::LatticeSpec& spec,
                                const model::SectorBasis& basis, const StateVector& ground,
                                const StateVector& psi) {
    const Eigen::MatrixXcd M = two_photon_position_field(basis, ground, psi);
    const int L = spec.L;
    Eigen::MatrixXcd W(L, L);
    const auto ks = spec.momentum_grid();
    const double root_L = std::sqrt(static_cast<double>(L));
    for (int n = 0; n < L; ++n)
        for (int s = 0; s < L; ++s)
            W(n, s) = std::exp(-iu * (ks[static_cast<std::size_t>(n)] *
                                      static_cast<double>(spec.site_coord(s)))) /
                      root_L;
    TwoPhotonField out;
    out.momenta = ks;
    out.phi = W * M * W.transpose();
    return out;
}

Eigen::VectorXcd single_photon_field(const model::LatticeSpec& spec,
                                     const model::SectorBasis& basis,
                                     const StateVector& ground, const StateVector& psi) {
    const int L = spec.L;
    Eigen::VectorXcd f = Eigen::VectorXcd::Zero(L);
    std::array<int, model::SectorBasis::kMaxPhotons> reduced{};
    for (std::size_t j = 0; j < basis.size(); ++j) {
        const cplx amp = psi[static_cast<Eigen::Index>(j)];
        if (amp == cplx{0.0, 0.0}) continue;
        const auto c = basis.decode(j);
        if (c.n_photons < 1) continue;
        const SiteRuns r = runs_of(c);
        for (int a = 0; a < r.n; ++a) {
            const int u = r.site[static_cast<std::size_t>(a)];
            const int nr = reduced_sites(c, u, -1, reduced);
            const auto row = basis.find(
                c.qubit, std::span<const int>(reduced.data(), static_cast<std::size_t>(nr)));
            if (!row) continue;
            f[u] += std::sqrt(static_cast<double>(r.count[static_cast<std::size_t>(a)])) *
                    amp * std::conj(ground[static_cast<Eigen::Index>(*row)]);
        }
    }
    Eigen::VectorXcd fm = Eigen::VectorXcd::Zero(L);
    const auto ks = spec.momentum_grid();
    const double root_L = std::sqrt(static_cast<double>(L));
    for (int n = 0; n < L; ++n) {
        cplx acc{0.0, 0.0};
        for (int s = 0; s < L; ++s)
            acc += std::exp(-iu * (ks[static_cast<std::size_t>(n)] *
                                   static_cast<double>(spec.site_coord(s)))) *
                   f[s];
        fm[n] = acc / root_L;
    }
    return fm;
}

// ---- scatter_run ------------------------------------------------------------------------

ScatterResult scatter_run(const ScatterConfig& cfg) {
    cfg.lattice.validate();
    if (cfg.packets.empty() || cfg.packets.size() > 2)
        throw config_error("scatter_run: need one or two packets");
    const auto basis = model::SectorBasis::build(cfg.lattice);
    const auto H = model::build_hamiltonian(cfg.lattice, basis);

    ScatterResult out;
    ground::LanczosOptions lopt;
    lopt.seed = cfg.seed;
    auto gs = ground::ground_state(H, lopt);
    out.ground = std::move(gs.state);
    out.diag.ground_energy = gs.energy;

    out.in_state = packet::make_packet_state(cfg.lattice, basis, cfg.packets, out.ground,
                                             cfg.margins);
    const double n_ground = model::photon_number_expectation(basis, out.ground);
    const double tot_ground = n_ground + model::qubit_expectation(basis, out.ground);

    auto observer = [&](double t, const StateVector& psi) {
        const Eigen::VectorXd dens = model::photon_density(basis, psi);
        const double nrm2 = psi.squaredNorm();
        out.diag.times.push_back(t);
        out.diag.n_fly.push_back(dens.sum() - n_ground);
        out.diag.n_total.push_back(dens.sum() + model::qubit_expectation(basis, psi) -
                                   tot_ground);
        out.diag.norms.push_back(std::sqrt(nrm2));
        out.diag.energy.push_back(
            nrm2 > 0 ? std::real(cplx{psi.dot(H.apply(psi))}) / nrm2 : 0.0);
        double edge = 0.0;
        for (int s = 0; s < 3; ++s)
            edge = std::max({edge, dens[s], dens[cfg.lattice.L - 1 - s]});
        out.diag.boundary_density = std::max(out.diag.boundary_density, edge);
        if (edge > 1e-4)
            throw numeric_error(
                "scatter_run: wave packet reached the lattice boundary (t = " +
                std::to_string(t) + ")");
    };

    auto evo = evolve(H, out.in_state, cfg.plan, cfg.seed, observer);
    out.out_state = std::move(evo.state);
    out.diag.norm_drift = evo.norm_drift;
    out.diag.energy_drift = evo.energy_drift;
    for (double nf : out.diag.n_fly)
        out.diag.flying_drift =
            std::max(out.diag.flying_drift, std::abs(nf - out.diag.n_fly[0]));
    for (double nt : out.diag.n_total)
        out.diag.total_drift =
            std::max(out.diag.total_drift, std::abs(nt - out.diag.n_total[0]));

    out.out_density = model::photon_density(basis, out.out_state);
    if (cfg.packets.size() == 2)
        out.field = two_photon_field(cfg.lattice, basis, out.ground, out.out_state);
    return out;
}

// ---- fluorescence -------------------------------------------------------------------------

void FluorescenceWindow::validate() const {
    if (!(sigma_omega > 0.0))
        throw config_error("fluorescence window: sigma_omega must be > 0");
    if (!std::isfinite(omega_bar))
        throw config_error("fluorescence window: omega_bar must be finite");
    if (!(shell_factor > 0.0) || exclusion_factor < 0.0)
        throw config_error("fluorescence window: bad shell/exclusion factors");
}

FluorescenceResult fluorescence(const model::LatticeSpec& spec, const TwoPhotonField& field,
                                const FluorescenceWindow& win) {
    win.validate();
    const int L = static_cast<int>(field.momenta.size());
    if (field.phi.rows() != L || field.phi.cols() != L)
        throw std::invalid_argument("fluorescence: field/momenta size mismatch");
    FluorescenceResult out;
    for (int i = 0; i < L; ++i) {
        const double w1 = spec.omega(field.momenta[static_cast<std::size_t>(i)]);
        for (int j = 0; j < L; ++j) {
            const double w2 = spec.omega(field.momenta[static_cast<std::size_t>(j)]);
            if (std::abs(w1 + w2 - 2.0 * win.omega_bar) >
                win.shell_factor * win.sigma_omega)
                continue;
            const double weight = std::norm(field.phi(i, j));
            out.shell_weight += weight;
            ++out.shell_points;
            if (std::abs(w1 - win.omega_bar) >= win.exclusion_factor * win.sigma_omega &&
                std::abs(w2 - win.omega_bar) >= win.exclusion_factor * win.sigma_omega) {
                out.window_weight += weight;
                ++out.window_points;
            }
        }
    }
    if (out.window_points == 0)
        throw numeric_error("fluorescence: window contains no momentum-grid points");
    out.value = out.shell_weight > 0.0 ? out.window_weight / out.shell_weight : 0.0;
    return out;
}

double resolvable_separation(const packet::PacketSpec& base) {
    base.validate();
    const double sigma = base.sigma;
    auto one = [&](double u) {
        return base.kind == packet::EnvelopeKind::Gaussian
                   ? std::exp(-2.0 * sigma * sigma * u * u)
                   : std::exp(-2.0 * sigma * std::abs(u));
    };
    const double dl = 0.02 / sigma;
    for (double l = dl; l <= 20.0 / sigma; l += dl) {
        // Scan the two-bump profile for two maxima with a 50% dip between them.
        const double lo = -3.0 / sigma, hi = l + 3.0 / sigma, dx = 0.01 / sigma;
        double first_max = 0.0, second_max = 0.0;
        double dip = std::numeric_limits<double>::infinity();
        bool have_first = false, rising = true;
        double prev = one(lo) + one(lo - l);
        for (double x = lo + dx; x <= hi; x += dx) {
            const double cur = one(x) + one(x - l);
            if (rising && cur < prev) {  // local maximum at prev
                if (!have_first) {
                    first_max = prev;
                    have_first = true;
                } else {
                    second_max = std::max(second_max, prev);
                }
                rising = false;
            } else if (!rising && cur > prev) {  // local minimum at prev
                dip = std::min(dip, prev);
                rising = true;
            }
            prev = cur;
        }
        if (have_first && second_max > 0.0 && dip <= 0.5 * std::min(first_max, second_max))
            return l;
    }
    throw numeric_error("resolvable_separation: packets merge up to 20/sigma");
}

FluorescenceScanResult fluorescence_scan(const FluorescenceScanConfig& cfg) {
    if (cfg.base.packets.size() != 2)
        throw config_error("fluorescence_scan: base config needs two packets");
    if (cfg.separations.empty()) throw config_error("fluorescence_scan: no separations");
    cfg.base.lattice.validate();
    const auto basis = model::SectorBasis::build(cfg.base.lattice);
    const auto H = model::build_hamiltonian(cfg.base.lattice, basis);
    ground::LanczosOptions lopt;
    lopt.seed = cfg.base.seed;
    const auto gs = ground::ground_state(H, lopt);

    FluorescenceWindow win = cfg.window;
    if (!(win.sigma_omega > 0.0)) {  // derive from the leading packet
        const auto& p1 = cfg.base.packets[0];
        win.omega_bar = cfg.base.lattice.omega(p1.k_bar);
        win.sigma_omega = std::abs(cfg.base.lattice.group_velocity(p1.k_bar)) * p1.sigma;
    }
    win.validate();

    FluorescenceScanResult out;
    out.separations = cfg.separations;
    out.values.assign(cfg.separations.size(), 0.0);
    out.l_c = resolvable_separation(cfg.base.packets[0]);

    par::parallel_for(cfg.separations.size(), cfg.threads, [&](std::size_t i) {
        auto packets = cfg.base.packets;
        packets[1].x_bar = packets[0].x_bar - cfg.separations[i];
        auto in = packet::make_packet_state(cfg.base.lattice, basis, packets, gs.state,
                                            cfg.base.margins);
        auto evo = evolve(H, in, cfg.base.plan, cfg.base.seed);
        const auto field = two_photon_field(cfg.base.lattice, basis, gs.state, evo.state);
        out.values[i] = fluorescence(cfg.base.lattice, field, win).value;
    });
    return out;
}

CorrelationDiagnostic field_correlation(const model::LatticeSpec& spec,
                                        const Eigen::MatrixXcd& position_field,
                                        int window_lo_x, int window_hi_x, int plateau_lo_r,
                                        int plateau_hi_r) {
    if (window_hi_x < window_lo_x)
        throw std::invalid_argument("field_correlation: empty site window");
    if (plateau_lo_r < 1 || plateau_hi_r < plateau_lo_r)
        throw std::invalid_argument("field_correlation: bad plateau offsets");
    auto g_of_r = [&](int r) {
        double acc = 0.0;
        long count = 0;
        for (int x = window_lo_x; x <= window_hi_x; ++x) {
            const int xr = x + r;
            if (xr > window_hi_x) break;
            acc += std::norm(position_field(spec.site_index(x), spec.site_index(xr)));
            ++count;
        }
        if (count == 0) throw numeric_error("field_correlation: window too small");
        return acc / static_cast<double>(count);
    };
    CorrelationDiagnostic out;
    out.same_point = g_of_r(0);
    double acc = 0.0;
    int n = 0;
    for (int r = plateau_lo_r; r <= plateau_hi_r; ++r) {
        acc += g_of_r(r);
        ++n;
    }
    out.plateau = acc / std::max(1, n);
    out.ratio = out.plateau > 0.0 ? out.same_point / out.plateau
                                  : std::numeric_limits<double>::infinity();
    return out;
}

// ---- cluster factorization ---------------------------------------------------------------

ClusterCheckResult cluster_check(const ClusterCheckConfig& cfg) {
    cfg.lattice.validate();
    if (cfg.separations.empty()) throw config_error("cluster_check: no separations");
    const auto basis = model::SectorBasis::build(cfg.lattice);
    const auto H = model::build_hamiltonian(cfg.lattice, basis);
    ground::LanczosOptions lopt;
    lopt.seed = cfg.seed;
    const auto gs = ground::ground_state(H, lopt);

    const double T = cfg.plan.t_final;
    auto reflected = [&](const packet::PacketSpec& in) {
        packet::PacketSpec out = in;
        out.k_bar = -in.k_bar;
        out.x_bar = -in.x_bar - cfg.lattice.group_velocity(in.k_bar) * T;
        return out;
    };
    auto amplitude = [&](const std::vector<packet::PacketSpec>& ins,
                         const std::vector<packet::PacketSpec>& outs) {
        const auto in_state =
            packet::make_packet_state(cfg.lattice, basis, ins, gs.state, cfg.margins);
        const auto out_ref =
            packet::make_packet_state(cfg.lattice, basis, outs, gs.state, cfg.margins);
        auto evo = evolve(H, in_state, cfg.plan, cfg.seed);
        return cplx{out_ref.dot(evo.state)};
    };

    const cplx a1 = amplitude({cfg.in1}, {reflected(cfg.in1)});

    ClusterCheckResult out;
    out.ground_energy = gs.energy;
    out.points.assign(cfg.separations.size(), ClusterPoint{});

    par::parallel_for(cfg.separations.size(), cfg.threads, [&](std::size_t i) {
        const double l = cfg.separations[i];
        packet::PacketSpec in2 = cfg.in2_base;
        in2.x_bar = cfg.in1.x_bar - l;
        const cplx a2 = amplitude({in2}, {reflected(in2)});
        const cplx a12 = amplitude({cfg.in1, in2}, {reflected(cfg.in1), reflected(in2)});
        ClusterPoint pt;
        pt.separation = l;
        pt.a1 = a1;
        pt.a2 = a2;
        pt.a12 = a12;
        pt.deviation = std::abs(a12 - a1 * a2) / std::max(std::abs(a1 * a2), 1e-300);
        out.points[i] = pt;
    });
    return out;
}

// ---- free-evolution comparison ---------------------------------------------------------------

FreeEvolutionCheck free_evolution_check(const model::LatticeSpec& spec,
                                        const model::SectorBasis& basis,
                                        const model::StateVector& gs,
                                        const packet::PacketSpec& p,
                                        const EvolutionPlan& plan, std::uint64_t seed) {
    const auto H = model::build_hamiltonian(spec, basis);
    const auto psi0 = packet::make_packet_state(
        spec, basis, std::span<const packet::PacketSpec>(&p, 1), gs);
    auto evo = evolve(H, psi0, plan, seed);

    // Freely evolved packet operator: each momentum amplitude picks up
    // e^{-i omega_k T}, which is a shift of the emission time.
    packet::PacketSpec shifted = p;
    shifted.t0 = p.t0 - plan.t_final;
    const auto reference = packet::make_packet_state(
        spec, basis, std::span<const packet::PacketSpec>(&shifted, 1), gs);

    FreeEvolutionCheck out;
    const double overlap = std::abs(cplx{reference.dot(evo.state)}) /
                           (reference.norm() * evo.state.norm());
    out.infidelity = 1.0 - overlap;
    out.cone_distance = std::abs(p.x_bar) - spec.max_speed() * plan.t_final;
    return out;
}

}  // namespace wqed::dynamics
