#include "wqed/groundstate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace wqed::ground {

using model::StateVector;

// ---- Lanczos -----------------------------------------------------------------

namespace {

StateVector seeded_start(std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    StateVector v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = cplx{nd(gen), nd(gen)};
    model::normalize(v);
    return v;
}

}  // namespace

GroundStateResult ground_state(const model::SparseOperator& H, const LanczosOptions& opt) {
    const std::size_t dim = H.dim();
    if (dim == 0) throw std::invalid_argument("ground_state: empty operator");
    if (opt.block_size < 2) throw std::invalid_argument("ground_state: block_size >= 2");

    // Keep the stored Krylov block under ~500 MB.
    const int mem_cap = static_cast<int>(std::max<std::size_t>(
        12, 500'000'000 / (sizeof(cplx) * std::max<std::size_t>(dim, 1))));
    const int m = std::min(opt.block_size, mem_cap);

    StateVector x = seeded_start(dim, opt.seed);
    double theta = 0.0;
    double residual = std::numeric_limits<double>::infinity();

    for (int cycle = 1; cycle <= opt.max_cycles; ++cycle) {
        std::vector<StateVector> V;
        V.reserve(m);
        V.push_back(x);
        Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);  // beta[i]: <i+1|H|i>
        int built = 0;

        for (int i = 0; i < m; ++i) {
            StateVector w = H.apply(V[static_cast<std::size_t>(i)]);
            alpha[i] = std::real(V[static_cast<std::size_t>(i)].dot(w));
            built = i + 1;
            if (i + 1 == m) break;
            // Full reorthogonalization, two passes.
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& v : V) w -= v.dot(w) * v;
            const double b = w.norm();
            if (b < 1e-13) break;  // invariant subspace reached
            beta[i] = b;
            V.push_back(w / b);
        }

        // Smallest Ritz pair of the tridiagonal block.
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(built, built);
        for (int i = 0; i < built; ++i) {
            T(i, i) = alpha[i];
            if (i + 1 < built) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        if (es.info() != Eigen::Success)
            throw numeric_error("ground_state: tridiagonal eigensolve failed");
        theta = es.eigenvalues()(0);
        const Eigen::VectorXd y = es.eigenvectors().col(0);

        x = StateVector::Zero(static_cast<Eigen::Index>(dim));
        for (int i = 0; i < built; ++i) x += y[i] * V[static_cast<std::size_t>(i)];
        model::normalize(x);

        residual = (H.apply(x) - theta * x).norm();
        if (residual < opt.tol * std::max(1.0, std::abs(theta)))
            return GroundStateResult{theta, std::move(x), residual, cycle};
    }
    throw numeric_error("ground_state: Lanczos failed to reach residual " +
                        std::to_string(opt.tol) + " (last residual " +
                        std::to_string(residual) + ")");
}

// ---- cloud profile -------------------------------------------------------------

CloudProfile cloud_profile(const model::LatticeSpec& spec, const model::SectorBasis& basis,
                           const StateVector& gs) {
    CloudProfile out;
    out.site_density = model::photon_density(basis, gs);
    out.qubit_occupation = model::qubit_expectation(basis, gs);
    out.total_photons = out.site_density.sum();
    out.peak_density = out.site_density[spec.half()];

    // Exponential tail n_x ~ e^{-|x|/xi}, fitted on both wings away from the
    // immediate scatterer neighbourhood, above the numeric floor.
    std::vector<double> dist, dens;
    const double floor = std::max(1e-14, 1e-10 * out.peak_density);
    for (int s = 0; s < spec.L; ++s) {
        const int x = spec.site_coord(s);
        if (std::abs(x) < 2) continue;
        if (out.site_density[s] > floor) {
            dist.push_back(std::abs(x));
            dens.push_back(std::log(out.site_density[s]));
        }
    }
    if (dist.size() >= 4) {
        const auto fit = num::linear_fit(dist, dens);
        if (fit.slope < 0.0) {
            out.tail_fit_ok = true;
            out.correlation_length = -1.0 / fit.slope;
            out.tail_r2 = fit.r2;
        }
    }
    return out;
}

// ---- correlators ------------------------------------------------------------------

Eigen::MatrixXcd position_correlations(const model::SectorBasis& basis,
                                       const StateVector& v) {
    const int L = basis.L();
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(L, L);
    std::array<int, model::SectorBasis::kMaxPhotons> reduced{};
    std::array<int, model::SectorBasis::kMaxPhotons> target{};

    for (std::size_t j = 0; j < basis.size(); ++j) {
        const cplx amp = v[static_cast<Eigen::Index>(j)];
        if (amp == cplx{0.0, 0.0}) continue;
        const auto c = basis.decode(j);
        for (int i = 0; i < c.n_photons; ++i) {
            if (i > 0 && c.site[i] == c.site[i - 1]) continue;
            const int y = c.site[i];
            int ny = 0;
            for (int mph = 0; mph < c.n_photons; ++mph)
                if (c.site[mph] == y) ++ny;
            int nr = 0;
            bool dropped = false;
            for (int mph = 0; mph < c.n_photons; ++mph) {
                if (!dropped && c.site[mph] == y) {
                    dropped = true;
                    continue;
                }
                reduced[nr++] = c.site[mph];
            }
            const cplx partial = std::sqrt(static_cast<double>(ny)) * amp;
            // Re-add a photon at every x: target = reduced + {x}.
            for (int x = 0; x < L; ++x) {
                int nt = 0;
                int count_x = 0;
                for (int mph = 0; mph < nr; ++mph) {
                    target[nt++] = reduced[mph];
                    if (reduced[mph] == x) ++count_x;
                }
                target[nt++] = x;
                std::sort(target.begin(), target.begin() + nt);
                const auto row =
                    basis.find(c.qubit, std::span<const int>(target.data(), nt));
                if (!row) continue;
                C(x, y) += std::conj(v[static_cast<Eigen::Index>(*row)]) *
                           std::sqrt(count_x + 1.0) * partial;
            }
        }
    }
    return C / v.squaredNorm();
}

Eigen::MatrixXcd momentum_correlations(const model::LatticeSpec& spec,
                                       const Eigen::MatrixXcd& c_xy) {
    const int L = spec.L;
    if (c_xy.rows() != L || c_xy.cols() != L)
        throw std::invalid_argument("momentum_correlations: matrix size mismatch");
    Eigen::MatrixXcd W(L, L);  // W_kx = e^{-ikx} / sqrt(L)
    const auto ks = spec.momentum_grid();
    const double root_L = std::sqrt(static_cast<double>(L));
    for (int n = 0; n < L; ++n)
        for (int s = 0; s < L; ++s)
            W(n, s) = std::exp(-iu * (ks[n] * spec.site_coord(s))) / root_L;
    return W * c_xy * W.adjoint();
}

BoundCheck correlator_bound_check(const model::LatticeSpec& spec,
                                  const model::SectorBasis& basis,
                                  const model::StateVector& gs,
                                  const Eigen::MatrixXcd& c_kp) {
    const int L = spec.L;
    if (c_kp.rows() != L) throw std::invalid_argument("bound check: size mismatch");
    // <G G^dag>: 1 for the full Rabi coupling (G = sigma_x), 1 - <qubit> for RWA.
    const double ggdag = spec.rwa ? 1.0 - model::qubit_expectation(basis, gs) : 1.0;
    const double gk2 = spec.g * spec.g / L;  // |g_k g_p| on the uniform grid

    const auto ks = spec.momentum_grid();
    BoundCheck out;
    for (int n = 0; n < L; ++n) {
        out.max_diag = std::max(out.max_diag, std::real(c_kp(n, n)));
        out.min_diag = std::min(out.min_diag, std::real(c_kp(n, n)));
        for (int p = 0; p < L; ++p) {
            const double bound =
                std::sqrt(gk2 / (spec.omega(ks[n]) * spec.omega(ks[p]))) * ggdag;
            out.worst_violation =
                std::max(out.worst_violation, std::abs(c_kp(n, p)) - bound);
        }
    }
    return out;
}

double variational_margin(const model::LatticeSpec& spec, const model::SectorBasis& basis,
                          const model::SparseOperator& H, const StateVector& gs,
                          double energy) {
    const auto ks = spec.momentum_grid();
    const double root_L = std::sqrt(static_cast<double>(spec.L));
    std::array<int, model::SectorBasis::kMaxPhotons> reduced{};

    double min_margin = std::numeric_limits<double>::infinity();
    for (double k : ks) {
        // v = a_k |gs> assembled source-side.
        StateVector v = StateVector::Zero(gs.size());
        for (std::size_t j = 0; j < basis.size(); ++j) {
            const cplx amp = gs[static_cast<Eigen::Index>(j)];
            if (amp == cplx{0.0, 0.0}) continue;
            const auto c = basis.decode(j);
            for (int i = 0; i < c.n_photons; ++i) {
                if (i > 0 && c.site[i] == c.site[i - 1]) continue;
                int ns = 0;
                for (int mph = 0; mph < c.n_photons; ++mph)
                    if (c.site[mph] == c.site[i]) ++ns;
                int nr = 0;
                bool dropped = false;
                for (int mph = 0; mph < c.n_photons; ++mph) {
                    if (!dropped && c.site[mph] == c.site[i]) {
                        dropped = true;
                        continue;
                    }
                    reduced[nr++] = c.site[mph];
                }
                const auto row =
                    basis.find(c.qubit, std::span<const int>(reduced.data(), nr));
                if (!row) continue;
                const double x = spec.site_coord(c.site[i]);
                v[static_cast<Eigen::Index>(*row)] +=
                    std::exp(-iu * (k * x)) / root_L * std::sqrt(static_cast<double>(ns)) * amp;
            }
        }
        const double n2 = v.squaredNorm();
        if (n2 < 1e-150) continue;  // a_k annihilates the state (e.g. bare vacuum)
        const double rayleigh = std::real(v.dot(H.apply(v)));
        min_margin = std::min(min_margin, rayleigh - energy * n2);
    }
    if (!std::isfinite(min_margin))
        throw numeric_error("variational_margin: a_k|gs> vanished for every k");
    return min_margin;
}

// ---- packet-over-vacuum deviation ---------------------------------------------------

PacketVacuumScan packet_vacuum_scan(const model::LatticeSpec& spec,
                                    const model::SectorBasis& basis,
                                    const model::StateVector& gs,
                                    const packet::PacketSpec& base,
                                    std::span<const double> x_bars) {
    const Eigen::MatrixXcd C = position_correlations(basis, gs);
    PacketVacuumScan out;
    for (double xb : x_bars) {
        packet::PacketSpec p = base;
        p.x_bar = xb;
        auto c = packet::position_amplitudes(spec, p);
        Eigen::VectorXcd cv(spec.L);
        for (int s = 0; s < spec.L; ++s) cv[s] = c[static_cast<std::size_t>(s)];
        cv.normalize();
        // D = sum_{x,y} C_xy c(x) conj(c(y)) = <GS| psi^dag psi |GS>  >= 0.
        const double dev = std::abs(cv.dot(C.transpose() * cv));
        out.x_bars.push_back(xb);
        out.deviation.push_back(dev);
    }
    std::vector<double> dist(out.x_bars.size());
    for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = std::abs(out.x_bars[i]);
    try {
        out.fit = num::fit_decay(dist, out.deviation, 1e-16);
    } catch (const numeric_error&) {
        out.fit = num::DecayFitResult{};  // all-zero deviations (g = 0) leave no fit
    }
    return out;
}

}  // namespace wqed::ground
