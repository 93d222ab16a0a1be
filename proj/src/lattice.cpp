#include "wqed/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wqed::model {

// ---- LatticeSpec -----------------------------------------------------------

void LatticeSpec::validate() const {
    if (L < 3 || L % 2 == 0)
        throw config_error("lattice.L must be odd and >= 3, got " + std::to_string(L));
    if (L > 1023)
        throw config_error("lattice.L must be <= 1023 (64-bit state keys), got " +
                           std::to_string(L));
    if (n_max < 0 || n_max > SectorBasis::kMaxPhotons)
        throw config_error("lattice.n_max must lie in 0..5, got " + std::to_string(n_max));
    for (double v : {epsilon, J, Delta, g})
        if (!std::isfinite(v)) throw config_error("lattice parameters must be finite");
    if (J < 0.0) throw config_error("lattice.J must be >= 0");
}

int LatticeSpec::site_index(int x) const {
    if (x < -half() || x > half())
        throw config_error("site coordinate " + std::to_string(x) + " outside lattice of " +
                           std::to_string(L) + " sites");
    return x + half();
}

std::vector<double> LatticeSpec::momentum_grid() const {
    std::vector<double> ks(L);
    for (int n = -half(); n <= half(); ++n) ks[n + half()] = 2.0 * pi * n / L;
    return ks;
}

// ---- SectorBasis -----------------------------------------------------------

namespace {

constexpr int kSlotBits = 10;
constexpr int kQubitShift = kSlotBits * SectorBasis::kMaxPhotons;  // 50

// Binomial C(n, k) in unsigned arithmetic, exact for our small k.
std::size_t binom(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

std::uint64_t SectorBasis::encode(int L, bool qubit, std::span<const int> sites_ascending) {
    std::uint64_t key = qubit ? (std::uint64_t{1} << kQubitShift) : 0;
    int slot = 0;
    for (int s : sites_ascending) {
        // m = L - s maps ascending sites to descending slot values, which makes
        // integer key order coincide with occupation-vector lexicographic order.
        const std::uint64_t m = static_cast<std::uint64_t>(L - s);
        key |= m << (kSlotBits * (kMaxPhotons - 1 - slot));
        ++slot;
    }
    return key;
}

std::size_t SectorBasis::count_states(int L, int n_max) {
    std::size_t total = 0;
    for (int n = 0; n <= n_max; ++n) total += binom(L + n - 1, n);          // qubit down
    for (int n = 0; n + 1 <= n_max; ++n) total += binom(L + n - 1, n);      // qubit up
    return total;
}

SectorBasis SectorBasis::build(const LatticeSpec& spec, std::size_t max_states) {
    spec.validate();
    const std::size_t expected = count_states(spec.L, spec.n_max);
    if (expected > max_states)
        throw config_error("sector basis would hold " + std::to_string(expected) +
                           " states, exceeding the cap of " + std::to_string(max_states));

    SectorBasis basis;
    basis.L_ = spec.L;
    basis.n_max_ = spec.n_max;
    basis.keys_.reserve(expected);

    std::array<int, kMaxPhotons> sites{};
    // Multisets p_1 <= ... <= p_n enumerated recursively for each photon count.
    auto emit = [&](auto&& self, bool qubit, int depth, int target, int min_site) -> void {
        if (depth == target) {
            basis.keys_.push_back(
                encode(spec.L, qubit, std::span<const int>(sites.data(), depth)));
            return;
        }
        for (int s = min_site; s < spec.L; ++s) {
            sites[depth] = s;
            self(self, qubit, depth + 1, target, s);
        }
    };
    for (int q = 0; q <= 1; ++q)
        for (int n = 0; n + q <= spec.n_max; ++n) emit(emit, q != 0, 0, n, 0);

    std::sort(basis.keys_.begin(), basis.keys_.end());
    if (basis.keys_.size() != expected)
        throw numeric_error("sector basis enumeration disagrees with closed-form count");
    return basis;
}

SectorBasis::Config SectorBasis::decode(std::size_t idx) const {
    const std::uint64_t key = keys_[idx];
    Config c;
    c.qubit = (key >> kQubitShift) & 1;
    for (int slot = 0; slot < kMaxPhotons; ++slot) {
        const std::uint64_t m = (key >> (kSlotBits * (kMaxPhotons - 1 - slot))) & 0x3ff;
        if (m == 0) break;
        c.site[c.n_photons++] = static_cast<std::uint16_t>(L_ - static_cast<int>(m));
    }
    return c;
}

int SectorBasis::total_excitations(std::size_t idx) const {
    const Config c = decode(idx);
    return c.n_photons + (c.qubit ? 1 : 0);
}

std::optional<std::size_t> SectorBasis::find_key(std::uint64_t key) const {
    const auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
    if (it == keys_.end() || *it != key) return std::nullopt;
    return static_cast<std::size_t>(it - keys_.begin());
}

std::optional<std::size_t> SectorBasis::find(bool qubit,
                                             std::span<const int> sites_ascending) const {
    if (static_cast<int>(sites_ascending.size()) + (qubit ? 1 : 0) > n_max_)
        return std::nullopt;
    return find_key(encode(L_, qubit, sites_ascending));
}

// ---- SparseOperator ---------------------------------------------------------

SparseOperator::SparseOperator(std::size_t dim, const std::vector<Triplet>& entries,
                               bool hermitian)
    : hermitian_(hermitian) {
    mat_.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    mat_.setFromTriplets(entries.begin(), entries.end());  // duplicates summed
    mat_.prune([](const Eigen::Index&, const Eigen::Index&, const cplx& v) {
        return v != cplx{0.0, 0.0};
    });
    mat_.makeCompressed();
    if (hermitian_) {
        const double defect = hermiticity_defect();
        if (defect >= 1e-12)
            throw numeric_error("operator flagged Hermitian has defect " +
                                std::to_string(defect));
    }
}

double SparseOperator::hermiticity_defect() const {
    Eigen::SparseMatrix<cplx, Eigen::RowMajor> diff = mat_;
    diff -= Eigen::SparseMatrix<cplx, Eigen::RowMajor>(mat_.adjoint());
    double worst = 0.0;
    for (int row = 0; row < diff.outerSize(); ++row)
        for (decltype(diff)::InnerIterator it(diff, row); it; ++it)
            worst = std::max(worst, std::abs(it.value()));
    return worst;
}

StateVector SparseOperator::apply(const StateVector& v) const {
    if (v.size() != mat_.cols())
        throw std::invalid_argument("SparseOperator::apply: dimension mismatch");
    return mat_ * v;
}

Eigen::MatrixXcd SparseOperator::to_dense() const {
    if (mat_.rows() > 8192)
        throw std::invalid_argument("to_dense: refusing dense conversion above 8192");
    return Eigen::MatrixXcd(mat_);
}

// ---- operator builders --------------------------------------------------------

namespace {

// One directed move of a photon between sites; returns the bosonic factor and
// writes the resulting ascending multiset into `out`.
double hop_multiset(const SectorBasis::Config& c, int from_pos, int to_site,
                    std::array<int, SectorBasis::kMaxPhotons>& out) {
    int n = 0;
    int count_to = 0;
    for (int i = 0; i < c.n_photons; ++i) {
        if (i == from_pos) continue;
        out[n++] = c.site[i];
        if (c.site[i] == to_site) ++count_to;
    }
    out[n++] = to_site;
    std::sort(out.begin(), out.begin() + n);
    int count_from = 0;
    for (int i = 0; i < c.n_photons; ++i)
        if (c.site[i] == c.site[from_pos]) ++count_from;
    return std::sqrt(static_cast<double>(count_from)) *
           std::sqrt(static_cast<double>(count_to + 1));
}

}  // namespace

SparseOperator build_hamiltonian(const LatticeSpec& spec, const SectorBasis& basis) {
    spec.validate();
    const std::size_t dim = basis.size();
    std::vector<SparseOperator::Triplet> trips;
    trips.reserve(dim * (2 + 2 * static_cast<std::size_t>(spec.n_max)));

    const int s0 = spec.half();  // scatterer site index
    std::array<int, SectorBasis::kMaxPhotons> scratch{};

    for (std::size_t j = 0; j < dim; ++j) {
        const auto c = basis.decode(j);
        const int col = static_cast<int>(j);

        // On-site energies and qubit splitting.
        const double diag = spec.epsilon * c.n_photons + (c.qubit ? spec.Delta : 0.0);
        if (diag != 0.0) trips.emplace_back(col, col, cplx{diag, 0.0});

        // Hopping: move each photon to either neighbour (open chain).
        if (spec.J != 0.0) {
            for (int i = 0; i < c.n_photons; ++i) {
                if (i > 0 && c.site[i] == c.site[i - 1]) continue;  // same source site
                for (int dir : {-1, +1}) {
                    const int to = c.site[i] + dir;
                    if (to < 0 || to >= spec.L) continue;
                    const double fac = hop_multiset(c, i, to, scratch);
                    const auto row = basis.find(
                        c.qubit, std::span<const int>(scratch.data(), c.n_photons));
                    if (!row) continue;  // cannot happen: photon count unchanged
                    trips.emplace_back(static_cast<int>(*row), col,
                                       cplx{-spec.J * fac, 0.0});
                }
            }
        }

        // Qubit-photon coupling at the scatterer site.
        if (spec.g != 0.0) {
            int n0 = 0;
            for (int i = 0; i < c.n_photons; ++i)
                if (c.site[i] == s0) ++n0;

            auto add_photon = [&](bool q_new) {
                int n = 0;
                for (int i = 0; i < c.n_photons; ++i) scratch[n++] = c.site[i];
                scratch[n++] = s0;
                std::sort(scratch.begin(), scratch.begin() + n);
                const auto row = basis.find(q_new, std::span<const int>(scratch.data(), n));
                if (row)
                    trips.emplace_back(static_cast<int>(*row), col,
                                       cplx{spec.g * std::sqrt(n0 + 1.0), 0.0});
            };
            auto remove_photon = [&](bool q_new) {
                if (n0 == 0) return;
                int n = 0;
                bool dropped = false;
                for (int i = 0; i < c.n_photons; ++i) {
                    if (!dropped && c.site[i] == s0) {
                        dropped = true;
                        continue;
                    }
                    scratch[n++] = c.site[i];
                }
                const auto row = basis.find(q_new, std::span<const int>(scratch.data(), n));
                if (row)
                    trips.emplace_back(static_cast<int>(*row), col,
                                       cplx{spec.g * std::sqrt(static_cast<double>(n0)), 0.0});
            };

            if (!c.qubit) {
                remove_photon(true);              // s+ a_0
                if (!spec.rwa) add_photon(true);  // s+ a_0^dag (counter-rotating)
            } else {
                add_photon(false);                   // s- a_0^dag
                if (!spec.rwa) remove_photon(false);  // s- a_0 (counter-rotating)
            }
        }
    }
    return SparseOperator(dim, trips, /*hermitian=*/true);
}

SparseOperator build_number_operator(const SectorBasis& basis) {
    std::vector<SparseOperator::Triplet> trips;
    trips.reserve(basis.size());
    for (std::size_t j = 0; j < basis.size(); ++j) {
        const auto c = basis.decode(j);
        if (c.n_photons > 0)
            trips.emplace_back(static_cast<int>(j), static_cast<int>(j),
                               cplx{static_cast<double>(c.n_photons), 0.0});
    }
    return SparseOperator(basis.size(), trips, /*hermitian=*/true);
}

SparseOperator build_position_density(const LatticeSpec& spec, const SectorBasis& basis,
                                      int x) {
    const int s = spec.site_index(x);
    std::vector<SparseOperator::Triplet> trips;
    for (std::size_t j = 0; j < basis.size(); ++j) {
        const auto c = basis.decode(j);
        int n = 0;
        for (int i = 0; i < c.n_photons; ++i)
            if (c.site[i] == s) ++n;
        if (n > 0)
            trips.emplace_back(static_cast<int>(j), static_cast<int>(j),
                               cplx{static_cast<double>(n), 0.0});
    }
    return SparseOperator(basis.size(), trips, /*hermitian=*/true);
}

// ---- expectations --------------------------------------------------------------

double norm_of(const StateVector& v) { return v.norm(); }

void normalize(StateVector& v) {
    const double n = v.norm();
    if (n < 1e-150) throw numeric_error("cannot normalize a (numerically) zero state");
    v /= n;
}

double photon_number_expectation(const SectorBasis& basis, const StateVector& v) {
    double acc = 0.0;
    for (std::size_t j = 0; j < basis.size(); ++j)
        acc += basis.decode(j).n_photons * std::norm(v[static_cast<Eigen::Index>(j)]);
    return acc / v.squaredNorm();
}

double qubit_expectation(const SectorBasis& basis, const StateVector& v) {
    double acc = 0.0;
    for (std::size_t j = 0; j < basis.size(); ++j)
        if (basis.decode(j).qubit) acc += std::norm(v[static_cast<Eigen::Index>(j)]);
    return acc / v.squaredNorm();
}

Eigen::VectorXd photon_density(const SectorBasis& basis, const StateVector& v) {
    Eigen::VectorXd dens = Eigen::VectorXd::Zero(basis.L());
    for (std::size_t j = 0; j < basis.size(); ++j) {
        const double w = std::norm(v[static_cast<Eigen::Index>(j)]);
        if (w == 0.0) continue;
        const auto c = basis.decode(j);
        for (int i = 0; i < c.n_photons; ++i) dens[c.site[i]] += w;
    }
    return dens / v.squaredNorm();
}

double density_centroid(const LatticeSpec& spec, const Eigen::VectorXd& density) {
    const double total = density.sum();
    if (total < 1e-150) throw numeric_error("density_centroid: empty density profile");
    double acc = 0.0;
    for (int s = 0; s < spec.L; ++s) acc += spec.site_coord(s) * density[s];
    return acc / total;
}

}  // namespace wqed::model
