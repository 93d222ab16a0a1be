// lattice.hpp -- spin-boson chain realization of a waveguide coupled to a
// point scatterer: excitation-truncated sector basis and sparse operators.
//
//   H = Delta s+s-  +  epsilon sum_x a_x^dag a_x  -  J sum_x (a_x^dag a_{x+1} + h.c.)
//       + g (s- + s+)(a_0 + a_0^dag)              [full Rabi coupling]
//       + g (s+ a_0 + s- a_0^dag)                 [RWA variant]
//
// Open chain, sites x = -(L-1)/2 .. (L-1)/2, scatterer pinned at x = 0.
// Cosine band omega_k = epsilon - 2 J cos k, group velocity 2 J sin k.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wqed/types.hpp"

namespace wqed::model {

using StateVector = Eigen::VectorXcd;

// ---- lattice parameters ----------------------------------------------------

struct LatticeSpec {
    int L = 401;            // odd number of sites
    double epsilon = 1.0;   // photon on-site energy
    double J = 1.0 / pi;    // hopping amplitude
    double Delta = 1.0;     // qubit splitting
    double g = 0.0;         // qubit-photon coupling at site 0
    bool rwa = false;       // keep only excitation-conserving coupling terms
    int n_max = 3;          // cap on qubit + photon excitations

    void validate() const;  // throws config_error on bad combinations

    int half() const { return (L - 1) / 2; }
    int site_index(int x) const;  // coordinate -> 0-based index, range-checked
    int site_coord(int s) const { return s - half(); }

    double omega(double k) const { return epsilon - 2.0 * J * std::cos(k); }
    double group_velocity(double k) const { return 2.0 * J * std::sin(k); }
    double max_speed() const { return 2.0 * J; }

    // FFT grid k_n = 2 pi n / L, n = -(L-1)/2 .. (L-1)/2 (ascending).
    std::vector<double> momentum_grid() const;
};

// ---- sector basis -----------------------------------------------------------

// All Fock configurations (qubit bit, photon multiset) with at most n_max total
// excitations, ordered lexicographically by (qubit bit, site occupations).
// Configurations pack into one 64-bit key, so L <= 1023 and n_max <= 5.
class SectorBasis {
  public:
    static constexpr int kMaxPhotons = 5;
    static constexpr std::size_t kDefaultMaxStates = 80'000'000;

    struct Config {
        bool qubit = false;
        int n_photons = 0;
        std::array<std::uint16_t, kMaxPhotons> site{};  // ascending 0-based indices
    };

    static SectorBasis build(const LatticeSpec& spec,
                             std::size_t max_states = kDefaultMaxStates);

    // Closed-form state count for the cap check (stars and bars per sector).
    static std::size_t count_states(int L, int n_max);

    std::size_t size() const { return keys_.size(); }
    int L() const { return L_; }
    int n_max() const { return n_max_; }

    Config decode(std::size_t idx) const;
    int total_excitations(std::size_t idx) const;

    // Index lookup by configuration; empty if outside the sector.
    std::optional<std::size_t> find(bool qubit, std::span<const int> sites_ascending) const;
    std::optional<std::size_t> find_key(std::uint64_t key) const;
    std::uint64_t key(std::size_t idx) const { return keys_[idx]; }

    static std::uint64_t encode(int L, bool qubit, std::span<const int> sites_ascending);

  private:
    std::vector<std::uint64_t> keys_;  // sorted ascending == lexicographic order
    int L_ = 0;
    int n_max_ = 0;
};

// ---- sparse operators --------------------------------------------------------

class SparseOperator {
  public:
    using Triplet = Eigen::Triplet<cplx>;

    // Duplicate triplets are summed; exact zeros pruned.  When flagged
    // Hermitian the constructor verifies max|A - A^H| < 1e-12.
    SparseOperator(std::size_t dim, const std::vector<Triplet>& entries, bool hermitian);

    std::size_t dim() const { return static_cast<std::size_t>(mat_.rows()); }
    std::size_t nonzeros() const { return static_cast<std::size_t>(mat_.nonZeros()); }
    bool hermitian_flagged() const { return hermitian_; }
    double hermiticity_defect() const;  // max element of |A - A^H|

    StateVector apply(const StateVector& v) const;
    Eigen::MatrixXcd to_dense() const;  // refuses dim > 8192

    const Eigen::SparseMatrix<cplx, Eigen::RowMajor>& matrix() const { return mat_; }

  private:
    Eigen::SparseMatrix<cplx, Eigen::RowMajor> mat_;
    bool hermitian_ = false;
};

SparseOperator build_hamiltonian(const LatticeSpec& spec, const SectorBasis& basis);
SparseOperator build_number_operator(const SectorBasis& basis);  // total photons
SparseOperator build_position_density(const LatticeSpec& spec, const SectorBasis& basis,
                                      int x);  // a_x^dag a_x

// ---- cheap diagonal expectations ---------------------------------------------

double norm_of(const StateVector& v);
void normalize(StateVector& v);  // throws numeric_error on zero norm

double photon_number_expectation(const SectorBasis& basis, const StateVector& v);
double qubit_expectation(const SectorBasis& basis, const StateVector& v);

// Per-site photon density <a_x^dag a_x>, indexed by site (0-based).
Eigen::VectorXd photon_density(const SectorBasis& basis, const StateVector& v);

// Density centroid in lattice coordinates.
double density_centroid(const LatticeSpec& spec, const Eigen::VectorXd& density);

}  // namespace wqed::model
