#include "wqed/wavepacket.hpp"

#include <cmath>
#include <string>

namespace wqed::packet {

void Envelope::validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw config_error("envelope sigma must be positive");
    if (!std::isfinite(k_bar)) throw config_error("envelope k_bar must be finite");
}

cplx Envelope::value(double k) const {
    const double d = k - k_bar;
    switch (kind) {
        case EnvelopeKind::Gaussian:
            return std::pow(2.0 * pi, -0.25) / std::sqrt(sigma) *
                   std::exp(-d * d / (4.0 * sigma * sigma));
        case EnvelopeKind::Lorentzian:
            return std::sqrt(sigma / pi) / cplx{d, sigma};
    }
    throw std::invalid_argument("unknown envelope kind");
}

void Dispersion::validate() const {
    if (kind == Kind::Linear) {
        if (!(c > 0.0)) throw config_error("linear dispersion needs c > 0");
    } else {
        if (!(J > 0.0)) throw config_error("cosine dispersion needs J > 0");
        if (!std::isfinite(epsilon)) throw config_error("cosine dispersion epsilon");
    }
}

double Dispersion::omega(double k) const {
    return kind == Kind::Linear ? c * k : epsilon - 2.0 * J * std::cos(k);
}

double Dispersion::group_velocity(double k) const {
    return kind == Kind::Linear ? c : 2.0 * J * std::sin(k);
}

double Dispersion::max_speed() const { return kind == Kind::Linear ? c : 2.0 * J; }

void PacketSpec::validate() const {
    envelope().validate();
    if (!std::isfinite(x_bar) || !std::isfinite(t0))
        throw config_error("packet x_bar and t0 must be finite");
}

std::vector<cplx> creation_amplitudes(const model::LatticeSpec& spec, const PacketSpec& p) {
    p.validate();
    const Envelope env = p.envelope();
    std::vector<cplx> w(spec.L);
    const auto ks = spec.momentum_grid();
    for (int n = 0; n < spec.L; ++n) {
        const double k = ks[n];
        w[n] = env.value(k) * std::exp(iu * (-k * p.x_bar + spec.omega(k) * p.t0));
    }
    return w;
}

std::vector<cplx> position_amplitudes(const model::LatticeSpec& spec, const PacketSpec& p) {
    const auto w = creation_amplitudes(spec, p);
    const auto ks = spec.momentum_grid();
    std::vector<cplx> c(spec.L, cplx{0.0, 0.0});
    const double root_L = std::sqrt(static_cast<double>(spec.L));
    for (int s = 0; s < spec.L; ++s) {
        const double x = spec.site_coord(s);
        cplx acc{0.0, 0.0};
        for (int n = 0; n < spec.L; ++n) acc += w[n] * std::exp(iu * (ks[n] * x));
        c[s] = acc / root_L;
    }
    return c;
}

model::StateVector apply_packet_creation(const model::LatticeSpec& spec,
                                         const model::SectorBasis& basis,
                                         const PacketSpec& p,
                                         const model::StateVector& reference) {
    if (reference.size() != static_cast<Eigen::Index>(basis.size()))
        throw std::invalid_argument("apply_packet_creation: reference dimension mismatch");
    const auto amp = position_amplitudes(spec, p);

    // Target-side accumulation:  <target| psi^dag |ref> = sum over the photons
    // of the target configuration, each removed in turn.
    model::StateVector out = model::StateVector::Zero(reference.size());
    std::array<int, model::SectorBasis::kMaxPhotons> reduced{};
    for (std::size_t t = 0; t < basis.size(); ++t) {
        const auto c = basis.decode(t);
        if (c.n_photons == 0) continue;
        cplx acc{0.0, 0.0};
        for (int i = 0; i < c.n_photons; ++i) {
            if (i > 0 && c.site[i] == c.site[i - 1]) continue;  // distinct sites once
            int count = 0;
            for (int m = 0; m < c.n_photons; ++m)
                if (c.site[m] == c.site[i]) ++count;
            int n = 0;
            bool dropped = false;
            for (int m = 0; m < c.n_photons; ++m) {
                if (!dropped && c.site[m] == c.site[i]) {
                    dropped = true;
                    continue;
                }
                reduced[n++] = c.site[m];
            }
            const auto src = basis.find(c.qubit, std::span<const int>(reduced.data(), n));
            if (!src) continue;
            acc += std::sqrt(static_cast<double>(count)) * amp[c.site[i]] *
                   reference[static_cast<Eigen::Index>(*src)];
        }
        out[static_cast<Eigen::Index>(t)] = acc;
    }
    return out;
}

model::StateVector make_packet_state(const model::LatticeSpec& spec,
                                     const model::SectorBasis& basis,
                                     std::span<const PacketSpec> packets,
                                     const model::StateVector& reference,
                                     const PacketMargins& margins) {
    if (packets.empty()) throw std::invalid_argument("make_packet_state: no packets");
    for (const auto& p : packets) {
        p.validate();
        const double clearance_b = margins.boundary_sigmas / p.sigma;
        const double clearance_s = margins.scatterer_sigmas / p.sigma;
        if (spec.half() - std::abs(p.x_bar) < clearance_b - 1e-9)
            throw config_error("packet at x_bar = " + std::to_string(p.x_bar) +
                               " sits closer than " + std::to_string(clearance_b) +
                               " sites to the lattice boundary");
        if (std::abs(p.x_bar) < clearance_s - 1e-9 && margins.scatterer_sigmas > 0.0)
            throw config_error("packet at x_bar = " + std::to_string(p.x_bar) +
                               " sits closer than " + std::to_string(clearance_s) +
                               " sites to the scatterer");
    }
    model::StateVector state = reference;
    for (const auto& p : packets) state = apply_packet_creation(spec, basis, p, state);
    model::normalize(state);
    return state;
}

}  // namespace wqed::packet
