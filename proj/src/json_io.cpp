#include "wqed/json_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace wqed::jio {

namespace {

using nlohmann::json;

// ---- strict object cursor ---------------------------------------------------

// Tracks which keys were consumed; anything left over is an unknown field and
// is rejected by name.
class Obj {
  public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object())
            throw config_error("field '" + path_ + "': expected an object");
    }

    std::string child(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    bool has(const char* key) const { return j_.contains(key); }

    const json& require(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key))
            throw config_error("missing field '" + child(key) + "'");
        return j_.at(key);
    }

    const json* optional(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key)) return nullptr;
        return &j_.at(key);
    }

    void done() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw config_error("unknown field '" + child(it.key()) + "'");
    }

  private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw config_error("field '" + path + "': expected a number");
    return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer())
        throw config_error("field '" + path + "': expected an integer");
    return v.get<int>();
}

std::uint64_t as_u64(const json& v, const std::string& path) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw config_error("field '" + path + "': expected a non-negative integer");
    return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) throw config_error("field '" + path + "': expected a boolean");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw config_error("field '" + path + "': expected a string");
    return v.get<std::string>();
}

cplx as_complex(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2)
        throw config_error("field '" + path + "': expected [re, im]");
    return {as_number(v[0], path + "[0]"), as_number(v[1], path + "[1]")};
}

void read_num(Obj& o, const char* key, double& slot) {
    if (const json* v = o.optional(key)) slot = as_number(*v, o.child(key));
}

void read_int(Obj& o, const char* key, int& slot) {
    if (const json* v = o.optional(key)) slot = as_int(*v, o.child(key));
}

void read_bool(Obj& o, const char* key, bool& slot) {
    if (const json* v = o.optional(key)) slot = as_bool(*v, o.child(key));
}

// Grid fields accept either an explicit array of numbers or {min, max, count}.
std::vector<double> parse_grid(const json& v, const std::string& path) {
    if (v.is_array()) {
        if (v.empty()) throw config_error("field '" + path + "': grid must be non-empty");
        std::vector<double> out;
        out.reserve(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }
    if (v.is_object()) {
        Obj o(v, path);
        const double lo = as_number(o.require("min"), o.child("min"));
        const double hi = as_number(o.require("max"), o.child("max"));
        const int n = as_int(o.require("count"), o.child("count"));
        o.done();
        if (n < 1) throw config_error("field '" + path + ".count': must be >= 1");
        if (n == 1) return {lo};
        std::vector<double> out(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
        return out;
    }
    throw config_error("field '" + path + "': expected an array or {min, max, count}");
}

// ---- leaf schemas ----------------------------------------------------------

packet::EnvelopeKind parse_envelope_kind(const json& v, const std::string& path) {
    const std::string s = as_string(v, path);
    if (s == "gaussian") return packet::EnvelopeKind::Gaussian;
    if (s == "lorentzian") return packet::EnvelopeKind::Lorentzian;
    throw config_error("field '" + path + "': expected \"gaussian\" or \"lorentzian\"");
}

packet::Envelope parse_envelope(const json& j, const std::string& path) {
    Obj o(j, path);
    packet::Envelope e;
    if (const json* v = o.optional("kind")) e.kind = parse_envelope_kind(*v, o.child("kind"));
    read_num(o, "k_bar", e.k_bar);
    read_num(o, "sigma", e.sigma);
    o.done();
    return e;
}

packet::PacketSpec parse_packet(const json& j, const std::string& path) {
    Obj o(j, path);
    packet::PacketSpec p;
    if (const json* v = o.optional("kind")) p.kind = parse_envelope_kind(*v, o.child("kind"));
    read_num(o, "k_bar", p.k_bar);
    read_num(o, "sigma", p.sigma);
    read_num(o, "x_bar", p.x_bar);
    read_num(o, "t0", p.t0);
    o.done();
    return p;
}

packet::Dispersion parse_dispersion(const json& j, const std::string& path) {
    Obj o(j, path);
    packet::Dispersion d;
    if (const json* v = o.optional("kind")) {
        const std::string s = as_string(*v, o.child("kind"));
        if (s == "linear")
            d.kind = packet::Dispersion::Kind::Linear;
        else if (s == "cosine")
            d.kind = packet::Dispersion::Kind::Cosine;
        else
            throw config_error("field '" + o.child("kind") +
                               "': expected \"linear\" or \"cosine\"");
    }
    read_num(o, "c", d.c);
    read_num(o, "epsilon", d.epsilon);
    read_num(o, "J", d.J);
    o.done();
    return d;
}

model::LatticeSpec parse_lattice(const json& j, const std::string& path) {
    Obj o(j, path);
    model::LatticeSpec spec;
    read_int(o, "L", spec.L);
    read_num(o, "epsilon", spec.epsilon);
    read_num(o, "J", spec.J);
    read_num(o, "Delta", spec.Delta);
    read_num(o, "g", spec.g);
    read_bool(o, "rwa", spec.rwa);
    read_int(o, "n_max", spec.n_max);
    o.done();
    return spec;
}

dynamics::EvolutionPlan parse_plan(const json& j, const std::string& path) {
    Obj o(j, path);
    dynamics::EvolutionPlan p;
    p.t_final = as_number(o.require("t_final"), o.child("t_final"));
    read_num(o, "dt_report", p.dt_report);
    if (const json* v = o.optional("method")) {
        const std::string s = as_string(*v, o.child("method"));
        if (s == "chebyshev")
            p.method = dynamics::PropagatorKind::Chebyshev;
        else if (s == "krylov")
            p.method = dynamics::PropagatorKind::Krylov;
        else
            throw config_error("field '" + o.child("method") +
                               "': expected \"chebyshev\" or \"krylov\"");
    }
    read_num(o, "tol", p.tol);
    o.done();
    return p;
}

packet::PacketMargins parse_margins(const json& j, const std::string& path) {
    Obj o(j, path);
    packet::PacketMargins m;
    read_num(o, "boundary_sigmas", m.boundary_sigmas);
    read_num(o, "scatterer_sigmas", m.scatterer_sigmas);
    o.done();
    return m;
}

smx::ScattererSpec parse_scatterer(const json& j, const std::string& path) {
    Obj o(j, path);
    const int m = as_int(o.require("M"), o.child("M"));
    const int mp = as_int(o.require("M_prime"), o.child("M_prime"));
    if (m < 1) throw config_error("field '" + o.child("M") + "': must be >= 1");
    if (mp < 1) throw config_error("field '" + o.child("M_prime") + "': must be >= 1");

    smx::ScattererSpec spec;
    const json& e = o.require("E");
    if (!e.is_array() || static_cast<int>(e.size()) != m)
        throw config_error("field '" + o.child("E") + "': expected an array of length M");
    spec.e_ground.resize(m);
    for (int i = 0; i < m; ++i)
        spec.e_ground[i] = as_number(e[static_cast<std::size_t>(i)],
                                     o.child("E") + "[" + std::to_string(i) + "]");

    const json& et = o.require("E_tilde");
    if (!et.is_array() || static_cast<int>(et.size()) != mp)
        throw config_error("field '" + o.child("E_tilde") +
                           "': expected an array of length M_prime");
    spec.e_excited.resize(mp);
    for (int i = 0; i < mp; ++i)
        spec.e_excited[i] = as_number(et[static_cast<std::size_t>(i)],
                                      o.child("E_tilde") + "[" + std::to_string(i) + "]");

    const json& g = o.require("g");
    if (!g.is_array() || static_cast<int>(g.size()) != mp)
        throw config_error("field '" + o.child("g") +
                           "': expected M_prime rows of M couplings");
    spec.coupling.resize(mp, m);
    for (int r = 0; r < mp; ++r) {
        const json& row = g[static_cast<std::size_t>(r)];
        const std::string rp = o.child("g") + "[" + std::to_string(r) + "]";
        if (!row.is_array() || static_cast<int>(row.size()) != m)
            throw config_error("field '" + rp + "': expected M couplings");
        for (int cidx = 0; cidx < m; ++cidx) {
            const json& cell = row[static_cast<std::size_t>(cidx)];
            const std::string cp = rp + "[" + std::to_string(cidx) + "]";
            if (cell.is_array())
                spec.coupling(r, cidx) = as_complex(cell, cp);
            else
                spec.coupling(r, cidx) = as_number(cell, cp);
        }
    }
    o.done();
    spec.validate();
    return spec;
}

// ---- job schemas -------------------------------------------------------------

exp::GroundStateJob parse_groundstate(const json& j, const std::string& path) {
    Obj o(j, path);
    exp::GroundStateJob job;
    job.lattice = parse_lattice(o.require("lattice"), o.child("lattice"));
    if (const json* v = o.optional("lanczos")) {
        Obj lo(*v, o.child("lanczos"));
        read_int(lo, "block_size", job.lanczos.block_size);
        read_int(lo, "max_cycles", job.lanczos.max_cycles);
        read_num(lo, "tol", job.lanczos.tol);
        lo.done();
    }
    o.done();
    return job;
}

exp::CommutatorJob parse_commutator(const json& j, const std::string& path) {
    Obj o(j, path);
    exp::CommutatorJob job;
    job.env1 = parse_envelope(o.require("envelope1"), o.child("envelope1"));
    job.env2 = parse_envelope(o.require("envelope2"), o.child("envelope2"));
    if (const json* v = o.optional("dispersion"))
        job.dispersion = parse_dispersion(*v, o.child("dispersion"));
    job.separations = parse_grid(o.require("separations"), o.child("separations"));
    read_num(o, "t_offset", job.t_offset);
    o.done();
    return job;
}

dynamics::ScatterConfig parse_scatter_core(Obj& o) {
    dynamics::ScatterConfig cfg;
    cfg.lattice = parse_lattice(o.require("lattice"), o.child("lattice"));
    const json& packets = o.require("packets");
    if (!packets.is_array() || packets.empty() || packets.size() > 2)
        throw config_error("field '" + o.child("packets") +
                           "': expected an array of one or two packets");
    for (std::size_t i = 0; i < packets.size(); ++i)
        cfg.packets.push_back(parse_packet(
            packets[i], o.child("packets") + "[" + std::to_string(i) + "]"));
    cfg.plan = parse_plan(o.require("plan"), o.child("plan"));
    if (const json* v = o.optional("margins"))
        cfg.margins = parse_margins(*v, o.child("margins"));
    return cfg;
}

exp::ScatterJob parse_scatter(const json& j, const std::string& path) {
    Obj o(j, path);
    exp::ScatterJob job;
    job.cfg = parse_scatter_core(o);
    o.done();
    return job;
}

exp::FluorescenceJob parse_fluorescence(const json& j, const std::string& path) {
    Obj o(j, path);
    exp::FluorescenceJob job;
    {
        Obj bo(o.require("base"), o.child("base"));
        job.cfg.base = parse_scatter_core(bo);
        bo.done();
    }
    job.cfg.separations = parse_grid(o.require("separations"), o.child("separations"));
    if (const json* v = o.optional("window")) {
        Obj wo(*v, o.child("window"));
        read_num(wo, "omega_bar", job.cfg.window.omega_bar);
        read_num(wo, "sigma_omega", job.cfg.window.sigma_omega);
        read_num(wo, "shell_factor", job.cfg.window.shell_factor);
        read_num(wo, "exclusion_factor", job.cfg.window.exclusion_factor);
        wo.done();
    }
    o.done();
    return job;
}

exp::ClusterJob parse_cluster(const json& j, const std::string& path) {
    Obj o(j, path);
    exp::ClusterJob job;
    job.cfg.lattice = parse_lattice(o.require("lattice"), o.child("lattice"));
    job.cfg.in1 = parse_packet(o.require("in1"), o.child("in1"));
    job.cfg.in2_base = parse_packet(o.require("in2"), o.child("in2"));
    job.cfg.separations = parse_grid(o.require("separations"), o.child("separations"));
    job.cfg.plan = parse_plan(o.require("plan"), o.child("plan"));
    if (const json* v = o.optional("margins"))
        job.cfg.margins = parse_margins(*v, o.child("margins"));
    o.done();
    return job;
}

exp::SMatrixJob parse_smatrix(const json& j, const std::string& path) {
    Obj o(j, path);
    exp::SMatrixJob job;
    job.scatterer = parse_scatterer(o.require("scatterer"), o.child("scatterer"));
    job.k_grid = parse_grid(o.require("k_grid"), o.child("k_grid"));
    o.done();
    return job;
}

exp::DecayFitJob parse_decay_fit(const json& j, const std::string& path) {
    Obj o(j, path);
    exp::DecayFitJob job;
    job.scatterer = parse_scatterer(o.require("scatterer"), o.child("scatterer"));
    job.in1 = parse_envelope(o.require("envelope1"), o.child("envelope1"));
    job.in2 = parse_envelope(o.require("envelope2"), o.child("envelope2"));
    job.scan.l_grid = parse_grid(o.require("separations"), o.child("separations"));
    if (const json* v = o.optional("scan")) {
        Obj so(*v, o.child("scan"));
        read_num(so, "shell_halfwidth", job.scan.shell_halfwidth);
        read_num(so, "exclusion", job.scan.exclusion);
        read_num(so, "box_halfwidth", job.scan.box_halfwidth);
        read_int(so, "grid_n", job.scan.grid_n);
        read_int(so, "max_modes", job.scan.max_modes);
        read_num(so, "amp_floor", job.scan.amp_floor);
        read_num(so, "match_tol", job.scan.match_tol);
        read_int(so, "mu", job.scan.mu);
        read_int(so, "nu", job.scan.nu);
        so.done();
    }
    if (const json* v = o.optional("kernel_c")) {
        const std::string kp = o.child("kernel_c");
        if (!v->is_array())
            throw config_error("field '" + kp + "': expected an array of pole entries");
        for (std::size_t i = 0; i < v->size(); ++i) {
            const std::string ep = kp + "[" + std::to_string(i) + "]";
            Obj po((*v)[i], ep);
            exp::KernelPole kpole;
            kpole.pole = as_complex(po.require("pole"), po.child("pole"));
            kpole.strength = as_complex(po.require("strength"), po.child("strength"));
            po.done();
            job.kernel_c.push_back(kpole);
        }
    }
    o.done();
    return job;
}

// ---- manifest serialization -----------------------------------------------

json grid_json(const std::vector<double>& g) { return json(g); }

json envelope_json(const packet::Envelope& e) {
    return {{"kind", e.kind == packet::EnvelopeKind::Gaussian ? "gaussian" : "lorentzian"},
            {"k_bar", e.k_bar},
            {"sigma", e.sigma}};
}

json packet_json(const packet::PacketSpec& p) {
    return {{"kind", p.kind == packet::EnvelopeKind::Gaussian ? "gaussian" : "lorentzian"},
            {"k_bar", p.k_bar},
            {"sigma", p.sigma},
            {"x_bar", p.x_bar},
            {"t0", p.t0}};
}

json lattice_json(const model::LatticeSpec& s) {
    return {{"L", s.L},          {"epsilon", s.epsilon}, {"J", s.J},
            {"Delta", s.Delta},  {"g", s.g},             {"rwa", s.rwa},
            {"n_max", s.n_max}};
}

json plan_json(const dynamics::EvolutionPlan& p) {
    return {{"t_final", p.t_final},
            {"dt_report", p.dt_report},
            {"method",
             p.method == dynamics::PropagatorKind::Chebyshev ? "chebyshev" : "krylov"},
            {"tol", p.tol}};
}

json margins_json(const packet::PacketMargins& m) {
    return {{"boundary_sigmas", m.boundary_sigmas},
            {"scatterer_sigmas", m.scatterer_sigmas}};
}

json scatterer_json(const smx::ScattererSpec& s) {
    json eg = json::array();
    for (int i = 0; i < s.channels(); ++i) eg.push_back(s.e_ground[i]);
    json et = json::array();
    for (int i = 0; i < s.levels(); ++i) et.push_back(s.e_excited[i]);
    json g = json::array();
    for (int r = 0; r < s.levels(); ++r) {
        json row = json::array();
        for (int c = 0; c < s.channels(); ++c)
            row.push_back(json::array({s.coupling(r, c).real(), s.coupling(r, c).imag()}));
        g.push_back(row);
    }
    return {{"M", s.channels()}, {"M_prime", s.levels()}, {"E", eg}, {"E_tilde", et},
            {"g", g}};
}

json scatter_core_json(const dynamics::ScatterConfig& cfg) {
    json packets = json::array();
    for (const auto& p : cfg.packets) packets.push_back(packet_json(p));
    return {{"lattice", lattice_json(cfg.lattice)},
            {"packets", packets},
            {"plan", plan_json(cfg.plan)},
            {"margins", margins_json(cfg.margins)}};
}

json job_json(const exp::RunConfig& cfg) {
    switch (cfg.command) {
        case exp::Command::GroundState: {
            const auto& j = *cfg.groundstate;
            return {{"lattice", lattice_json(j.lattice)},
                    {"lanczos",
                     {{"block_size", j.lanczos.block_size},
                      {"max_cycles", j.lanczos.max_cycles},
                      {"tol", j.lanczos.tol}}}};
        }
        case exp::Command::Commutator: {
            const auto& j = *cfg.commutator;
            const char* dk =
                j.dispersion.kind == packet::Dispersion::Kind::Linear ? "linear" : "cosine";
            return {{"envelope1", envelope_json(j.env1)},
                    {"envelope2", envelope_json(j.env2)},
                    {"dispersion",
                     {{"kind", dk}, {"c", j.dispersion.c}, {"epsilon", j.dispersion.epsilon},
                      {"J", j.dispersion.J}}},
                    {"separations", grid_json(j.separations)},
                    {"t_offset", j.t_offset}};
        }
        case exp::Command::Scatter:
            return scatter_core_json(cfg.scatter->cfg);
        case exp::Command::FluorescenceScan: {
            const auto& j = *cfg.fluorescence;
            return {{"base", scatter_core_json(j.cfg.base)},
                    {"separations", grid_json(j.cfg.separations)},
                    {"window",
                     {{"omega_bar", j.cfg.window.omega_bar},
                      {"sigma_omega", j.cfg.window.sigma_omega},
                      {"shell_factor", j.cfg.window.shell_factor},
                      {"exclusion_factor", j.cfg.window.exclusion_factor}}}};
        }
        case exp::Command::ClusterCheck: {
            const auto& j = *cfg.cluster;
            return {{"lattice", lattice_json(j.cfg.lattice)},
                    {"in1", packet_json(j.cfg.in1)},
                    {"in2", packet_json(j.cfg.in2_base)},
                    {"separations", grid_json(j.cfg.separations)},
                    {"plan", plan_json(j.cfg.plan)},
                    {"margins", margins_json(j.cfg.margins)}};
        }
        case exp::Command::SMatrix: {
            const auto& j = *cfg.smatrix;
            return {{"scatterer", scatterer_json(j.scatterer)},
                    {"k_grid", grid_json(j.k_grid)}};
        }
        case exp::Command::DecayFit: {
            const auto& j = *cfg.decay_fit;
            json kc = json::array();
            for (const auto& k : j.kernel_c)
                kc.push_back({{"pole", {k.pole.real(), k.pole.imag()}},
                              {"strength", {k.strength.real(), k.strength.imag()}}});
            return {{"scatterer", scatterer_json(j.scatterer)},
                    {"envelope1", envelope_json(j.in1)},
                    {"envelope2", envelope_json(j.in2)},
                    {"separations", grid_json(j.scan.l_grid)},
                    {"scan",
                     {{"shell_halfwidth", j.scan.shell_halfwidth},
                      {"exclusion", j.scan.exclusion},
                      {"box_halfwidth", j.scan.box_halfwidth},
                      {"grid_n", j.scan.grid_n},
                      {"max_modes", j.scan.max_modes},
                      {"amp_floor", j.scan.amp_floor},
                      {"match_tol", j.scan.match_tol},
                      {"mu", j.scan.mu},
                      {"nu", j.scan.nu}}},
                    {"kernel_c", kc}};
        }
    }
    throw config_error("manifest: unknown command");
}

}  // namespace

exp::RunConfig parse_run_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("malformed JSON: ") + e.what());
    }

    Obj o(j, "");
    exp::RunConfig cfg;
    cfg.command = exp::command_from_name(as_string(o.require("command"), "command"));
    if (const json* v = o.optional("seed")) cfg.seed = as_u64(*v, "seed");
    if (const json* v = o.optional("threads")) {
        cfg.threads = as_int(*v, "threads");
        if (cfg.threads < 1) throw config_error("field 'threads': must be >= 1");
    }
    if (const json* v = o.optional("format")) {
        cfg.format = as_string(*v, "format");
        if (cfg.format != "csv" && cfg.format != "json")
            throw config_error("field 'format': expected \"csv\" or \"json\"");
    }
    if (const json* v = o.optional("out")) cfg.out_dir = as_string(*v, "out");

    const char* key = exp::command_name(cfg.command);
    const json& payload = o.require(key);
    switch (cfg.command) {
        case exp::Command::GroundState:
            cfg.groundstate = parse_groundstate(payload, key);
            cfg.groundstate->lanczos.seed = cfg.seed;
            break;
        case exp::Command::Commutator:
            cfg.commutator = parse_commutator(payload, key);
            break;
        case exp::Command::Scatter:
            cfg.scatter = parse_scatter(payload, key);
            cfg.scatter->cfg.seed = cfg.seed;
            break;
        case exp::Command::FluorescenceScan:
            cfg.fluorescence = parse_fluorescence(payload, key);
            cfg.fluorescence->cfg.base.seed = cfg.seed;
            cfg.fluorescence->cfg.threads = cfg.threads;
            break;
        case exp::Command::ClusterCheck:
            cfg.cluster = parse_cluster(payload, key);
            cfg.cluster->cfg.seed = cfg.seed;
            cfg.cluster->cfg.threads = cfg.threads;
            break;
        case exp::Command::SMatrix:
            cfg.smatrix = parse_smatrix(payload, key);
            break;
        case exp::Command::DecayFit:
            cfg.decay_fit = parse_decay_fit(payload, key);
            cfg.decay_fit->scan.threads = cfg.threads;
            break;
    }
    o.done();
    cfg.validate();
    return cfg;
}

exp::RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw io_error("read failure on config file: " + path);
    return parse_run_config(buf.str());
}

std::string manifest_json(const exp::RunConfig& cfg) {
    cfg.validate();
    json top = {{"version", exp::version()},
                {"command", exp::command_name(cfg.command)},
                {"seed", cfg.seed},
                {"threads", cfg.threads},
                {"format", cfg.format},
                {"out", cfg.out_dir}};
    top[exp::command_name(cfg.command)] = job_json(cfg);
    return top.dump(2) + "\n";
}

}  // namespace wqed::jio
