#include "wqed/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "wqed/json_io.hpp"

namespace fs = std::filesystem;

namespace wqed::exp {

const char* version() { return "v0.1.0"; }

const char* command_name(Command c) {
    switch (c) {
        case Command::GroundState: return "groundstate";
        case Command::Commutator: return "commutator";
        case Command::Scatter: return "scatter";
        case Command::FluorescenceScan: return "fluorescence-scan";
        case Command::ClusterCheck: return "cluster-check";
        case Command::SMatrix: return "smatrix";
        case Command::DecayFit: return "decay-fit";
    }
    throw config_error("unknown command enum value");
}

Command command_from_name(const std::string& name) {
    for (Command c : {Command::GroundState, Command::Commutator, Command::Scatter,
                      Command::FluorescenceScan, Command::ClusterCheck, Command::SMatrix,
                      Command::DecayFit})
        if (name == command_name(c)) return c;
    throw config_error("field 'command': unknown command \"" + name + "\"");
}

void RunConfig::validate() const {
    const int set = (groundstate ? 1 : 0) + (commutator ? 1 : 0) + (scatter ? 1 : 0) +
                    (fluorescence ? 1 : 0) + (cluster ? 1 : 0) + (smatrix ? 1 : 0) +
                    (decay_fit ? 1 : 0);
    if (set != 1) throw config_error("run config: exactly one job payload required");
    const bool match = (command == Command::GroundState && groundstate) ||
                       (command == Command::Commutator && commutator) ||
                       (command == Command::Scatter && scatter) ||
                       (command == Command::FluorescenceScan && fluorescence) ||
                       (command == Command::ClusterCheck && cluster) ||
                       (command == Command::SMatrix && smatrix) ||
                       (command == Command::DecayFit && decay_fit);
    if (!match) throw config_error("run config: payload does not match command");
    if (threads < 1) throw config_error("run config: threads must be >= 1");
    if (format != "csv" && format != "json")
        throw config_error("run config: format must be csv or json");
}

namespace {

// ---- artifact helpers ------------------------------------------------------

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvFile {
  public:
    CsvFile(const fs::path& path, const std::string& header) : path_(path.string()) {
        out_.open(path);
        if (!out_) throw io_error("cannot open for writing: " + path_);
        out_ << header << "\n";
    }

    void row(std::initializer_list<double> vals) {
        bool first = true;
        for (double v : vals) {
            if (!first) out_ << ",";
            out_ << fmt(v);
            first = false;
        }
        out_ << "\n";
    }

    void raw_row(const std::string& line) { out_ << line << "\n"; }

    ~CsvFile() = default;

    void close() {
        out_.flush();
        if (!out_.good()) throw io_error("write failure on: " + path_);
        out_.close();
    }

  private:
    std::string path_;
    std::ofstream out_;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out << text;
    out.flush();
    if (!out.good()) throw io_error("write failure on: " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

std::string plot_preamble() {
    return "# gnuplot script; run from this directory:  gnuplot plots.gp\n"
           "set datafile separator \",\"\n"
           "set terminal pngcairo size 900,600\n"
           "set key off\n"
           "set grid\n";
}

// ---- command handlers ------------------------------------------------------

void run_groundstate(const GroundStateJob& job, const fs::path& dir) {
    job.lattice.validate();
    const auto basis = model::SectorBasis::build(job.lattice);
    const auto h = model::build_hamiltonian(job.lattice, basis);
    const auto gs = ground::ground_state(h, job.lanczos);
    const auto cloud = ground::cloud_profile(job.lattice, basis, gs.state);

    CsvFile csv(dir / "cloud.csv", "x [site],n_x [photons per site]");
    for (int s = 0; s < job.lattice.L; ++s)
        csv.row({static_cast<double>(job.lattice.site_coord(s)), cloud.site_density[s]});
    csv.close();

    const auto c_xy = ground::position_correlations(basis, gs.state);
    const auto c_kp = ground::momentum_correlations(job.lattice, c_xy);
    const auto bound = ground::correlator_bound_check(job.lattice, basis, gs.state, c_kp);
    const double margin =
        ground::variational_margin(job.lattice, basis, h, gs.state, gs.energy);

    write_json(dir / "report.json",
               {{"energy_units", "epsilon"},
                {"energy", gs.energy},
                {"residual", gs.residual},
                {"cycles", gs.cycles},
                {"qubit_occupation", cloud.qubit_occupation},
                {"total_photons", cloud.total_photons},
                {"peak_density", cloud.peak_density},
                {"tail_fit_ok", cloud.tail_fit_ok},
                {"correlation_length", cloud.correlation_length},
                {"tail_r2", cloud.tail_r2},
                {"correlator_bound",
                 {{"worst_violation", bound.worst_violation},
                  {"max_diag", bound.max_diag},
                  {"min_diag", bound.min_diag}}},
                {"variational_margin", margin}});

    write_text(dir / "plots.gp",
               plot_preamble() +
                   "set output \"cloud.png\"\n"
                   "set title \"photon cloud of the minimum-energy state\"\n"
                   "set xlabel \"x [site]\"\n"
                   "set ylabel \"n_x [photons per site]\"\n"
                   "set logscale y\n"
                   "plot \"cloud.csv\" skip 1 using 1:($2 > 0 ? $2 : NaN) "
                   "with linespoints pt 7 ps 0.5\n");
}

void run_commutator(const CommutatorJob& job, const fs::path& dir) {
    job.env1.validate();
    job.env2.validate();
    job.dispersion.validate();
    if (job.separations.empty())
        throw config_error("commutator: separations must be non-empty");

    const bool closed_form_ok =
        job.dispersion.kind == packet::Dispersion::Kind::Linear &&
        job.env1.kind == packet::EnvelopeKind::Gaussian &&
        job.env2.kind == packet::EnvelopeKind::Gaussian &&
        std::abs(job.env1.sigma - job.env2.sigma) < 1e-12;

    CsvFile csv(dir / "commutator.csv",
                "d [length],re [1],im [1],abs [1],bound [1]");
    for (double d : job.separations) {
        causality::SpacetimePair pair;
        pair.x1 = d;
        pair.t1 = job.t_offset;
        const auto res = causality::free_commutator(job.env1, job.env2, job.dispersion, pair);
        double bound = std::nan("");  // closed-form reference where defined
        if (closed_form_ok)
            bound = std::abs(
                causality::gaussian_linear_closed_form(job.env1, job.env2,
                                                       job.dispersion.c, pair));
        csv.row({d, res.value.real(), res.value.imag(), std::abs(res.value), bound});
    }
    csv.close();

    const auto scan = causality::commutator_scan(job.env1, job.env2, job.dispersion,
                                                 job.separations, job.t_offset);
    write_json(dir / "fit.json",
               {{"best", scan.fit.best == num::DecayModel::PowerLaw ? "power" : "exponential"},
                {"power_exponent", scan.fit.power_exponent},
                {"power_r2", scan.fit.power_r2},
                {"exp_rate", scan.fit.exp_rate},
                {"exp_r2", scan.fit.exp_r2},
                {"used_samples", scan.fit.used_samples}});

    write_text(dir / "plots.gp",
               plot_preamble() +
                   "set output \"commutator.png\"\n"
                   "set title \"free-field commutator vs separation\"\n"
                   "set xlabel \"d [length]\"\n"
                   "set ylabel \"|I| [1]\"\n"
                   "set logscale y\n"
                   "plot \"commutator.csv\" skip 1 using 1:4 with linespoints pt 7 ps 0.5, "
                   "\"commutator.csv\" skip 1 using 1:5 with lines dt 2\n");
}

void write_field_csv(const fs::path& path, const dynamics::TwoPhotonField& field) {
    CsvFile csv(path, "p1 [1/site],p2 [1/site],re [1],im [1]");
    const auto n = field.momenta.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            csv.row({field.momenta[i], field.momenta[j],
                     field.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                         .real(),
                     field.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                         .imag()});
    csv.close();
}

nlohmann::json diagnostics_json(const dynamics::Diagnostics& d) {
    return {{"energy_units", "epsilon"},
            {"times", d.times},
            {"n_fly", d.n_fly},
            {"n_total", d.n_total},
            {"norms", d.norms},
            {"energy", d.energy},
            {"flying_drift", d.flying_drift},
            {"total_drift", d.total_drift},
            {"norm_drift", d.norm_drift},
            {"energy_drift", d.energy_drift},
            {"ground_energy", d.ground_energy},
            {"boundary_density", d.boundary_density}};
}

void run_scatter(const ScatterJob& job, const fs::path& dir) {
    const auto res = dynamics::scatter_run(job.cfg);

    CsvFile density(dir / "density.csv", "x [site],n [photons per site]");
    for (int s = 0; s < job.cfg.lattice.L; ++s)
        density.row({static_cast<double>(job.cfg.lattice.site_coord(s)),
                     res.out_density[s]});
    density.close();

    std::string plots = plot_preamble() +
                        "set output \"density.png\"\n"
                        "set title \"output photon density\"\n"
                        "set xlabel \"x [site]\"\n"
                        "set ylabel \"n [photons per site]\"\n"
                        "plot \"density.csv\" skip 1 using 1:2 with lines\n";

    if (job.cfg.packets.size() == 2) {
        write_field_csv(dir / "field.csv", res.field);
        plots +=
            "\nset output \"field.png\"\n"
            "set title \"two-photon momentum field |phi(p1,p2)|\"\n"
            "set xlabel \"p1 [1/site]\"\n"
            "set ylabel \"p2 [1/site]\"\n"
            "unset logscale\n"
            "set view map\n"
            "splot \"field.csv\" skip 1 using 1:2:(sqrt($3**2 + $4**2)) with points "
            "pt 5 ps 0.4 palette\n";
    }
    write_json(dir / "diagnostics.json", diagnostics_json(res.diag));
    write_text(dir / "plots.gp", plots);
}

void run_fluorescence(const FluorescenceJob& job, const fs::path& dir) {
    const auto res = dynamics::fluorescence_scan(job.cfg);

    CsvFile csv(dir / "fluorescence.csv", "l [site],F [1]");
    for (std::size_t i = 0; i < res.separations.size(); ++i)
        csv.row({res.separations[i], res.values[i]});
    csv.close();

    write_json(dir / "scan.json", {{"l_c", res.l_c}});

    write_text(dir / "plots.gp",
               plot_preamble() +
                   "set output \"fluorescence.png\"\n"
                   "set title \"fluorescence vs packet separation\"\n"
                   "set xlabel \"l [site]\"\n"
                   "set ylabel \"F [1]\"\n"
                   "set arrow from " + fmt(res.l_c) +
                   ", graph 0 to " + fmt(res.l_c) +
                   ", graph 1 nohead dt 3\n"
                   "plot \"fluorescence.csv\" skip 1 using 1:2 with linespoints pt 7 ps 0.5\n");
}

void run_cluster(const ClusterJob& job, const fs::path& dir) {
    const auto res = dynamics::cluster_check(job.cfg);

    CsvFile csv(dir / "cluster.csv",
                "l [site],deviation [1],a12_re [1],a12_im [1],a1_re [1],a1_im [1],"
                "a2_re [1],a2_im [1]");
    for (const auto& p : res.points)
        csv.row({p.separation, p.deviation, p.a12.real(), p.a12.imag(), p.a1.real(),
                 p.a1.imag(), p.a2.real(), p.a2.imag()});
    csv.close();

    write_json(dir / "summary.json", {{"energy_units", "epsilon"},
                                      {"ground_energy", res.ground_energy}});

    write_text(dir / "plots.gp",
               plot_preamble() +
                   "set output \"cluster.png\"\n"
                   "set title \"two-photon vs product-of-singles deviation\"\n"
                   "set xlabel \"l [site]\"\n"
                   "set ylabel \"|A12 - A1 A2| / |A1 A2| [1]\"\n"
                   "set logscale y\n"
                   "plot \"cluster.csv\" skip 1 using 1:2 with linespoints pt 7 ps 0.5\n");
}

void run_smatrix(const SMatrixJob& job, const fs::path& dir) {
    if (job.k_grid.empty()) throw config_error("smatrix: k_grid must be non-empty");
    const auto t = smx::t_matrix(job.scatterer);
    const int m = t.channels;

    std::string header = "k [energy/c]";
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) {
            const std::string tag = "t_" + std::to_string(r) + std::to_string(c);
            header += "," + tag + "_re [1]," + tag + "_im [1]";
        }
    header += ",unitarity_defect [1]";
    CsvFile csv(dir / "tmatrix.csv", header);
    for (double k : job.k_grid) {
        const Eigen::MatrixXcd tk = t.at(cplx{k, 0.0});
        std::string line = fmt(k);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c)
                line += "," + fmt(tk(r, c).real()) + "," + fmt(tk(r, c).imag());
        line += "," + fmt(t.unitarity_defect(k));
        csv.raw_row(line);
    }
    csv.close();

    nlohmann::json poles = nlohmann::json::array();
    for (const auto& p : t.poles) {
        nlohmann::json res = nlohmann::json::array();
        for (int r = 0; r < m; ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c < m; ++c)
                row.push_back({p.residue(r, c).real(), p.residue(r, c).imag()});
            res.push_back(row);
        }
        poles.push_back({{"position", {p.position.real(), p.position.imag()}},
                         {"residue", res}});
    }
    write_json(dir / "poles.json", poles);

    write_text(dir / "plots.gp",
               plot_preamble() +
                   "set output \"tmatrix.png\"\n"
                   "set title \"transmission |t_{00}|^2\"\n"
                   "set xlabel \"k [energy/c]\"\n"
                   "set ylabel \"|t_00|^2 [1]\"\n"
                   "set yrange [0:1.05]\n"
                   "plot \"tmatrix.csv\" skip 1 using 1:($2**2 + $3**2) with lines\n");
}

smx::KernelC build_kernel_c(const std::vector<KernelPole>& entries) {
    smx::KernelC c;
    if (entries.empty()) return c;
    for (const auto& e : entries)
        if (std::abs(e.pole.imag()) < 1e-9)
            throw config_error("kernel_c: poles must sit off the real axis");
    c.eval = [entries](double, double, double s, cplx k) {
        cplx acc = 0.0;
        for (const auto& e : entries)
            acc += e.strength * (1.0 / (k - e.pole) + 1.0 / (s - k - e.pole));
        return acc;
    };
    c.poles = [entries](double s) {
        std::vector<cplx> out;
        for (const auto& e : entries) {
            out.push_back(e.pole);
            out.push_back(s - e.pole);
        }
        return out;
    };
    return c;
}

const char* mode_class_name(smx::ModeClass k) {
    switch (k) {
        case smx::ModeClass::Matched: return "matched";
        case smx::ModeClass::Cross: return "cross";
        case smx::ModeClass::Elastic: return "elastic";
        case smx::ModeClass::Unexplained: return "unexplained";
    }
    return "unexplained";
}

void run_decay_fit(const DecayFitJob& job, const fs::path& dir) {
    const auto t = smx::t_matrix(job.scatterer);
    const auto c = build_kernel_c(job.kernel_c);
    const auto res = smx::decay_rates(job.scatterer, t, c, job.in1, job.in2, job.scan);

    CsvFile weight(dir / "decay.csv", "l [length],F [1]");
    for (std::size_t i = 0; i < res.l.size(); ++i) weight.row({res.l[i], res.weight[i]});
    weight.close();

    CsvFile modes(dir / "modes.csv",
                  "raw_rate [1/length],rate [1/length],amp_re [1],amp_im [1],"
                  "class [text],matched_to [index]");
    for (const auto& mode : res.modes)
        modes.raw_row(fmt(mode.raw_rate) + "," + fmt(mode.rate) + "," +
                      fmt(mode.amplitude.real()) + "," + fmt(mode.amplitude.imag()) + "," +
                      mode_class_name(mode.kind) + "," + std::to_string(mode.matched_to));
    modes.close();

    write_json(dir / "report.json", {{"expected_rates", res.expected},
                                     {"matched_rates", res.matched},
                                     {"all_explained", res.all_explained}});

    write_text(dir / "plots.gp",
               plot_preamble() +
                   "set output \"decay.png\"\n"
                   "set title \"fluorescence-window weight vs separation\"\n"
                   "set xlabel \"l [length]\"\n"
                   "set ylabel \"F [1]\"\n"
                   "set logscale y\n"
                   "plot \"decay.csv\" skip 1 using 1:2 with linespoints pt 7 ps 0.5\n");
}

}  // namespace

void run(const RunConfig& cfg) {
    cfg.validate();

    const fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory " + dir.string() + ": " +
                           ec.message());

    write_text(dir / "manifest.json", jio::manifest_json(cfg));

    switch (cfg.command) {
        case Command::GroundState: run_groundstate(*cfg.groundstate, dir); break;
        case Command::Commutator: run_commutator(*cfg.commutator, dir); break;
        case Command::Scatter: run_scatter(*cfg.scatter, dir); break;
        case Command::FluorescenceScan: run_fluorescence(*cfg.fluorescence, dir); break;
        case Command::ClusterCheck: run_cluster(*cfg.cluster, dir); break;
        case Command::SMatrix: run_smatrix(*cfg.smatrix, dir); break;
        case Command::DecayFit: run_decay_fit(*cfg.decay_fit, dir); break;
    }
}

}  // namespace wqed::exp
