#include "wqed/wqed.h"

#include <cstring>
#include <memory>
#include <optional>
#include <string>

#include "wqed/causality.hpp"
#include "wqed/experiments.hpp"
#include "wqed/groundstate.hpp"
#include "wqed/json_io.hpp"
#include "wqed/smatrix.hpp"

using namespace wqed;

namespace {

thread_local std::string g_last_error;

// Runs the body and maps the exception taxonomy onto status codes.
template <typename Fn>
wqed_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return WQED_OK;
    } catch (const config_error& e) {
        g_last_error = e.what();
        return WQED_ERR_CONFIG;
    } catch (const io_error& e) {
        g_last_error = e.what();
        return WQED_ERR_IO;
    } catch (const numeric_error& e) {
        g_last_error = e.what();
        return WQED_ERR_NUMERIC;
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return WQED_ERR_CONFIG;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return WQED_ERR_NUMERIC;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return WQED_ERR_NUMERIC;
    }
}

packet::Envelope to_envelope(const wqed_envelope& e) {
    packet::Envelope out;
    switch (e.kind) {
        case 0: out.kind = packet::EnvelopeKind::Gaussian; break;
        case 1: out.kind = packet::EnvelopeKind::Lorentzian; break;
        default: throw config_error("envelope kind must be 0 (Gaussian) or 1 (Lorentzian)");
    }
    out.k_bar = e.k_bar;
    out.sigma = e.sigma;
    out.validate();
    return out;
}

}  // namespace

extern "C" {

struct wqed_model {
    model::LatticeSpec spec;
    model::SectorBasis basis;
    std::optional<ground::GroundStateResult> gs;
};

const char* wqed_version(void) { return exp::version(); }

const char* wqed_last_error(void) { return g_last_error.c_str(); }

wqed_status wqed_model_create(const wqed_model_params* params, wqed_model** out) {
    return guarded([&] {
        if (!params || !out) throw config_error("wqed_model_create: NULL argument");
        *out = nullptr;
        model::LatticeSpec spec;
        spec.L = params->L;
        spec.n_max = params->n_max;
        spec.epsilon = params->epsilon;
        spec.J = params->J;
        spec.Delta = params->Delta;
        spec.g = params->g;
        spec.rwa = params->rwa != 0;
        spec.validate();
        auto handle = std::make_unique<wqed_model>(
            wqed_model{spec, model::SectorBasis::build(spec), std::nullopt});
        *out = handle.release();
    });
}

void wqed_model_free(wqed_model* model) { delete model; }

wqed_status wqed_model_ground_state(wqed_model* model, uint64_t seed, double* energy_out,
                                    double* residual_out) {
    return guarded([&] {
        if (!model) throw config_error("wqed_model_ground_state: NULL model");
        const auto h = model::build_hamiltonian(model->spec, model->basis);
        ground::LanczosOptions opt;
        opt.seed = seed;
        model->gs = ground::ground_state(h, opt);
        if (energy_out) *energy_out = model->gs->energy;
        if (residual_out) *residual_out = model->gs->residual;
    });
}

wqed_status wqed_model_cloud_profile(wqed_model* model, double* density_out,
                                     double* qubit_occupation_out,
                                     double* total_photons_out) {
    return guarded([&] {
        if (!model) throw config_error("wqed_model_cloud_profile: NULL model");
        if (!model->gs)
            throw config_error("wqed_model_cloud_profile: compute the ground state first");
        const auto cloud =
            ground::cloud_profile(model->spec, model->basis, model->gs->state);
        if (density_out)
            std::memcpy(density_out, cloud.site_density.data(),
                        sizeof(double) * static_cast<std::size_t>(model->spec.L));
        if (qubit_occupation_out) *qubit_occupation_out = cloud.qubit_occupation;
        if (total_photons_out) *total_photons_out = cloud.total_photons;
    });
}

wqed_status wqed_envelope_value(const wqed_envelope* envelope, double k, double* re_out,
                                double* im_out) {
    return guarded([&] {
        if (!envelope) throw config_error("wqed_envelope_value: NULL envelope");
        const auto env = to_envelope(*envelope);
        const cplx v = env.value(k);
        if (re_out) *re_out = v.real();
        if (im_out) *im_out = v.imag();
    });
}

wqed_status wqed_free_commutator(const wqed_commutator_args* args, double* re_out,
                                 double* im_out, double* cone_distance_out) {
    return guarded([&] {
        if (!args) throw config_error("wqed_free_commutator: NULL arguments");
        const auto e1 = to_envelope(args->env1);
        const auto e2 = to_envelope(args->env2);
        packet::Dispersion disp;
        switch (args->dispersion) {
            case 0: disp.kind = packet::Dispersion::Kind::Linear; break;
            case 1: disp.kind = packet::Dispersion::Kind::Cosine; break;
            default: throw config_error("dispersion must be 0 (linear) or 1 (cosine)");
        }
        disp.c = args->c;
        disp.epsilon = args->epsilon;
        disp.J = args->J;
        disp.validate();
        causality::SpacetimePair pair{args->x1, args->t1, args->x2, args->t2};
        const auto res = causality::free_commutator(e1, e2, disp, pair);
        if (re_out) *re_out = res.value.real();
        if (im_out) *im_out = res.value.imag();
        if (cone_distance_out) *cone_distance_out = res.cone_dist;
    });
}

wqed_status wqed_tmatrix(int32_t channels, int32_t levels, const double* e_ground,
                         const double* e_excited, const double* coupling_re,
                         const double* coupling_im, double k, double* t_re, double* t_im,
                         double* defect_out) {
    return guarded([&] {
        if (channels < 1 || levels < 1)
            throw config_error("wqed_tmatrix: channels and levels must be >= 1");
        if (!e_ground || !e_excited || !coupling_re)
            throw config_error("wqed_tmatrix: NULL spec array");
        smx::ScattererSpec spec;
        spec.e_ground = Eigen::Map<const Eigen::VectorXd>(e_ground, channels);
        spec.e_excited = Eigen::Map<const Eigen::VectorXd>(e_excited, levels);
        spec.coupling.resize(levels, channels);
        for (int r = 0; r < levels; ++r)
            for (int c = 0; c < channels; ++c)
                spec.coupling(r, c) =
                    cplx{coupling_re[r * channels + c],
                         coupling_im ? coupling_im[r * channels + c] : 0.0};
        const auto t = smx::t_matrix(spec);
        const Eigen::MatrixXcd tk = t.at(cplx{k, 0.0});
        for (int r = 0; r < channels; ++r)
            for (int c = 0; c < channels; ++c) {
                if (t_re) t_re[r * channels + c] = tk(r, c).real();
                if (t_im) t_im[r * channels + c] = tk(r, c).imag();
            }
        if (defect_out) *defect_out = t.unitarity_defect(k);
    });
}

namespace {

wqed_status run_parsed(exp::RunConfig cfg, const char* out_dir, int64_t seed,
                       int32_t threads, const char* expect_command) {
    return guarded([&] {
        if (expect_command && std::string(expect_command) != exp::command_name(cfg.command))
            throw config_error(std::string("config command \"") +
                               exp::command_name(cfg.command) +
                               "\" does not match the invoked subcommand \"" +
                               expect_command + "\"");
        if (out_dir && *out_dir) cfg.out_dir = out_dir;
        if (seed >= 0) {
            cfg.seed = static_cast<std::uint64_t>(seed);
            if (cfg.groundstate) cfg.groundstate->lanczos.seed = cfg.seed;
            if (cfg.scatter) cfg.scatter->cfg.seed = cfg.seed;
            if (cfg.fluorescence) cfg.fluorescence->cfg.base.seed = cfg.seed;
            if (cfg.cluster) cfg.cluster->cfg.seed = cfg.seed;
        }
        if (threads >= 1) {
            cfg.threads = threads;
            if (cfg.fluorescence) cfg.fluorescence->cfg.threads = threads;
            if (cfg.cluster) cfg.cluster->cfg.threads = threads;
            if (cfg.decay_fit) cfg.decay_fit->scan.threads = threads;
        }
        exp::run(cfg);
    });
}

}  // namespace

wqed_status wqed_run_config(const char* json_text, const char* out_dir, int64_t seed,
                            int32_t threads, const char* expect_command) {
    if (!json_text) {
        g_last_error = "wqed_run_config: NULL config text";
        return WQED_ERR_CONFIG;
    }
    exp::RunConfig cfg;
    const wqed_status parse_status =
        guarded([&] { cfg = jio::parse_run_config(json_text); });
    if (parse_status != WQED_OK) return parse_status;
    return run_parsed(std::move(cfg), out_dir, seed, threads, expect_command);
}

wqed_status wqed_run_config_file(const char* path, const char* out_dir, int64_t seed,
                                 int32_t threads, const char* expect_command) {
    if (!path) {
        g_last_error = "wqed_run_config_file: NULL path";
        return WQED_ERR_CONFIG;
    }
    exp::RunConfig cfg;
    const wqed_status parse_status =
        guarded([&] { cfg = jio::load_run_config(path); });
    if (parse_status != WQED_OK) return parse_status;
    return run_parsed(std::move(cfg), out_dir, seed, threads, expect_command);
}

}  // extern "C"
