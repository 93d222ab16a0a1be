/* wqed.h -- C interface to the waveguide-QED scattering library.
 *
 * All functions return wqed_status; 0 is success.  Nonzero values match the
 * CLI exit codes: 2 invalid configuration, 3 numerical failure, 4 I/O
 * failure.  On failure wqed_last_error() returns a thread-local message
 * describing what went wrong.  Handles are opaque and single-owner; every
 * *_create has a matching *_free (free functions accept NULL).
 */

#ifndef WQED_H
#define WQED_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum wqed_status {
    WQED_OK = 0,
    WQED_ERR_CONFIG = 2,
    WQED_ERR_NUMERIC = 3,
    WQED_ERR_IO = 4,
} wqed_status;

/* Library version tag, e.g. "v0.1.0". */
const char* wqed_version(void);

/* Message of the most recent failing call on this thread ("" if none). */
const char* wqed_last_error(void);

/* ---- truncated lattice model ------------------------------------------- */

typedef struct wqed_model wqed_model;

typedef struct wqed_model_params {
    int32_t L;       /* odd site count */
    int32_t n_max;   /* excitation cap */
    double epsilon;  /* photon on-site energy */
    double J;        /* hopping amplitude */
    double Delta;    /* qubit splitting */
    double g;        /* qubit-photon coupling at site 0 */
    int32_t rwa;     /* nonzero: drop counter-rotating terms */
} wqed_model_params;

wqed_status wqed_model_create(const wqed_model_params* params, wqed_model** out);
void wqed_model_free(wqed_model* model);

/* Computes and caches the minimum-energy state.  Outputs may be NULL. */
wqed_status wqed_model_ground_state(wqed_model* model, uint64_t seed, double* energy_out,
                                    double* residual_out);

/* Per-site photon density of the cached ground state; density_out must hold
 * L doubles (site order, coordinate -(L-1)/2 .. (L-1)/2).  Requires a prior
 * successful wqed_model_ground_state call on this handle. */
wqed_status wqed_model_cloud_profile(wqed_model* model, double* density_out,
                                     double* qubit_occupation_out,
                                     double* total_photons_out);

/* ---- free-field machinery ------------------------------------------------ */

typedef struct wqed_envelope {
    int32_t kind; /* 0 Gaussian, 1 Lorentzian */
    double k_bar;
    double sigma;
} wqed_envelope;

/* Momentum-space envelope value phi(k). */
wqed_status wqed_envelope_value(const wqed_envelope* envelope, double k, double* re_out,
                                double* im_out);

typedef struct wqed_commutator_args {
    wqed_envelope env1;
    wqed_envelope env2;
    int32_t dispersion; /* 0 linear, 1 cosine band */
    double c;           /* linear speed */
    double epsilon;     /* cosine band center */
    double J;           /* cosine band hopping */
    double x1, t1, x2, t2;
} wqed_commutator_args;

/* Free-field commutator overlap I for two packet operators. */
wqed_status wqed_free_commutator(const wqed_commutator_args* args, double* re_out,
                                 double* im_out, double* cone_distance_out);

/* ---- analytic transmission matrix --------------------------------------- */

/* Evaluates the single-photon transmission matrix t(k) of a chiral point
 * scatterer with `channels` ground channels and `levels` excited levels.
 *
 *   e_ground:   channels values
 *   e_excited:  levels values
 *   coupling_re/im: levels*channels row-major
 *   t_re/t_im:  channels*channels row-major outputs (may be NULL)
 *   defect_out: column-unitarity defect at k (may be NULL)
 */
wqed_status wqed_tmatrix(int32_t channels, int32_t levels, const double* e_ground,
                         const double* e_excited, const double* coupling_re,
                         const double* coupling_im, double k, double* t_re, double* t_im,
                         double* defect_out);

/* ---- experiment runner ----------------------------------------------------- */

/* Runs a full experiment from config JSON text; artifacts are written to the
 * config's output directory.  Optional overrides (matching the CLI flags):
 *   out_dir: non-NULL, non-empty replaces the config's "out";
 *   seed:    >= 0 replaces the config's "seed";
 *   threads: >= 1 replaces the config's "threads";
 *   expect_command: non-NULL must equal the config's "command".
 */
wqed_status wqed_run_config(const char* json_text, const char* out_dir, int64_t seed,
                            int32_t threads, const char* expect_command);

/* Same, reading the JSON from a file. */
wqed_status wqed_run_config_file(const char* path, const char* out_dir, int64_t seed,
                                 int32_t threads, const char* expect_command);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* WQED_H */
