#ifndef ESS_H
#define ESS_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum EssStatus {
  ESS_STATUS_OK = 0,
  ESS_STATUS_NULL_POINTER = 1,
  ESS_STATUS_CONFIG = 2,
  ESS_STATUS_DATA = 3,
  ESS_STATUS_NUMERIC = 4,
  ESS_STATUS_IO = 5,
  ESS_STATUS_BUFFER_TOO_SMALL = 6,
  ESS_STATUS_INVALID_STATE = 7,
  ESS_STATUS_PANIC = 8,
} EssStatus;

typedef enum EssPrior {
  ESS_PRIOR_G_PRIOR = 0,
  ESS_PRIOR_INDEPENDENT = 1,
} EssPrior;

typedef enum EssTau {
  /*
   τ held at `tau_param`.
   */
  ESS_TAU_FIXED = 0,
  /*
   Zellner–Siow, a_τ = 1/2, b_τ = n/2; `tau_param` is ignored.
   */
  ESS_TAU_ZELLNER_SIOW = 1,
  /*
   Hyper-g with c_τ = `tau_param`.
   */
  ESS_TAU_HYPER_G = 2,
} EssTau;

typedef enum EssWeighting {
  ESS_WEIGHTING_PER_SWEEP = 0,
  ESS_WEIGHTING_DISTINCT = 1,
} EssWeighting;

/*
 Opaque run configuration.
 */
typedef struct EssConfig EssConfig;

/*
 Opaque response vector and design matrix.
 */
typedef struct EssDataset EssDataset;

/*
 Opaque finished run.
 */
typedef struct EssOutput EssOutput;

/*
 Opaque sampler. Owns the prepared data it reads from.
 */
typedef struct EssSampler EssSampler;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failure on this thread, or NULL. Valid until the next
 failing call on the same thread.
 */
const char *ess_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *ess_version(void);

/*
 Copy `y` (length n) and column-major `x` (n × p) into a new dataset.

 # Safety
 `y` must point to `n` doubles, `x` to `n * p` doubles, `out` to writable storage.
 */
enum EssStatus ess_dataset_new(const double *y,
                               const double *x,
                               uintptr_t n,
                               uintptr_t p,
                               struct EssDataset **out);

/*
 Load a dataset from response and design CSV files.

 # Safety
 Paths must be NUL-terminated UTF-8; `out` must be writable.
 */
enum EssStatus ess_dataset_load_csv(const char *y_path,
                                    const char *x_path,
                                    struct EssDataset **out);

/*
 # Safety
 `ds` must be NULL or a pointer from `ess_dataset_new`/`ess_dataset_load_csv`.
 */
void ess_dataset_free(struct EssDataset *ds);

/*
 # Safety
 `ds` must be a valid dataset handle or NULL.
 */
uintptr_t ess_dataset_n(const struct EssDataset *ds);

/*
 # Safety
 `ds` must be a valid dataset handle or NULL.
 */
uintptr_t ess_dataset_p(const struct EssDataset *ds);

/*
 New configuration: g-prior, Zellner–Siow τ, E(p_γ)=5 with binomial
 variance, a_σ = 1e-6, b_σ = 1e-3, 5 chains.
 */
struct EssConfig *ess_config_new(uintptr_t sweeps, uintptr_t burn_in, uint64_t seed);

/*
 # Safety
 `cfg` must be NULL or a pointer from `ess_config_new`.
 */
void ess_config_free(struct EssConfig *cfg);

/*
 # Safety
 `cfg` must be a valid configuration handle.
 */
enum EssStatus ess_config_set_prior(struct EssConfig *cfg,
                                    enum EssPrior prior,
                                    enum EssTau tau,
                                    double tau_param);

/*
 Prior mean and variance of the model size. A NaN variance selects the
 binomial variance.

 # Safety
 `cfg` must be a valid configuration handle.
 */
enum EssStatus ess_config_set_model_size(struct EssConfig *cfg, double e_pgamma, double v_pgamma);

/*
 # Safety
 `cfg` must be a valid configuration handle.
 */
enum EssStatus ess_config_set_sigma(struct EssConfig *cfg, double a_sigma, double b_sigma);

/*
 # Safety
 `cfg` must be a valid configuration handle.
 */
enum EssStatus ess_config_set_chains(struct EssConfig *cfg, uintptr_t chains, bool parallel);

/*
 Center (and, for the independent prior, standardize) a copy of the data
 and initialise a sampler on it.

 # Safety
 Handles must be valid; `out` must be writable.
 */
enum EssStatus ess_sampler_new(const struct EssConfig *cfg,
                               const struct EssDataset *ds,
                               struct EssSampler **out);

/*
 Rebuild a sampler from a checkpoint file written for the same dataset.

 # Safety
 `path` must be NUL-terminated UTF-8; handles must be valid; `out` writable.
 */
enum EssStatus ess_sampler_resume(const char *path,
                                  const struct EssDataset *ds,
                                  struct EssSampler **out);

/*
 # Safety
 `s` must be NULL or a sampler handle.
 */
void ess_sampler_free(struct EssSampler *s);

/*
 Advance until `sweep` sweeps have completed (capped at the configured total).

 # Safety
 `s` must be a valid sampler handle.
 */
enum EssStatus ess_sampler_run_to(struct EssSampler *s, uintptr_t sweep);

/*
 Number of completed sweeps, or `SIZE_MAX` for an invalid handle.

 # Safety
 `s` must be a valid sampler handle or NULL.
 */
uintptr_t ess_sampler_next_sweep(struct EssSampler *s);

/*
 # Safety
 `s` must be a valid sampler handle; `path` NUL-terminated UTF-8.
 */
enum EssStatus ess_sampler_checkpoint(struct EssSampler *s, const char *path);

/*
 Run any remaining sweeps and hand back the output. The sampler handle
 stays allocated but can no longer be advanced.

 # Safety
 `s` must be a valid sampler handle; `out` writable.
 */
enum EssStatus ess_sampler_finish(struct EssSampler *s, struct EssOutput **out);

/*
 # Safety
 `o` must be NULL or an output handle.
 */
void ess_output_free(struct EssOutput *o);

/*
 Marginal inclusion probabilities into `buf` (length ≥ p).

 # Safety
 `o` must be a valid output handle; `buf` must hold `len` doubles.
 */
enum EssStatus ess_output_inclusion(const struct EssOutput *o,
                                    enum EssWeighting w,
                                    double *buf,
                                    uintptr_t len);

/*
 Posterior of the model size into `buf` (length ≥ p + 1).

 # Safety
 `o` must be a valid output handle; `buf` must hold `len` doubles.
 */
enum EssStatus ess_output_model_size(const struct EssOutput *o,
                                     enum EssWeighting w,
                                     double *buf,
                                     uintptr_t len);

/*
 Highest-posterior visited model: 0-based indices into `idx`, its size into
 `size`, and its R² into `r2`. With a too-small buffer `size` is still set.

 # Safety
 `o` must be valid; `idx` must hold `cap` entries; `size` and `r2` writable.
 */
enum EssStatus ess_output_best_model(const struct EssOutput *o,
                                     uintptr_t *idx,
                                     uintptr_t cap,
                                     uintptr_t *size,
                                     double *r2);

/*
 Post-burn-in DR-exchange acceptance rate (NaN for a null handle).

 # Safety
 `o` must be a valid output handle or NULL.
 */
double ess_output_exchange_acceptance(const struct EssOutput *o);

/*
 Number of recorded post-burn-in sweeps.

 # Safety
 `o` must be a valid output handle or NULL.
 */
uintptr_t ess_output_len(const struct EssOutput *o);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ESS_H */
