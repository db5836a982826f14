#ifndef MIMO_CROSSING_H
#define MIMO_CROSSING_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define MCX_OK 0

#define MCX_ERR_NULL 1

#define MCX_ERR_UTF8 2

#define MCX_ERR_CONFIG 3

#define MCX_ERR_INVALID 4

#define MCX_ERR_NUMERICAL 5

#define MCX_ERR_HYPOTHESIS 6

#define MCX_ERR_RANGE 7

#define MCX_ERR_PANIC 8

#define MCX_FORMAT_CSV 0

#define MCX_FORMAT_JSON 1

/**
 * Input distribution, possibly conditioned on a discrete variable.
 */
typedef struct McxInput McxInput;

/**
 * Result of running a scenario: named artifacts plus a violation flag.
 */
typedef struct McxOutcome McxOutcome;

/**
 * Diagonal channel path `t ↦ H(t)`.
 */
typedef struct McxPath McxPath;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *mcx_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mcx_version(void);

/**
 * Parses a mixture document (`{"dim", "components"}`) or a conditional one
 * (`{"u": [{"q", "input"}]}`).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
int32_t mcx_input_from_json(const char *json, McxInput **out);

/**
 * Equiprobable `±1` per coordinate, independent across `dim` coordinates.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
int32_t mcx_input_bpsk(size_t dim, McxInput **out);

/**
 * # Safety
 * `input` must be null or a handle from this library that was not freed yet.
 */
void mcx_input_free(McxInput *input);

/**
 * # Safety
 * `input` must be a live handle.
 */
size_t mcx_input_dim(const McxInput *input);

/**
 * Writes the overall covariance, row-major, into `out` (`dim²` entries).
 *
 * # Safety
 * `input` must be a live handle and `out` must hold `dim²` doubles.
 */
int32_t mcx_input_covariance(const McxInput *input, double *out, size_t len);

/**
 * Scalar path `H(t) = √t·I` for `t ∈ [0, snr_max]`.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
int32_t mcx_path_snr(size_t dim, double snr_max, McxPath **out);

/**
 * Path from a document `{"dim", "snr_max"}` or `{"dim", "anchors": [{"t", "gains"}]}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
int32_t mcx_path_from_json(const char *json, McxPath **out);

/**
 * # Safety
 * `path` must be null or a handle from this library that was not freed yet.
 */
void mcx_path_free(McxPath *path);

/**
 * Diagonal gains of `H(t)`.
 *
 * # Safety
 * `path` must be a live handle and `out` must hold `len ≥ dim` doubles.
 */
int32_t mcx_path_gains(const McxPath *path, double t, double *out, size_t len);

/**
 * Monte-Carlo MMSE matrix of the input behind the diagonal channel `gains`.
 * Values and standard errors are written row-major (`dim²` each).
 *
 * # Safety
 * `gains` must hold `dim` doubles, `values` and `errs` `dim²` each.
 */
int32_t mcx_mmse_matrix(const McxInput *input,
                        const double *gains,
                        uint64_t samples,
                        uint64_t seed,
                        double *values,
                        double *errs);

/**
 * `Q(t) = E_G(t) − E(t)` against a Gaussian reference with covariance
 * `gauss_cov` (row-major, `dim²`). Outputs are row-major.
 *
 * # Safety
 * Pointers must reference buffers of the sizes given above.
 */
int32_t mcx_q_matrix(const McxInput *input,
                     const double *gauss_cov,
                     const McxPath *path,
                     double t,
                     uint64_t samples,
                     uint64_t seed,
                     double *values,
                     double *errs);

/**
 * Mutual information (nats) at the end of the path, computed twice:
 * directly and by integrating the MMSE along the path. Any of the output
 * pointers may be null.
 *
 * # Safety
 * `input` and `path` must be live handles; non-null outputs must be writable.
 */
int32_t mcx_mutual_information(const McxInput *input,
                               const McxPath *path,
                               double t_end,
                               uint64_t samples,
                               uint64_t seed,
                               double *direct,
                               double *direct_err,
                               double *integral,
                               double *integral_err);

/**
 * Runs a scenario document. `base_dir` (may be null) resolves a relative
 * `input_file`. `format` is `MCX_FORMAT_CSV` or `MCX_FORMAT_JSON`.
 *
 * # Safety
 * `config` must be a NUL-terminated string, `base_dir` null or one, and
 * `out` a writable pointer.
 */
int32_t mcx_scenario_run(const char *config,
                         const char *base_dir,
                         int32_t format,
                         McxOutcome **out);

/**
 * # Safety
 * `outcome` must be null or a handle from this library that was not freed yet.
 */
void mcx_outcome_free(McxOutcome *outcome);

/**
 * # Safety
 * `outcome` must be a live handle.
 */
size_t mcx_outcome_artifact_count(const McxOutcome *outcome);

/**
 * Artifact file name, or null when `index` is out of range. Owned by the outcome.
 *
 * # Safety
 * `outcome` must be a live handle.
 */
const char *mcx_outcome_artifact_name(const McxOutcome *outcome, size_t index);

/**
 * Artifact body, or null when `index` is out of range. Owned by the outcome.
 *
 * # Safety
 * `outcome` must be a live handle.
 */
const char *mcx_outcome_artifact_contents(const McxOutcome *outcome, size_t index);

/**
 * `1` when a checked property failed, `0` otherwise.
 *
 * # Safety
 * `outcome` must be a live handle.
 */
int32_t mcx_outcome_violation(const McxOutcome *outcome);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIMO_CROSSING_H */
