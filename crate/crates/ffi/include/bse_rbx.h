#ifndef BSE_RBX_H
#define BSE_RBX_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Truncation variant of the auxiliary matrix.
typedef enum BseRbxVariant {
  BSE_RBX_VARIANT_EXACT = 0,
  BSE_RBX_VARIANT_TRUNCATE_ALL = 1,
  BSE_RBX_VARIANT_KEEP_WBAR = 2,
} BseRbxVariant;

// Result code of every fallible call.
typedef enum BseRbxStatus {
  BSE_RBX_STATUS_OK = 0,
  BSE_RBX_STATUS_NULL_POINTER = 1,
  BSE_RBX_STATUS_INVALID_UTF8 = 2,
  BSE_RBX_STATUS_INVALID_PARAMS = 3,
  BSE_RBX_STATUS_PARSE = 4,
  BSE_RBX_STATUS_VALIDATION = 5,
  BSE_RBX_STATUS_IO = 6,
  BSE_RBX_STATUS_NOT_PSD = 7,
  BSE_RBX_STATUS_NOT_PD = 8,
  BSE_RBX_STATUS_CONVERGENCE = 9,
  BSE_RBX_STATUS_GAP_NOT_POSITIVE = 10,
  BSE_RBX_STATUS_SINGULAR_CORE = 11,
  BSE_RBX_STATUS_DIMENSION_MISMATCH = 12,
  BSE_RBX_STATUS_SIZE_GUARD = 13,
  BSE_RBX_STATUS_COMPLEX_SPECTRUM = 14,
  BSE_RBX_STATUS_RANK_DEFICIENT_BASIS = 15,
  BSE_RBX_STATUS_BUFFER_TOO_SMALL = 16,
  BSE_RBX_STATUS_PANIC = 17,
  BSE_RBX_STATUS_OTHER = 18,
} BseRbxStatus;

// Per-index energy series of a result.
typedef enum BseRbxSeries {
  // Exact excitation energies.
  BSE_RBX_SERIES_OMEGA = 0,
  // Eigenvalues of the truncated auxiliary matrix.
  BSE_RBX_SERIES_LAMBDA = 1,
  // Reduced-basis energies.
  BSE_RBX_SERIES_GAMMA = 2,
  // Tamm-Dancoff energies.
  BSE_RBX_SERIES_MU = 3,
} BseRbxSeries;

// Opaque problem input.
typedef struct BseRbxInput BseRbxInput;

// Opaque outcome of [`bse_rbx_solve`].
typedef struct BseRbxResult BseRbxResult;

// Parameters of the seeded synthetic generator.
typedef struct BseRbxSynthParams {
  size_t n_basis;
  size_t n_occ;
  double gap;
  double decay_z;
  size_t n_terms;
  uint64_t seed;
  double tei_scale;
} BseRbxSynthParams;

// Knobs of a solve run.
typedef struct BseRbxConfig {
  double chol_tol;
  double eps_v;
  double eps_wbar;
  double eps_wtilde;
  enum BseRbxVariant variant;
  size_t m0;
  size_t dense_guard;
  bool iterative_aux;
} BseRbxConfig;

// Size of the perturbation between the exact and truncated matrices.
typedef struct BseRbxNorms {
  double frobenius;
  double spectral;
  double f1_frobenius;
  double relative;
} BseRbxNorms;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *bse_rbx_version(void);

// Message of the last failed call on this thread, or NULL if none.
// The pointer stays valid until the next failing call on the same thread.
const char *bse_rbx_last_error(void);

// Defaults of the synthetic generator.
struct BseRbxSynthParams bse_rbx_synth_params_default(void);

// Defaults of a solve run.
struct BseRbxConfig bse_rbx_config_default(void);

// Generates a synthetic input.
//
// # Safety
// `params` must point to a valid `BseRbxSynthParams` and `out` to writable
// storage for one pointer. On success `*out` receives a handle to be
// released with [`bse_rbx_input_free`].
enum BseRbxStatus bse_rbx_input_synth(const struct BseRbxSynthParams *params,
                                      struct BseRbxInput **out);

// Reads a problem bundle from `path`.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` writable storage
// for one pointer. On success `*out` receives a handle to be released with
// [`bse_rbx_input_free`].
enum BseRbxStatus bse_rbx_input_load(const char *path, struct BseRbxInput **out);

// Number of occupied-virtual pairs of an input, 0 for NULL.
//
// # Safety
// `input` must be NULL or a live handle from this library.
size_t bse_rbx_input_n_ov(const struct BseRbxInput *input);

// Releases an input handle. NULL is ignored.
//
// # Safety
// `input` must be NULL or a handle from this library not yet freed.
void bse_rbx_input_free(struct BseRbxInput *input);

// Runs the full pipeline on `input`. A NULL `config` uses the defaults.
//
// # Safety
// `input` must be a live input handle, `config` NULL or a valid
// `BseRbxConfig`, and `out` writable storage for one pointer. On success
// `*out` receives a handle to be released with [`bse_rbx_result_free`].
enum BseRbxStatus bse_rbx_solve(const struct BseRbxInput *input,
                                const struct BseRbxConfig *config,
                                struct BseRbxResult **out);

// Number of reported excitation indices (the effective `m0`), 0 for NULL.
//
// # Safety
// `result` must be NULL or a live handle from this library.
size_t bse_rbx_result_len(const struct BseRbxResult *result);

// Copies one energy series (hartree, ascending) into `buf`.
//
// # Safety
// `result` must be a live result handle and `buf` must point to at least
// `len` writable doubles. `len` must be at least [`bse_rbx_result_len`].
enum BseRbxStatus bse_rbx_result_energies(const struct BseRbxResult *result,
                                          enum BseRbxSeries series,
                                          double *buf,
                                          size_t len);

// Perturbation norms of a result.
//
// # Safety
// `result` must be a live result handle and `out` a writable
// `BseRbxNorms`.
enum BseRbxStatus bse_rbx_result_norms(const struct BseRbxResult *result, struct BseRbxNorms *out);

// Cholesky rank of the integrals behind a result, 0 for NULL.
//
// # Safety
// `result` must be NULL or a live handle from this library.
size_t bse_rbx_result_rank_b(const struct BseRbxResult *result);

// Releases a result handle. NULL is ignored.
//
// # Safety
// `result` must be NULL or a handle from this library not yet freed.
void bse_rbx_result_free(struct BseRbxResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BSE_RBX_H */
