#ifndef MRC_FFI_H
#define MRC_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Values accepted by the `scheme` arguments.
 */
typedef enum MrcScheme {
  MRC_SCHEME_EULER_CORRECTED = 0,
  MRC_SCHEME_SECOND_ORDER_DIRECT = 1,
} MrcScheme;

typedef enum MrcStatus {
  MRC_STATUS_OK = 0,
  MRC_STATUS_NULL_POINTER = 1,
  MRC_STATUS_INVALID_ARGUMENT = 2,
  MRC_STATUS_DOMAIN_ERROR = 3,
  MRC_STATUS_IO_ERROR = 4,
  MRC_STATUS_PANIC = 5,
} MrcStatus;

/*
 Opaque MRC parameter set.
 */
typedef struct MrcModel MrcModel;

/*
 Opaque memoizing moment table. Not safe for concurrent use.
 */
typedef struct MrcMomentTable MrcMomentTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Builds parameters from `x`, `c` (`d × d`) and `kappa`, `a` (length `d`).

 # Safety
 Pointers must reference arrays of the stated sizes; `out` must be writable.
 */
enum MrcStatus mrc_params_new(uintptr_t d,
                              const double *x,
                              const double *kappa,
                              const double *c,
                              const double *a,
                              struct MrcModel **out);

/*
 Benchmark parameters: `κ = 1.25`, `c = I`, `a = 1`, off-diagonal `x = 0.7`.

 # Safety
 `out` must be writable.
 */
enum MrcStatus mrc_params_reference(uintptr_t d, struct MrcModel **out);

/*
 # Safety
 `p` must come from `mrc_params_new`/`mrc_params_reference` (or be null).
 */
void mrc_params_free(struct MrcModel *p);

/*
 Dimension, or 0 for a null handle.

 # Safety
 `p` must be a live handle or null.
 */
uintptr_t mrc_params_dim(const struct MrcModel *p);

/*
 `E[X_t^m]` for a monomial string such as `"1-2^2*2-3"` (1-based pairs).

 # Safety
 `p` live, `mono` a NUL-terminated string, `out` writable.
 */
enum MrcStatus mrc_moment(const struct MrcModel *p, const char *mono, double t, double *out);

/*
 Ergodic moment `lim_{t→∞} E[X_t^m]`.

 # Safety
 As for `mrc_moment`.
 */
enum MrcStatus mrc_ergodic_moment(const struct MrcModel *p, const char *mono, double *out);

/*
 # Safety
 `p` live, `out` writable.
 */
enum MrcStatus mrc_moment_table_new(const struct MrcModel *p, struct MrcMomentTable **out);

/*
 Memoized `E[X_t^m]`.

 # Safety
 `table` live and not used concurrently, `mono` NUL-terminated, `out` writable.
 */
enum MrcStatus mrc_moment_table_eval(struct MrcMomentTable *table,
                                     const char *mono,
                                     double t,
                                     double *out);

/*
 # Safety
 `t` must come from `mrc_moment_table_new` (or be null).
 */
void mrc_moment_table_free(struct MrcMomentTable *t);

/*
 Closed-form correlation swap `E[(1/T) ∫ (C_t)_ij dt]`.

 # Safety
 `p` live, `out` writable.
 */
enum MrcStatus mrc_corr_swap_closed(const struct MrcModel *p,
                                    uintptr_t i,
                                    uintptr_t j,
                                    double t,
                                    double *out);

/*
 Monte Carlo estimate of `E[(X_T)_ij]` with its 95% half-width.

 # Safety
 `p` live, out-pointers writable.
 */
enum MrcStatus mrc_simulate_pair_mean(const struct MrcModel *p,
                                      int scheme_code,
                                      uintptr_t i,
                                      uintptr_t j,
                                      double horizon,
                                      uintptr_t steps,
                                      uint64_t n_paths,
                                      uint64_t seed,
                                      double *out_mean,
                                      double *out_ci);

/*
 One scheme step of size `h` applied in place to the row-major `state`, with
 the random stream of path `index` under `seed`.

 # Safety
 `p` live, `state` holds `d × d` writable values.
 */
enum MrcStatus mrc_step(const struct MrcModel *p,
                        int scheme_code,
                        double h,
                        double *state,
                        uint64_t seed,
                        uint64_t index);

/*
 Black-Scholes implied volatility of a call price.

 # Safety
 `out` writable.
 */
enum MrcStatus mrc_implied_vol(double price,
                               double spot,
                               double strike,
                               double r,
                               double t,
                               double *out);

/*
 Copies the last error message of this thread (NUL-terminated, truncated to
 `len`) into `buf` and returns its full length in bytes without the NUL.
 Pass a null `buf` to query the length.

 # Safety
 `buf` must have room for `len` bytes, or be null.
 */
uintptr_t mrc_last_error_message(char *buf, uintptr_t len);

/*
 Library version as a static NUL-terminated string.
 */
const char *mrc_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MRC_FFI_H */
