#ifndef NAPES_H
#define NAPES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum NapesStatus {
  NAPES_STATUS_OK = 0,
  NAPES_STATUS_NULL_POINTER = 1,
  NAPES_STATUS_INVALID_ARGUMENT = 2,
  NAPES_STATUS_SHAPE_MISMATCH = 3,
  NAPES_STATUS_SINGULAR_MATRIX = 4,
  NAPES_STATUS_NON_HERMITIAN = 5,
  NAPES_STATUS_DEGENERATE_DENOMINATOR = 6,
  NAPES_STATUS_ZERO_NOISE_WINDOW = 7,
  NAPES_STATUS_OUT_OF_RANGE = 8,
  NAPES_STATUS_ALL_POINTS_FAILED = 9,
  NAPES_STATUS_PANIC = 10,
} NapesStatus;

/**
 * Outcome of a gapped-record reconstruction.
 */
typedef struct NapesReconstruction NapesReconstruction;

/**
 * Grid points of a spectrum with their per-point outcome.
 */
typedef struct NapesSpectrum NapesSpectrum;

typedef struct NapesComplex {
  double re;
  double im;
} NapesComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * 1-D amplitude spectrum on the uniform grid `2πk/grid_size`.
 *
 * `x` may be null for plain APES. `filter_length = 0` selects `n/2`.
 * A non-positive `loading` disables diagonal loading.
 *
 * # Safety
 * `y` (and `x` when non-null) must point to `n` values; `out` must be a
 * valid pointer. On success `*out` owns a handle for `napes_spectrum_free`.
 */
enum NapesStatus napes_spectrum_1d(const struct NapesComplex *y,
                                   const struct NapesComplex *x,
                                   size_t n,
                                   size_t filter_length,
                                   size_t grid_size,
                                   double loading,
                                   struct NapesSpectrum **out);

/**
 * 2-D amplitude spectrum on the grid `(2πk/grid_size, 2πk'/grid_size_p)`,
 * points ordered with the second frequency varying fastest.
 *
 * # Safety
 * `y` (and `x` when non-null) must point to `rows * cols` row-major
 * values; `out` must be a valid pointer.
 */
enum NapesStatus napes_spectrum_2d(const struct NapesComplex *y,
                                   const struct NapesComplex *x,
                                   size_t rows,
                                   size_t cols,
                                   size_t filter_rows,
                                   size_t filter_cols,
                                   size_t grid_size,
                                   size_t grid_size_p,
                                   double loading,
                                   struct NapesSpectrum **out);

/**
 * Number of grid points; 0 for a null handle.
 *
 * # Safety
 * `spectrum` must be null or a live handle.
 */
size_t napes_spectrum_len(const struct NapesSpectrum *spectrum);

/**
 * Reads grid point `index`. Returns the point's own status: `Ok` with the
 * amplitude written to `alpha`, or the reason the estimate failed.
 * Any output pointer may be null.
 *
 * # Safety
 * `spectrum` must be a live handle; non-null outputs must be writable.
 */
enum NapesStatus napes_spectrum_point(const struct NapesSpectrum *spectrum,
                                      size_t index,
                                      double *omega,
                                      double *omega_p,
                                      struct NapesComplex *alpha);

/**
 * # Safety
 * `spectrum` must be null or a handle not yet freed.
 */
void napes_spectrum_free(struct NapesSpectrum *spectrum);

/**
 * Reconstructs the samples with `known[i] == 0` and estimates the spectrum.
 *
 * `m0 = 0` selects `n/2`; `filter_length = 0` reuses the initialization's
 * length. `y` values at unknown positions are ignored.
 *
 * # Safety
 * `y`, `x` and `known` must point to `n` values; `out` must be valid.
 */
enum NapesStatus napes_reconstruct(const struct NapesComplex *y,
                                   const struct NapesComplex *x,
                                   const uint8_t *known,
                                   size_t n,
                                   size_t m0,
                                   size_t filter_length,
                                   size_t grid_size,
                                   double delta,
                                   size_t max_iter,
                                   double loading,
                                   struct NapesReconstruction **out);

/**
 * Number of reconstructed samples; 0 for a null handle.
 *
 * # Safety
 * `rec` must be null or a live handle.
 */
size_t napes_reconstruction_missing_len(const struct NapesReconstruction *rec);

/**
 * Reads reconstructed sample `i`: its position in the record and value.
 *
 * # Safety
 * `rec` must be a live handle; non-null outputs must be writable.
 */
enum NapesStatus napes_reconstruction_missing(const struct NapesReconstruction *rec,
                                              size_t i,
                                              size_t *index,
                                              struct NapesComplex *value);

/**
 * Number of cycles run (length of the objective trace).
 *
 * # Safety
 * `rec` must be null or a live handle.
 */
size_t napes_reconstruction_iterations(const struct NapesReconstruction *rec);

/**
 * Objective value after cycle `cycle` (0-based).
 *
 * # Safety
 * `rec` must be a live handle and `value` writable.
 */
enum NapesStatus napes_reconstruction_objective(const struct NapesReconstruction *rec,
                                                size_t cycle,
                                                double *value);

/**
 * Whether the stopping tolerance was reached before the cycle limit.
 *
 * # Safety
 * `rec` must be null or a live handle.
 */
bool napes_reconstruction_converged(const struct NapesReconstruction *rec);

/**
 * Final spectrum, borrowed from `rec` and valid until `rec` is freed.
 *
 * # Safety
 * `rec` must be null or a live handle.
 */
const struct NapesSpectrum *napes_reconstruction_spectrum(const struct NapesReconstruction *rec);

/**
 * # Safety
 * `rec` must be null or a handle not yet freed.
 */
void napes_reconstruction_free(struct NapesReconstruction *rec);

/**
 * Static description of a status code; unknown codes get a generic text.
 */
const char *napes_status_message(int32_t status);

/**
 * Detail of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *napes_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NAPES_H */
