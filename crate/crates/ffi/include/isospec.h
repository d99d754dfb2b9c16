#ifndef ISOSPEC_H
#define ISOSPEC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum IsoStatus {
  ISO_STATUS_OK = 0,
  ISO_STATUS_NULL_POINTER = 1,
  ISO_STATUS_INVALID_ARGUMENT = 2,
  ISO_STATUS_DOMAIN = 3,
  ISO_STATUS_TRUST_VIOLATION = 4,
  ISO_STATUS_WINDOW_SUPPORT = 5,
  ISO_STATUS_NUMERICAL = 6,
  ISO_STATUS_PARSE = 7,
  ISO_STATUS_PANIC = 8,
} IsoStatus;

/**
 * Opaque spectrum handle.
 */
typedef struct IsoSpectrumTable IsoSpectrumTable;

/**
 * Opaque symbol handle.
 */
typedef struct IsoSymbol IsoSymbol;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next failing call.
 */
const char *iso_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *iso_version(void);

/**
 * Parses a symbol document (UTF-8 JSON).
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum IsoStatus iso_symbol_from_json(const char *json, struct IsoSymbol **out_symbol);

/**
 * # Safety
 * `symbol` must come from `iso_symbol_from_json` and not be freed twice. Null is ignored.
 */
void iso_symbol_free(struct IsoSymbol *symbol);

/**
 * # Safety
 * Pointers must be valid.
 */
enum IsoStatus iso_symbol_dimension(const struct IsoSymbol *symbol, size_t *out_d);

/**
 * Evaluates the symbol at stacked coordinates `(x_1..x_d, xi_1..xi_d)`; `len` must be `2d`.
 *
 * # Safety
 * `w` must point to `len` doubles.
 */
enum IsoStatus iso_symbol_evaluate(const struct IsoSymbol *symbol,
                                   const double *w,
                                   size_t len,
                                   double *out_value);

/**
 * Oscillator spectrum `j + d/2` with multiplicity `binomial(d + j - 1, j)` up to `lambda_max`.
 *
 * # Safety
 * `out_table` must be valid.
 */
enum IsoStatus iso_spectrum_oscillator(size_t d,
                                       double lambda_max,
                                       struct IsoSpectrumTable **out_table);

/**
 * Spectrum of `H0 + a sqrt(H0)`.
 *
 * # Safety
 * `out_table` must be valid.
 */
enum IsoStatus iso_spectrum_sqrt(size_t d,
                                 double a,
                                 double lambda_max,
                                 struct IsoSpectrumTable **out_table);

/**
 * Spectrum of the diagonal model with coefficients `c[0..d]`.
 *
 * # Safety
 * `c` must point to `d` doubles and `out_table` must be valid.
 */
enum IsoStatus iso_spectrum_diagonal(const double *c,
                                     size_t d,
                                     double lambda_max,
                                     struct IsoSpectrumTable **out_table);

/**
 * # Safety
 * `table` must come from an `iso_spectrum_*` constructor and not be freed twice. Null is ignored.
 */
void iso_spectrum_free(struct IsoSpectrumTable *table);

/**
 * Number of distinct eigenvalues.
 *
 * # Safety
 * Pointers must be valid.
 */
enum IsoStatus iso_spectrum_len(const struct IsoSpectrumTable *t, size_t *out_len);

/**
 * Eigenvalue and multiplicity at `index` (ascending order).
 *
 * # Safety
 * Pointers must be valid.
 */
enum IsoStatus iso_spectrum_get(const struct IsoSpectrumTable *t,
                                size_t index,
                                double *out_eigenvalue,
                                uint64_t *out_multiplicity);

/**
 * # Safety
 * Pointers must be valid.
 */
enum IsoStatus iso_spectrum_lambda_trust(const struct IsoSpectrumTable *t, double *out_trust);

/**
 * Eigenvalues `<= lambda` counted with multiplicity.
 *
 * # Safety
 * Pointers must be valid.
 */
enum IsoStatus iso_counting(const struct IsoSpectrumTable *t, double lambda, uint64_t *out_count);

/**
 * Counting function smoothed by a Gaussian of time width `sigma_t`, on `len` grid points.
 *
 * # Safety
 * `grid` and `out_values` must point to `len` doubles.
 */
enum IsoStatus iso_mollified_counting(const struct IsoSpectrumTable *t,
                                      double sigma_t,
                                      const double *grid,
                                      size_t len,
                                      double *out_values);

/**
 * Windowed trace near `2 pi n` with a Gaussian of width `sigma_t` centred there.
 *
 * # Safety
 * `grid`, `out_re` and `out_im` must point to `len` doubles.
 */
enum IsoStatus iso_trace_transform(const struct IsoSpectrumTable *t,
                                   int64_t n,
                                   double sigma_t,
                                   const double *grid,
                                   size_t len,
                                   double *out_re,
                                   double *out_im);

/**
 * `binomial(d + j - 1, j)`.
 *
 * # Safety
 * `out_value` must be valid.
 */
enum IsoStatus iso_multiplicity(int64_t j, int64_t d, uint64_t *out_value);

/**
 * Kernel of `e^{-i t H0}` at `x, y` in dimension `d`.
 *
 * # Safety
 * `x` and `y` must point to `d` doubles; the outputs must be valid.
 */
enum IsoStatus iso_mehler_kernel(double t,
                                 const double *x,
                                 const double *y,
                                 size_t d,
                                 double *out_re,
                                 double *out_im);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISOSPEC_H */
