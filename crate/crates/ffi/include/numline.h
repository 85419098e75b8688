#ifndef NUMLINE_H
#define NUMLINE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum NumlineStatus {
  NUMLINE_STATUS_OK = 0,
  NUMLINE_STATUS_NULL_POINTER = 1,
  NUMLINE_STATUS_OUT_OF_RANGE = 2,
  NUMLINE_STATUS_OVERFLOW = 3,
  NUMLINE_STATUS_INVALID_PARAM = 4,
  NUMLINE_STATUS_INVALID_INPUT = 5,
  NUMLINE_STATUS_EMPTY_INPUT = 6,
  NUMLINE_STATUS_INDEX_OUT_OF_RANGE = 7,
  NUMLINE_STATUS_LENGTH_MISMATCH = 8,
  NUMLINE_STATUS_SHAPE_MISMATCH = 9,
  NUMLINE_STATUS_INVALID_UTF8 = 10,
  NUMLINE_STATUS_JSON = 11,
  NUMLINE_STATUS_INTERNAL = 12,
} NumlineStatus;

typedef enum NumlineScheme {
  NUMLINE_SCHEME_DIGITS = 0,
  NUMLINE_SCHEME_SCIENTIFIC = 1,
  NUMLINE_SCHEME_NUMBERT = 2,
  NUMLINE_SCHEME_NUMBERT_LEAD_SPLIT = 3,
  NUMLINE_SCHEME_SUBWORD = 4,
} NumlineScheme;

// Opaque DExp parameter set.
typedef struct NumlineDExp NumlineDExp;

// Opaque equal-frequency binning.
typedef struct NumlineFreqBins NumlineFreqBins;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// Valid until the next call into the library from the same thread.
const char *numline_last_error(void);

// Releases a string returned by the library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void numline_string_free(char *s);

// # Safety
// Out-pointers must be valid for writes.
enum NumlineStatus numline_decompose(double value, uint32_t *exponent, double *mantissa);

// # Safety
// `value` must be valid for writes.
enum NumlineStatus numline_recompose(uint32_t exponent, double mantissa, double *value);

// # Safety
// `hit` must be valid for writes.
enum NumlineStatus numline_e_acc(double pred, double truth, bool *hit);

// # Safety
// `preds` and `truths` must point to `n` values; `result` must be valid
// for writes.
enum NumlineStatus numline_log_mae(const double *preds,
                                   const double *truths,
                                   uintptr_t n,
                                   double *result);

// # Safety
// `result` must be valid for writes.
enum NumlineStatus numline_wilson_halfwidth(double a, uintptr_t n, double z, double *result);

// Renders `value` under the [`NumlineScheme`] code `scheme` as space-separated tokens, padding
// included. Free the result with [`numline_string_free`].
//
// # Safety
// `tokens` must be valid for writes.
enum NumlineStatus numline_render(double value, uint32_t scheme, char **tokens);

// Parses space-separated tokens. Missing trailing padding is filled in.
// Sequences that are not a canonical rendering yield `InvalidInput`.
//
// # Safety
// `tokens` must be a NUL-terminated string; `value` must be valid for
// writes.
enum NumlineStatus numline_parse(const char *tokens, uint32_t scheme, double *value);

// Builds a DExp head from 17 logits, 17 log-space means and `log_sigma`.
//
// # Safety
// `logits` and `mu` must point to `n` values; `handle` must be valid for
// writes.
enum NumlineStatus numline_dexp_new(const double *logits,
                                    const double *mu,
                                    uintptr_t n,
                                    double log_sigma,
                                    struct NumlineDExp **handle);

// # Safety
// `json` must be a NUL-terminated string; `handle` must be valid for
// writes.
enum NumlineStatus numline_dexp_from_json(const char *json, struct NumlineDExp **handle);

// # Safety
// `handle` must be live; `json` must be valid for writes.
enum NumlineStatus numline_dexp_to_json(const struct NumlineDExp *handle, char **json);

// # Safety
// `handle` must be live; `nll` must be valid for writes.
enum NumlineStatus numline_dexp_nll(const struct NumlineDExp *handle, double value, double *nll);

// # Safety
// `handle` must be live; `value` must be valid for writes.
enum NumlineStatus numline_dexp_predict(const struct NumlineDExp *handle, double *value);

// # Safety
// `handle` must come from this library and not have been freed. Null is
// ignored.
void numline_dexp_free(struct NumlineDExp *handle);

// # Safety
// `values` must point to `n` values; `handle` must be valid for writes.
enum NumlineStatus numline_freq_bins_fit(const double *values,
                                         uintptr_t n,
                                         uintptr_t n_bins,
                                         struct NumlineFreqBins **handle);

// The shipped 21-edge FinNews bins.
//
// # Safety
// `handle` must be valid for writes.
enum NumlineStatus numline_freq_bins_finnews(struct NumlineFreqBins **handle);

// Number of bins; 0 for a null handle.
//
// # Safety
// `handle` must be live or null.
uintptr_t numline_freq_bins_len(const struct NumlineFreqBins *handle);

// # Safety
// `handle` must be live; `bin` must be valid for writes.
enum NumlineStatus numline_freq_bins_bin_of(const struct NumlineFreqBins *handle,
                                            double value,
                                            uintptr_t *bin);

// # Safety
// `handle` must be live; `value` must be valid for writes.
enum NumlineStatus numline_freq_bins_representative(const struct NumlineFreqBins *handle,
                                                    uintptr_t bin,
                                                    double *value);

// # Safety
// `handle` must come from this library and not have been freed. Null is
// ignored.
void numline_freq_bins_free(struct NumlineFreqBins *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NUMLINE_H */
