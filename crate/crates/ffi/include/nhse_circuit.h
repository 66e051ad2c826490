#ifndef NHSE_CIRCUIT_H
#define NHSE_CIRCUIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  NHSE_STATUS_OK = 0,
  NHSE_STATUS_NULL_POINTER = 1,
  NHSE_STATUS_INVALID_ARGUMENT = 2,
  NHSE_STATUS_PARSE_ERROR = 3,
  NHSE_STATUS_NUMERICAL_ERROR = 4,
  NHSE_STATUS_IO_ERROR = 5,
  NHSE_STATUS_PANIC = 6,
} NhseStatus;

/**
 * Opaque netlist handle.
 */
typedef struct NhseNetlist NhseNetlist;

/**
 * Opaque spectrum handle; eigenvectors are max-abs normalized.
 */
typedef struct NhseSpectrum NhseSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library.
 */
const char *nhse_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nhse_version(void);

/**
 * Parses netlist text (NUL-terminated UTF-8).
 *
 * # Safety
 * `text` must be a valid C string and `out` a valid pointer.
 */
NhseStatus nhse_netlist_parse(const char *text, NhseNetlist **out);

/**
 * Builds the unidirectional chain netlist from its six parameters.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
NhseStatus nhse_chain_build(size_t n,
                            double c0,
                            double c1,
                            double c2,
                            double c3,
                            double l,
                            NhseNetlist **out);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a handle from this library.
 */
size_t nhse_netlist_num_nodes(const NhseNetlist *net);

/**
 * # Safety
 * `net` must be null or a handle from this library not yet freed.
 */
void nhse_netlist_free(NhseNetlist *net);

/**
 * Eigen-decomposition of `J` (or of the shifted `J~` when `shifted` is
 * nonzero; chain netlists only) at `freq_hz`.
 *
 * # Safety
 * `net` must be a handle from this library and `out` a valid pointer.
 */
NhseStatus nhse_spectrum_compute(const NhseNetlist *net,
                                 double freq_hz,
                                 bool shifted,
                                 NhseSpectrum **out);

/**
 * Number of eigenvalues, or 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a handle from this library.
 */
size_t nhse_spectrum_len(const NhseSpectrum *s);

/**
 * Eigenvalue `k` (0-based) in siemens.
 *
 * # Safety
 * `s` must be a handle from this library; `re` and `im` valid pointers.
 */
NhseStatus nhse_spectrum_eigenvalue(const NhseSpectrum *s, size_t k, double *re, double *im);

/**
 * Copies eigenvector `k` into `re[0..len]`, `im[0..len]`; `len` must equal
 * the spectrum length.
 *
 * # Safety
 * `s` must be a handle from this library; `re` and `im` must point to at
 * least `len` writable doubles.
 */
NhseStatus nhse_spectrum_eigenvector(const NhseSpectrum *s,
                                     size_t k,
                                     double *re,
                                     double *im,
                                     size_t len);

/**
 * # Safety
 * `s` must be null or a handle from this library not yet freed.
 */
void nhse_spectrum_free(NhseSpectrum *s);

/**
 * Closed-form skin factor `|delta_t|^(1/N)` of the hopping chain.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
NhseStatus nhse_skin_factor(size_t n, double delta_t, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NHSE_CIRCUIT_H */
