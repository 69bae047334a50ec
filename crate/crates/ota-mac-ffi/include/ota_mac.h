/* C interface for the ota-mac over-the-air aggregation simulator. */

#ifndef OTA_MAC_H
#define OTA_MAC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible call.
enum OtaStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : uint32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  OtaStatus_Ok = 0,
  // A required pointer argument was null.
  OtaStatus_NullPointer = 1,
  // A string argument was not valid UTF-8.
  OtaStatus_InvalidUtf8 = 2,
  // Configuration rejected during parsing or validation.
  OtaStatus_InvalidConfig = 3,
  // A constellation or lattice size violated the exact-integer guard.
  OtaStatus_Overflow = 4,
  // File I/O failed.
  OtaStatus_Io = 5,
  // An index was out of range or the handle holds the wrong result kind.
  OtaStatus_OutOfRange = 6,
  // The underlying call panicked; state may be inconsistent.
  OtaStatus_Panic = 7,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum OtaStatus OtaStatus;
#else
typedef uint32_t OtaStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

// Scheme selector mirrored into C.
enum OtaScheme
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : uint32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  OtaScheme_Uq = 0,
  OtaScheme_Wz = 1,
  OtaScheme_Analog = 2,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum OtaScheme OtaScheme;
#else
typedef uint32_t OtaScheme;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

// Opaque experiment handle.
typedef struct OtaExperiment OtaExperiment;

// Opaque result-set handle.
typedef struct OtaResults OtaResults;

// One mean-estimation sweep row, flattened for C.
typedef struct OtaResultRow {
  OtaScheme scheme;
  uint64_t num_clients;
  uint64_t dim;
  double snr_db;
  double bound;
  double sigma;
  uint64_t runs;
  double rmse;
  uint64_t uses_per_round;
  double metric;
  double decode_fail_rate;
} OtaResultRow;

// Derived scheme parameters, flattened for C. Fields that do not apply to
// the requested scheme are zero.
typedef struct OtaSchemeParams {
  uint64_t levels;
  uint64_t block_size;
  uint64_t wz_block_size;
  uint64_t base;
  uint64_t wz_base;
  uint64_t ask_size;
  uint64_t wz_ask_size;
  double daq_range;
  uint64_t daq_samples;
  uint64_t uses_per_round;
} OtaSchemeParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Most recent error message on this thread, or null when the last call
// succeeded. The pointer stays valid until the next failing call on the
// same thread.
const char *ota_last_error_message(void);

// Parses a TOML experiment description (the same format the CLI accepts)
// into a new experiment handle, written to `out`.
//
// # Safety
// `text` must be NUL terminated; `out` must be a valid pointer.
OtaStatus ota_experiment_from_toml(const char *text, struct OtaExperiment **out);

// Runs the experiment (mean estimation or PSGD, per its `mode`) and writes
// a fresh results handle to `out`.
//
// # Safety
// `experiment` must come from [`ota_experiment_from_toml`]; `out` must be a
// valid pointer.
OtaStatus ota_experiment_run(const struct OtaExperiment *experiment, struct OtaResults **out);

// Frees an experiment handle. Null is ignored.
//
// # Safety
// `experiment` must be null or a pointer from [`ota_experiment_from_toml`],
// not yet freed.
void ota_experiment_free(struct OtaExperiment *experiment);

// Number of rows in a results handle (sweep rows or trace rows).
//
// # Safety
// `results` must be a live handle from [`ota_experiment_run`].
size_t ota_results_len(const struct OtaResults *results);

// Copies mean-estimation row `index` into `out`. Fails with `OutOfRange`
// when the handle holds a PSGD trace or the index is past the end.
//
// # Safety
// `results` must be a live handle; `out` must be a valid pointer.
OtaStatus ota_results_row(const struct OtaResults *results, size_t index, struct OtaResultRow *out);

// Copies PSGD trace row `index` into `iteration` and `gap`.
//
// # Safety
// `results` must be a live handle; `iteration` and `gap` must be valid.
OtaStatus ota_results_trace_row(const struct OtaResults *results,
                                size_t index,
                                uint64_t *iteration,
                                double *gap);

// Writes the results to `path` in the requested format (an `OtaFormat`
// value; the same bytes the CLI emits).
//
// # Safety
// `results` must be a live handle; `path` must be NUL terminated.
OtaStatus ota_results_write(const struct OtaResults *results, const char *path, uint32_t format);

// Frees a results handle. Null is ignored.
//
// # Safety
// `results` must be null or a pointer from [`ota_experiment_run`], not yet
// freed.
void ota_results_free(struct OtaResults *results);

// Computes the derived scheme parameters for a configuration and writes
// them to `out` (`scheme` is an `OtaScheme` value). For the analog scheme
// only `uses_per_round` is set.
//
// # Safety
// `out` must be a valid pointer.
OtaStatus ota_select_params(uint32_t scheme,
                            uint64_t num_clients,
                            uint64_t dim,
                            double snr_db,
                            uint64_t n_budget,
                            double bound,
                            double c2,
                            struct OtaSchemeParams *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OTA_MAC_H */
