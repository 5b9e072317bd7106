#ifndef DUALITY_LAB_H
#define DUALITY_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum {
  DL_STATUS_OK = 0,
  DL_STATUS_NULL_POINTER = 1,
  DL_STATUS_INVALID_UTF8 = 2,
  DL_STATUS_PARSE_ERROR = 3,
  DL_STATUS_INVALID_PARAM = 4,
  DL_STATUS_DOMAIN_ERROR = 5,
  DL_STATUS_COMPUTE_ERROR = 6,
  DL_STATUS_PANIC = 7,
} DlStatus;

typedef enum {
  DL_FORMAT_JSON = 0,
  DL_FORMAT_CSV = 1,
} DlFormat;

typedef enum {
  DL_FAMILY_SEP = 0,
  DL_FAMILY_SIP = 1,
  DL_FAMILY_IRW = 2,
  DL_FAMILY_BEP = 3,
  DL_FAMILY_BMP = 4,
} DlFamily;

// A single-site duality kernel.
typedef struct DlKernel DlKernel;

// Reports produced by running a suite.
typedef struct DlReports DlReports;

// A parsed check suite.
typedef struct DlSuite DlSuite;

// Numeric fields of one report.
typedef struct {
  // Residual, or z-score for statistical checks; NaN if the check errored.
  double residual;
  double tolerance;
  double elapsed_ms;
  bool passed;
} DlReportSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *dl_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *dl_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a pointer obtained from this library and not yet freed.
void dl_string_free(char *s);

// Parses suite text into a new handle.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
DlStatus dl_suite_parse(const char *text, DlSuite **out);

// The bundled suite.
//
// # Safety
// `out` must be a valid pointer.
DlStatus dl_suite_default(DlSuite **out);

// Number of check descriptors in the suite.
//
// # Safety
// `suite` must be a live handle and `out` a valid pointer.
DlStatus dl_suite_len(const DlSuite *suite, size_t *out);

// Replaces the suite seed.
//
// # Safety
// `suite` must be a live handle.
DlStatus dl_suite_set_seed(DlSuite *suite, uint64_t seed);

// Runs every check. Failing checks are reported, not returned as errors.
//
// # Safety
// `suite` must be a live handle and `out` a valid pointer.
DlStatus dl_suite_run(const DlSuite *suite, DlReports **out);

// # Safety
// `suite` must be null or a live handle; it is invalid afterwards.
void dl_suite_free(DlSuite *suite);

// # Safety
// `reports` must be a live handle and `out` a valid pointer.
DlStatus dl_reports_len(const DlReports *reports, size_t *out);

// Number of failed reports.
//
// # Safety
// `reports` must be a live handle and `out` a valid pointer.
DlStatus dl_reports_failed(const DlReports *reports, size_t *out);

// # Safety
// `reports` must be a live handle and `out` a valid pointer.
DlStatus dl_reports_get(const DlReports *reports, size_t index, DlReportSummary *out);

// Serializes all reports. Release the string with [`dl_string_free`].
//
// # Safety
// `reports` must be a live handle and `out` a valid pointer.
DlStatus dl_reports_render(const DlReports *reports, DlFormat format, char **out);

// # Safety
// `reports` must be null or a live handle; it is invalid afterwards.
void dl_reports_free(DlReports *reports);

// Creates a kernel. Parameters by family: SEP `(j, p)`, SIP `(k, c)`,
// IRW `(lambda, _)`, BEP `(k, _)`, BMP `(_, _)`.
//
// # Safety
// `out` must be a valid pointer.
DlStatus dl_kernel_new(DlFamily family, double a, double b, DlKernel **out);

// Kernel value at occupation numbers (SEP, SIP, IRW).
//
// # Safety
// `kernel` must be a live handle and `out` a valid pointer.
DlStatus dl_kernel_discrete(const DlKernel *kernel, uint32_t x, uint32_t n, double *out);

// Kernel value at real arguments (BEP, BMP).
//
// # Safety
// `kernel` must be a live handle and `out` a valid pointer.
DlStatus dl_kernel_continuous(const DlKernel *kernel, double a, double b, double *out);

// # Safety
// `kernel` must be null or a live handle; it is invalid afterwards.
void dl_kernel_free(DlKernel *kernel);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DUALITY_LAB_H */
