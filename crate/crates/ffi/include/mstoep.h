#ifndef MSTOEP_H
#define MSTOEP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Call outcome.
typedef enum MstStatus {
  MST_STATUS_OK = 0,
  MST_STATUS_NULL_POINTER = 1,
  MST_STATUS_INVALID_ARGUMENT = 2,
  // A zero outside the open unit disk or above the desk-scale cap.
  MST_STATUS_INVALID_ZERO = 3,
  // The symbol vanishes, winds, or has no canonical factorization.
  MST_STATUS_BAD_SYMBOL = 4,
  // A grid, quadrature or truncation limit was reached.
  MST_STATUS_NOT_CONVERGED = 5,
  // Two routes to the same quantity disagree.
  MST_STATUS_ROUTE_DISCREPANCY = 6,
  MST_STATUS_NUMERICAL = 7,
  MST_STATUS_PANIC = 8,
} MstStatus;

// Opaque finite Blaschke product.
typedef struct MstBlaschke MstBlaschke;

// Opaque determinant-identity report.
typedef struct MstReport MstReport;

// Opaque matrix Laurent polynomial.
typedef struct MstSymbol MstSymbol;

// Parameters mirrored field by field from the library defaults.
typedef struct MstParams {
  size_t grid_cap;
  double tail_tol;
  size_t section_cap;
  size_t truncation_cap;
  double tol;
  double desk_radius;
  double det_floor;
  double quad_tol;
  double route_tol;
} MstParams;

// A determinant as `exp(log_abs + i arg)`.
typedef struct MstLogDet {
  double log_abs;
  double arg;
} MstLogDet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call on the same thread.
const char *mst_last_error(void);

// Library version as a static NUL-terminated string.
const char *mst_version(void);

struct MstParams mst_params_default(void);

// Builds a symbol from `count` coefficient blocks `a_{n_min}, ...`; each block
// is `block_size * block_size` complex entries in row-major order.
//
// # Safety
// `data` must point to `2 * count * block_size^2` doubles; `out` must be writable.
enum MstStatus mst_symbol_new(size_t block_size,
                              int64_t n_min,
                              size_t count,
                              const double *data,
                              struct MstSymbol **out);

// # Safety
// `symbol` must come from [`mst_symbol_new`] and not be freed twice.
void mst_symbol_free(struct MstSymbol *symbol);

// Builds a Blaschke product from `count` interleaved complex zeros. Zeros
// outside the open unit disk give `MST_STATUS_INVALID_ZERO`.
//
// # Safety
// `zeros` must point to `2 * count` doubles; `out` must be writable.
enum MstStatus mst_blaschke_new(size_t count, const double *zeros, struct MstBlaschke **out);

// # Safety
// `u` must come from [`mst_blaschke_new`] and not be freed twice.
void mst_blaschke_free(struct MstBlaschke *u);

// Checks `det T_u(a)` against the factored right-hand side. `params` may be
// null for the defaults.
//
// # Safety
// Handles must be live; `out` must be writable.
enum MstStatus mst_bo_report(const struct MstSymbol *symbol,
                             const struct MstBlaschke *u,
                             const struct MstParams *params,
                             struct MstReport **out);

// # Safety
// `report` must come from [`mst_bo_report`] and not be freed twice.
void mst_report_free(struct MstReport *report);

// Both sides of the identity and their relative defect.
//
// # Safety
// `report` must be live; the out pointers must be writable or null.
enum MstStatus mst_report_sides(const struct MstReport *report,
                                struct MstLogDet *lhs,
                                struct MstLogDet *rhs,
                                double *rel_defect);

// 1 when every check passed, 0 otherwise, -1 on a null handle.
//
// # Safety
// `report` must be live or null.
int32_t mst_report_verdict(const struct MstReport *report);

// The full report as JSON; release with [`mst_string_free`].
//
// # Safety
// `report` must be live; `out` must be writable.
enum MstStatus mst_report_json(const struct MstReport *report, char **out);

// Runs an experiment config (the CLI's JSON format) and returns the rendered
// report. `verdict` receives 1 or 0 when not null.
//
// # Safety
// `config_json` must be a NUL-terminated string; `out` must be writable.
enum MstStatus mst_run_config(const char *config_json, char **out, int32_t *verdict);

// # Safety
// `s` must come from this library and not be freed twice.
void mst_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSTOEP_H */
