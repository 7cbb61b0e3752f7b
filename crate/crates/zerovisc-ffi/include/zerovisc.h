/* Generated by cbindgen from zerovisc-ffi. Do not edit. */

#ifndef ZEROVISC_H
#define ZEROVISC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes.
 */
typedef enum ZvStatus {
  ZV_STATUS_OK = 0,
  ZV_STATUS_NULL_POINTER = 1,
  ZV_STATUS_CONFIG = 2,
  /*
   A pipeline stage refused (resolution, CFL, support guard, ...).
   */
  ZV_STATUS_STAGE = 3,
  /*
   Grid, shape or numerical precondition violated.
   */
  ZV_STATUS_NUMERIC = 4,
  ZV_STATUS_IO = 5,
  ZV_STATUS_INVALID_UTF8 = 6,
  ZV_STATUS_OUT_OF_RANGE = 7,
  ZV_STATUS_PANIC = 8,
} ZvStatus;

/*
 Norm families accepted by [`zv_norm`].
 */
typedef enum ZvNormKind {
  ZV_NORM_KIND_TANGENTIAL = 0,
  ZV_NORM_KIND_CONORMAL = 1,
  ZV_NORM_KIND_OUTER = 2,
  ZV_NORM_KIND_LAYER = 3,
} ZvNormKind;

typedef struct ZvConfig ZvConfig;

typedef struct ZvField ZvField;

typedef struct ZvGrid ZvGrid;

typedef struct ZvReport ZvReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copy the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length in bytes.

 # Safety
 `buf` must be null or valid for `len` bytes.
 */
size_t zv_last_error(char *buf, size_t len);

/*
 Desk configuration.

 # Safety
 `out` must be valid for a write.
 */
enum ZvStatus zv_config_desk(struct ZvConfig **out);

/*
 Parse and validate a TOML configuration.

 # Safety
 `toml` must be a NUL-terminated string, `out` valid for a write.
 */
enum ZvStatus zv_config_from_toml(const char *toml, struct ZvConfig **out);

/*
 Replace the eps sweep (must stay distinct and descending).

 # Safety
 `cfg` must come from this library; `eps` valid for `n` doubles.
 */
enum ZvStatus zv_config_set_eps(struct ZvConfig *cfg, const double *eps, size_t n);

/*
 Set the horizon and time step.

 # Safety
 `cfg` must come from this library.
 */
enum ZvStatus zv_config_set_time(struct ZvConfig *cfg, double horizon, double dt);

/*
 # Safety
 `cfg` must be null or come from this library, and not be used afterwards.
 */
void zv_config_free(struct ZvConfig *cfg);

/*
 Run the full study. Long-running (minutes on the desk configuration).

 # Safety
 `cfg` must come from this library, `out` valid for a write.
 */
enum ZvStatus zv_study_run(const struct ZvConfig *cfg, struct ZvReport **out);

/*
 Number of acceptance criteria evaluated by the study.

 # Safety
 `r` must come from this library, `n` valid for a write.
 */
enum ZvStatus zv_report_criteria_count(const struct ZvReport *r, size_t *n);

/*
 Criterion `i`: its number and whether it passed (1) or failed (0).

 # Safety
 `r` must come from this library; `id` and `pass` valid for writes.
 */
enum ZvStatus zv_report_criterion(const struct ZvReport *r, size_t i, uint32_t *id, int *pass);

/*
 Fitted log-log slope of a named quantity (for example `err_l2_u`).

 # Safety
 `r` must come from this library, `name` NUL-terminated, `slope` valid for a write.
 */
enum ZvStatus zv_report_rate(const struct ZvReport *r, const char *name, double *slope);

/*
 Write the report files and manifest into `dir`.

 # Safety
 `r` must come from this library, `dir` NUL-terminated.
 */
enum ZvStatus zv_report_write(const struct ZvReport *r, const char *dir);

/*
 # Safety
 `r` must be null or come from this library, and not be used afterwards.
 */
void zv_report_free(struct ZvReport *r);

/*
 Log-log least-squares slope of `values` against `eps` (`n >= 3`).

 # Safety
 `eps`, `values` valid for `n` doubles; `slope`, `residual` valid for writes.
 */
enum ZvStatus zv_fit_rate(const double *eps,
                          const double *values,
                          size_t n,
                          double *slope,
                          double *residual);

/*
 Grid on `T^d x [0, ly]` with `nx` points per tangential direction and a
 tanh-stretched normal direction (`beta = 0` for uniform).

 # Safety
 `out` must be valid for a write.
 */
enum ZvStatus zv_grid_new(size_t d,
                          size_t nx,
                          double box_len,
                          size_t ny,
                          double ly,
                          double beta,
                          struct ZvGrid **out);

/*
 Number of physical values of a field: `nx^d * ny`.

 # Safety
 `g` must come from this library, `n` valid for a write.
 */
enum ZvStatus zv_grid_len(const struct ZvGrid *g, size_t *n);

/*
 Copy the `ny` wall-normal nodes into `y`.

 # Safety
 `g` must come from this library, `y` valid for `ny` doubles.
 */
enum ZvStatus zv_grid_nodes(const struct ZvGrid *g, double *y, size_t ny);

/*
 # Safety
 `g` must be null or come from this library, and not be used afterwards.
 */
void zv_grid_free(struct ZvGrid *g);

/*
 Field from physical values laid out `[p * ny + j]`, `p` the tangential
 point and `j` the wall-normal node.

 # Safety
 `g` must come from this library, `values` valid for `n` doubles, `out` for a write.
 */
enum ZvStatus zv_field_from_values(const struct ZvGrid *g,
                                   const double *values,
                                   size_t n,
                                   struct ZvField **out);

/*
 Physical values of a field, layout as in [`zv_field_from_values`].

 # Safety
 `f` must come from this library, `values` valid for `n` doubles.
 */
enum ZvStatus zv_field_values(const struct ZvField *f, double *values, size_t n);

/*
 `d^order f / dy^order`, `order` 1 or 2.

 # Safety
 `f` must come from this library, `out` valid for a write.
 */
enum ZvStatus zv_field_dy(const struct ZvField *f, size_t order, struct ZvField **out);

/*
 `-Δu = rhs` with `u(0) = 0`, decaying at the top.

 # Safety
 `rhs` must come from this library, `out` valid for a write.
 */
enum ZvStatus zv_solve_dirichlet(const struct ZvField *rhs, struct ZvField **out);

/*
 Weighted norm of order `m` at time `t` and viscosity scale `eps`.

 # Safety
 `f` must come from this library, `value` valid for a write.
 */
enum ZvStatus zv_norm(const struct ZvField *f,
                      enum ZvNormKind kind,
                      size_t m,
                      double delta,
                      double lambda,
                      double t,
                      double eps,
                      double *value);

/*
 # Safety
 `f` must be null or come from this library, and not be used afterwards.
 */
void zv_field_free(struct ZvField *f);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZEROVISC_H */
