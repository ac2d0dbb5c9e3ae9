#ifndef LIOUVILLE_AREA_H
#define LIOUVILLE_AREA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible call.
 */
typedef enum LaStatus {
  LaStatus_Ok = 0,
  LaStatus_NullPointer = 1,
  LaStatus_InvalidArgument = 2,
  LaStatus_Config = 3,
  LaStatus_Precondition = 4,
  LaStatus_Io = 5,
  LaStatus_BufferTooSmall = 6,
  LaStatus_Panic = 7,
} LaStatus;

/**
 * Kernel families accepted by [`la_sampler_new`].
 */
typedef enum LaKernel {
  LaKernel_PureLog = 0,
  LaKernel_LogPlusConstant = 1,
} LaKernel;

typedef struct LaGmc LaGmc;

typedef struct LaPolyline LaPolyline;

typedef struct LaReport LaReport;

typedef struct LaSampler LaSampler;

/**
 * Grid of `nx * ny` square cells of side `h` with lower-left corner `(x0, y0)`.
 */
typedef struct LaGrid {
  size_t nx;
  size_t ny;
  double h;
  double x0;
  double y0;
} LaGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *la_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *la_version(void);

/**
 * Field sampler for `kernel` on `grid`. `param` is the constant of
 * `LogPlusConstant` and ignored otherwise; `eps_reg <= 0` selects `h / 2`.
 */
enum LaStatus la_sampler_new(enum LaKernel kernel,
                             double param,
                             double eps_reg,
                             struct LaGrid grid,
                             struct LaSampler **out);

/**
 * Fraction of spectral mass removed by eigenvalue clipping.
 */
double la_sampler_clipped_fraction(const struct LaSampler *sampler);

void la_sampler_free(struct LaSampler *sampler);

/**
 * Chaos sample `index` of the stream keyed by `seed`.
 */
enum LaStatus la_gmc_sample(const struct LaSampler *sampler,
                            double gamma,
                            uint64_t seed,
                            uint64_t index,
                            struct LaGmc **out);

/**
 * Lebesgue measure on `grid` as a chaos sample (the `gamma = 0` case).
 */
enum LaStatus la_gmc_lebesgue(struct LaGrid grid, struct LaGmc **out);

double la_gmc_total_mass(const struct LaGmc *gmc);

/**
 * Copies the row-major cell masses into `buf`, which must hold `nx * ny` values.
 */
enum LaStatus la_gmc_masses(const struct LaGmc *gmc, double *buf, size_t len);

void la_gmc_free(struct LaGmc *gmc);

/**
 * Polyline through `n` points with times spread evenly over `[0, 1]`.
 */
enum LaStatus la_polyline_new(const double *xs,
                              const double *ys,
                              size_t n,
                              bool closed,
                              struct LaPolyline **out);

/**
 * Brownian path on `[0, 1]` with `n_steps` Gaussian increments.
 */
enum LaStatus la_polyline_brownian(size_t n_steps, uint64_t seed, struct LaPolyline **out);

void la_polyline_free(struct LaPolyline *poly);

/**
 * Winding numbers of the chord-closed polyline at the cell centers of
 * `grid`, row-major into `buf` of at least `nx * ny` values.
 */
enum LaStatus la_winding_numbers(const struct LaPolyline *poly,
                                 struct LaGrid grid,
                                 int32_t *buf,
                                 size_t len);

/**
 * `A_{0,1}`: the integral of the winding function of the whole path
 * against `gmc`. The grid of `gmc` must hold the path with a spare cell.
 */
enum LaStatus la_levy_area(const struct LaPolyline *poly, const struct LaGmc *gmc, double *out);

/**
 * Runs the experiment described by the JSON config `config_json`.
 */
enum LaStatus la_run_experiment(const char *config_json, struct LaReport **out);

/**
 * The report as JSON, owned by the report handle.
 */
const char *la_report_json(const struct LaReport *report);

/**
 * 1 when every check passed, 0 when one failed, -1 for a null handle.
 */
int32_t la_report_passed(const struct LaReport *report);

void la_report_free(struct LaReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIOUVILLE_AREA_H */
