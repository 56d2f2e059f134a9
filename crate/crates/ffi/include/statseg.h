#ifndef STATSEG_H
#define STATSEG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StatsegFunctional {
  STATSEG_FUNCTIONAL_GAUSSIAN_ML = 0,
  STATSEG_FUNCTIONAL_POISSON_ML = 1,
  STATSEG_FUNCTIONAL_RAYLEIGH_ML = 2,
  STATSEG_FUNCTIONAL_RAYLEIGH_MOMENTS = 3,
  STATSEG_FUNCTIONAL_CHAN_VESE = 4,
} StatsegFunctional;

typedef enum StatsegStatus {
  STATSEG_STATUS_OK = 0,
  STATSEG_STATUS_NULL_POINTER = 1,
  STATSEG_STATUS_INVALID_ARGUMENT = 2,
  /*
   Data or parameters outside a family's domain.
   */
  STATSEG_STATUS_DOMAIN = 3,
  /*
   A region became empty or degenerate during evolution.
   */
  STATSEG_STATUS_DEGENERATE = 4,
  STATSEG_STATUS_SHAPE_MISMATCH = 5,
  STATSEG_STATUS_INTERNAL = 6,
} StatsegStatus;

typedef enum StatsegFamily {
  STATSEG_FAMILY_GAUSSIAN = 0,
  STATSEG_FAMILY_POISSON = 1,
  STATSEG_FAMILY_RAYLEIGH = 2,
} StatsegFamily;

typedef enum StatsegEvolveStatus {
  STATSEG_EVOLVE_STATUS_CONVERGED = 0,
  STATSEG_EVOLVE_STATUS_MAX_ITER = 1,
  STATSEG_EVOLVE_STATUS_COLLAPSED = 2,
} StatsegEvolveStatus;

/*
 Real-valued image, row-major.
 */
typedef struct StatsegField StatsegField;

/*
 Binary mask, row-major.
 */
typedef struct StatsegMask StatsegMask;

/*
 Evolution parameters. Obtain defaults from [`statseg_config_default`].
 */
typedef struct StatsegConfig {
  enum StatsegFunctional functional;
  double lambda;
  double dt;
  double epsilon;
  size_t max_iter;
  size_t reinit_every;
  size_t converge_tol;
} StatsegConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length without the NUL, or
 0 when there is no error.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t statseg_last_error_message(char *buf, size_t len);

struct StatsegConfig statseg_config_default(enum StatsegFunctional functional);

/*
 Creates an image from `width * height` row-major samples.

 # Safety
 `data` must point to `width * height` readable doubles; `out` must be writable.
 */
enum StatsegStatus statseg_field_new(size_t width,
                                     size_t height,
                                     const double *data,
                                     struct StatsegField **out);

/*
 # Safety
 `field` must be null or a handle from [`statseg_field_new`] not yet freed.
 */
void statseg_field_free(struct StatsegField *field);

/*
 Creates a mask from `width * height` row-major bytes; non-zero is foreground.

 # Safety
 `data` must point to `width * height` readable bytes; `out` must be writable.
 */
enum StatsegStatus statseg_mask_new(size_t width,
                                    size_t height,
                                    const uint8_t *data,
                                    struct StatsegMask **out);

/*
 Builds the default initialization for `field` (`local_radius == 0` gives
 the circle lattice, otherwise the local-mean threshold of that radius).

 # Safety
 `field` must be a live handle; `out` must be writable.
 */
enum StatsegStatus statseg_initial_mask(const struct StatsegField *field,
                                        size_t local_radius,
                                        struct StatsegMask **out);

/*
 # Safety
 `mask` must be null or a live mask handle.
 */
void statseg_mask_free(struct StatsegMask *mask);

/*
 Writes the mask dimensions and foreground pixel count. Any out-pointer may be null.

 # Safety
 `mask` must be a live handle.
 */
enum StatsegStatus statseg_mask_info(const struct StatsegMask *mask,
                                     size_t *width,
                                     size_t *height,
                                     size_t *count);

/*
 Copies the mask as 0/1 bytes into `out`, which must hold `len >= width * height` bytes.

 # Safety
 `mask` must be a live handle and `out` must point to `len` writable bytes.
 */
enum StatsegStatus statseg_mask_copy(const struct StatsegMask *mask, uint8_t *out, size_t len);

/*
 Bhattacharyya distance between two members of `family`, given in
 conventional parameters (Poisson: rate; Rayleigh: scale; Gaussian: mean, variance).

 # Safety
 `a` and `b` must point to `n_a` and `n_b` readable doubles; `out` must be writable.
 */
enum StatsegStatus statseg_bhattacharyya(enum StatsegFamily family,
                                         const double *a,
                                         size_t n_a,
                                         const double *b,
                                         size_t n_b,
                                         double *out);

/*
 Foreground parameters at Bhattacharyya distance `d` from `bg`. Writes
 `family` dimension values (1 or 2) into `out`, which must hold `out_len` of them.

 # Safety
 `bg` must point to `n_bg` readable doubles and `out` to `out_len` writable ones.
 */
enum StatsegStatus statseg_calibrate(enum StatsegFamily family,
                                     const double *bg,
                                     size_t n_bg,
                                     double d,
                                     double *out,
                                     size_t out_len);

/*
 Segments `field` from `init`. The final mask is returned in `out_mask`
 (free with [`statseg_mask_free`]); `out_status` and `out_iterations` may be null.

 # Safety
 `field`, `init` and `config` must be valid; `out_mask` must be writable.
 */
enum StatsegStatus statseg_segment(const struct StatsegField *field,
                                   const struct StatsegMask *init,
                                   const struct StatsegConfig *config,
                                   struct StatsegMask **out_mask,
                                   enum StatsegEvolveStatus *out_status,
                                   size_t *out_iterations);

/*
 False- and true-positive fractions of `seg` against `gt`.

 # Safety
 Both masks must be live handles; `fpf` and `tpf` must be writable.
 */
enum StatsegStatus statseg_fpf_tpf(const struct StatsegMask *seg,
                                   const struct StatsegMask *gt,
                                   double *fpf,
                                   double *tpf);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STATSEG_H */
