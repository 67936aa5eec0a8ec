#ifndef DEFECT_RESONANCE_H
#define DEFECT_RESONANCE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Square-root branch of the outgoing condition.
 */
typedef enum DrBranch {
  /**
   * Principal root, for resonances near `E > 0`.
   */
  DR_BRANCH_RESONANCE = 0,
  /**
   * `i sqrt(-z)`, for bound states near `E < 0`.
   */
  DR_BRANCH_BOUND = 1,
} DrBranch;

typedef enum DrNormalization {
  /**
   * `Phi(0) = 1`, `Phi'(0) = w0`.
   */
  DR_NORMALIZATION_UNIT_VALUE = 0,
  /**
   * `Phi(0) = -w0`, `Phi'(0) = 1`.
   */
  DR_NORMALIZATION_UNIT_SLOPE = 1,
} DrNormalization;

typedef enum DrParity {
  DR_PARITY_EVEN = 0,
  DR_PARITY_ODD = 1,
  DR_PARITY_NONE = 2,
} DrParity;

typedef enum DrStatus {
  DR_STATUS_OK = 0,
  DR_STATUS_NULL_POINTER = 1,
  DR_STATUS_INVALID_ARGUMENT = 2,
  DR_STATUS_INVALID_POTENTIAL = 3,
  DR_STATUS_TRUNCATION_INSIDE_SUPPORT = 4,
  DR_STATUS_IN_BAND = 5,
  DR_STATUS_BRANCH_CUT = 6,
  DR_STATUS_NON_CONVERGENCE = 7,
  DR_STATUS_SINGULAR_JACOBIAN = 8,
  DR_STATUS_PRECONDITION_VIOLATED = 9,
  DR_STATUS_INTEGRATION_FAILURE = 10,
  DR_STATUS_BUFFER_TOO_SMALL = 11,
  DR_STATUS_PANIC = 12,
} DrStatus;

/**
 * Opaque potential handle.
 */
typedef struct DrPotential DrPotential;

typedef struct DrComplex {
  double re;
  double im;
} DrComplex;

/**
 * Floquet data of the periodic background at one energy.
 */
typedef struct DrFloquet {
  struct DrComplex discriminant;
  struct DrComplex lambda_small;
  struct DrComplex lambda_large;
  double k;
  bool is_gap;
  bool antiperiodic;
} DrFloquet;

typedef struct DrInterval {
  bool is_gap;
  double lo;
  double hi;
} DrInterval;

typedef struct DrDefectMode {
  double energy;
  enum DrParity parity;
  enum DrNormalization normalization;
  double w0;
  double k;
  double k_fit;
  bool antiperiodic;
} DrDefectMode;

typedef struct DrSolverOptions {
  double step_tol;
  double residual_tol;
  size_t max_iter;
  double precondition_tol;
} DrSolverOptions;

typedef struct DrResonance {
  struct DrComplex z_star;
  /**
   * NaN unless the two-sided problem was solved.
   */
  struct DrComplex w_star;
  /**
   * First iterate `E - Theta(E)/Theta'(E)`.
   */
  struct DrComplex asymptotic_z1;
  double residual;
  size_t iterations;
  double ball_radius;
  bool in_ball;
  /**
   * NaN for a real root.
   */
  double lifetime;
} DrResonance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `len`, into `buf`. Returns the untruncated length in bytes
 * (without the terminator); pass `buf = NULL` to query it.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t dr_last_error_message(char *buf, size_t len);

/**
 * Parses a potential from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out_handle` must be writable.
 */
enum DrStatus dr_potential_from_json(const char *json, struct DrPotential **out_handle);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `handle` must come from [`dr_potential_from_json`] and not be used again.
 */
void dr_potential_free(struct DrPotential *handle);

/**
 * `V(x)` of the untruncated potential.
 *
 * # Safety
 * Pointers must be valid.
 */
enum DrStatus dr_potential_eval(const struct DrPotential *handle, double x, double *value);

/**
 * Monodromy data of the periodic background at complex energy `z`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum DrStatus dr_floquet(const struct DrPotential *handle,
                         struct DrComplex z,
                         double tol,
                         struct DrFloquet *result);

/**
 * Bands and gaps of the periodic background on `[z_min, z_max]`.
 *
 * # Safety
 * `buf` must hold `capacity` entries; other pointers must be valid.
 */
enum DrStatus dr_band_gap_scan(const struct DrPotential *handle,
                               double z_min,
                               double z_max,
                               size_t n_samples,
                               struct DrInterval *buf,
                               size_t capacity,
                               size_t *count);

/**
 * Defect eigenvalues inside the gap `(gap_lo, gap_hi)`, ascending.
 *
 * # Safety
 * `buf` must hold `capacity` entries; other pointers must be valid.
 */
enum DrStatus dr_find_defect_modes(const struct DrPotential *handle,
                                   double gap_lo,
                                   double gap_hi,
                                   double tol,
                                   struct DrDefectMode *buf,
                                   size_t capacity,
                                   size_t *count);

/**
 * Root of the truncated problem at radius `m` continued from `mode`.
 * `options` may be null for the defaults.
 *
 * # Safety
 * Pointers must be valid (`options` may be null).
 */
enum DrStatus dr_solve_resonance(const struct DrPotential *handle,
                                 const struct DrDefectMode *mode,
                                 double m,
                                 const struct DrSolverOptions *options,
                                 struct DrResonance *result);

/**
 * Default solver options.
 */
struct DrSolverOptions dr_solver_options_default(void);

/**
 * `Theta(z) = u'(M) - i sqrt(z) u(M)` for the solution with data
 * `(u0, du0)` at the origin, and `dTheta/dz` when `d_theta` is non-null.
 *
 * # Safety
 * Pointers must be valid (`d_theta` may be null).
 */
enum DrStatus dr_theta(const struct DrPotential *handle,
                       struct DrComplex z,
                       double m,
                       struct DrComplex u0,
                       struct DrComplex du0,
                       enum DrBranch branch,
                       struct DrComplex *theta,
                       struct DrComplex *d_theta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEFECT_RESONANCE_H */
