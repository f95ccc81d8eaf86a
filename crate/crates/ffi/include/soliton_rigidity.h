#ifndef SOLITON_RIGIDITY_H
#define SOLITON_RIGIDITY_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SrStatus {
  SR_OK = 0,
  SR_NULL_POINTER = 1,
  SR_INVALID_ARGUMENT = 2,
  SR_CONFIG_ERROR = 3,
  SR_NUMERICAL_ERROR = 4,
  SR_COLLISION = 5,
  SR_IO_ERROR = 6,
  SR_CHECK_FAILED = 7,
  SR_PANIC = 8,
} SrStatus;

/*
 Interaction kernel and reference clock for one model.
 */
typedef struct SrKernel SrKernel;

/*
 Simulated trajectory.
 */
typedef struct SrTrajectory SrTrajectory;

/*
 Summary of a rigidity fit.
 */
typedef struct SrRigidity {
  double s_end;
  double omega_sum_norm;
  double omega_norm_error;
  double z0_end_distance;
  double c0;
  double c_star;
  double c0_tolerance;
  bool passed;
} SrRigidity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`) and returns the full message length without the NUL.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t sr_last_error(char *buf, size_t len);

/*
 Library version as a static NUL-terminated string.
 */
const char *sr_version(void);

/*
 Builds the ground state, kernel and clock up to log time `s_max`.
 `use_cache` reads and writes the on-disk cache.

 # Safety
 `out` must be a valid pointer to a handle slot.
 */
enum SrStatus sr_kernel_new(uint32_t d,
                            double p,
                            double alpha,
                            double s_max,
                            bool use_cache,
                            struct SrKernel **out);

/*
 # Safety
 `k` must be null or a handle from [`sr_kernel_new`] not yet freed.
 */
void sr_kernel_free(struct SrKernel *k);

/*
 Force F(r) for r ≥ 1.

 # Safety
 `k` must be a live kernel handle and `out` a valid pointer.
 */
enum SrStatus sr_kernel_force(const struct SrKernel *k, double r, double *out);

/*
 Far-field amplitude c_g and clock constant c_star.

 # Safety
 `k` must be a live kernel handle; the out pointers must be valid.
 */
enum SrStatus sr_kernel_constants(const struct SrKernel *k, double *c_g, double *c_star);

/*
 Simulates `n` centers in dimension `d` (row-major `centers`, `n * d` values)
 from t = 1 to log time `s_max`, writing frames every `stride` in s.
 A collision is not an error: the trajectory ends there and is reported by
 [`sr_trajectory_collision`].

 # Safety
 `centers` must hold `n * d` values, `signs` `n` values, `k` must be live and
 `out` valid.
 */
enum SrStatus sr_simulate(const struct SrKernel *k,
                          uint32_t d,
                          size_t n,
                          const double *centers,
                          const int8_t *signs,
                          double s_max,
                          double stride,
                          double rel_tol,
                          struct SrTrajectory **out);

/*
 # Safety
 `t` must be null or a handle from [`sr_simulate`] not yet freed.
 */
void sr_trajectory_free(struct SrTrajectory *t);

/*
 Number of frames, dimension and number of centers.

 # Safety
 `t` must be live; the out pointers must be valid.
 */
enum SrStatus sr_trajectory_shape(const struct SrTrajectory *t,
                                  size_t *frames,
                                  uint32_t *d,
                                  size_t *n);

/*
 Log time and centers of frame `index`; `centers` receives `n * d` values.

 # Safety
 `t` must be live, `s` valid and `centers` must have room for `cap` values.
 */
enum SrStatus sr_trajectory_frame(const struct SrTrajectory *t,
                                  size_t index,
                                  double *s,
                                  double *centers,
                                  size_t cap);

/*
 Whether the run ended in a collision, and the log time of the collision.

 # Safety
 `t` must be live; the out pointers must be valid.
 */
enum SrStatus sr_trajectory_collision(const struct SrTrajectory *t, bool *collided, double *s);

/*
 Limit directions and radial constant of a (1,3) trajectory.

 # Safety
 `k` and `t` must be live and `out` valid.
 */
enum SrStatus sr_fit_rigidity(const struct SrKernel *k,
                              const struct SrTrajectory *t,
                              struct SrRigidity *out);

/*
 Samples `samples` unit-vector triples in dimension `d` and checks the Gram
 inequalities; `worst_margin` receives the smallest margin seen.
 Returns `SrCheckFailed` when an inequality is violated.

 # Safety
 `worst_margin` must be valid.
 */
enum SrStatus sr_gram_inequalities(size_t samples, uint64_t seed, uint32_t d, double *worst_margin);

/*
 Runs the scenario in the JSON text `config`, writing artifacts into
 `out_dir`. `passed` receives whether every configured check passed.

 # Safety
 `config` and `out_dir` must be NUL-terminated strings and `passed` valid.
 */
enum SrStatus sr_run_scenario(const char *config,
                              const char *out_dir,
                              bool use_cache,
                              bool *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOLITON_RIGIDITY_H */
