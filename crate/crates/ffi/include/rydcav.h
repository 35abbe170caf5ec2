#ifndef RYDCAV_H
#define RYDCAV_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RydcavStatus {
  RYDCAV_STATUS_OK = 0,
  RYDCAV_STATUS_IO = 1,
  RYDCAV_STATUS_CONFIG = 3,
  RYDCAV_STATUS_NUMERICAL = 4,
  RYDCAV_STATUS_NULL_ARGUMENT = 10,
  RYDCAV_STATUS_INVALID_UTF8 = 11,
  RYDCAV_STATUS_PANIC = 12,
} RydcavStatus;

/**
 * Opaque list of qubit-ensemble Förster couplings.
 */
typedef struct RydcavBlockade RydcavBlockade;

/**
 * Opaque ensemble average.
 */
typedef struct RydcavEnsemble RydcavEnsemble;

/**
 * Opaque parameter set.
 */
typedef struct RydcavParams RydcavParams;

/**
 * Opaque single-excitation trajectory.
 */
typedef struct RydcavTrajectory RydcavTrajectory;

typedef struct RydcavComplex {
  double re;
  double im;
} RydcavComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *rydcav_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t rydcav_last_error_message(char *buf, size_t len);

/**
 * Parses parameters from config text (frequencies in MHz).
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum RydcavStatus rydcav_params_from_config(const char *text, struct RydcavParams **out);

/**
 * # Safety
 * `p` must be null or a handle from [`rydcav_params_from_config`], freed once.
 */
void rydcav_params_free(struct RydcavParams *p);

/**
 * Collective coupling in rad/us.
 *
 * # Safety
 * `p` must be a live params handle and `out` writable.
 */
enum RydcavStatus rydcav_params_g_collective(const struct RydcavParams *p, double *out);

/**
 * Integrates from a loaded cavity photon. `adiabatic` selects the eliminated model.
 *
 * # Safety
 * `p` must be a live params handle and `out` writable.
 */
enum RydcavStatus rydcav_integrate(const struct RydcavParams *p,
                                   bool adiabatic,
                                   double t_end,
                                   double dt,
                                   size_t stride,
                                   struct RydcavTrajectory **out);

/**
 * Number of samples in a trajectory.
 *
 * # Safety
 * `t` must be a live trajectory handle.
 */
size_t rydcav_trajectory_len(const struct RydcavTrajectory *t);

/**
 * Copies times and the three populations. Any output pointer may be null;
 * non-null ones must hold [`rydcav_trajectory_len`] values.
 *
 * # Safety
 * As above.
 */
enum RydcavStatus rydcav_trajectory_copy(const struct RydcavTrajectory *t,
                                         double *times,
                                         double *pop_b,
                                         double *pop_e,
                                         double *pop_r);

/**
 * # Safety
 * `t` must be null or a trajectory handle, freed once.
 */
void rydcav_trajectory_free(struct RydcavTrajectory *t);

/**
 * Ensemble of quantum-jump trajectories from a coherent state `alpha`.
 * `workers == 0` uses the default thread pool; results do not depend on it.
 *
 * # Safety
 * `p` must be a live params handle and `out` writable.
 */
enum RydcavStatus rydcav_mcwf_ensemble(const struct RydcavParams *p,
                                       struct RydcavComplex alpha,
                                       size_t cutoff,
                                       double t_end,
                                       double dt,
                                       double sample_interval,
                                       size_t n_traj,
                                       uint64_t seed,
                                       size_t workers,
                                       struct RydcavEnsemble **out);

/**
 * # Safety
 * `e` must be a live ensemble handle.
 */
size_t rydcav_ensemble_len(const struct RydcavEnsemble *e);

/**
 * Copies the sampled columns; null outputs are skipped.
 *
 * # Safety
 * Non-null outputs must hold [`rydcav_ensemble_len`] values.
 */
enum RydcavStatus rydcav_ensemble_copy(const struct RydcavEnsemble *e,
                                       double *times,
                                       double *mean_photon,
                                       double *stderr_photon,
                                       double *rydberg_pop,
                                       double *stderr_rydberg);

/**
 * # Safety
 * `e` must be null or an ensemble handle, freed once.
 */
void rydcav_ensemble_free(struct RydcavEnsemble *e);

/**
 * Blockade from `n` complex Förster couplings (rad/us).
 *
 * # Safety
 * `v` must hold `n` values (may be null when `n == 0`); `out` writable.
 */
enum RydcavStatus rydcav_blockade_new(const struct RydcavComplex *v,
                                      size_t n,
                                      struct RydcavBlockade **out);

/**
 * # Safety
 * `b` must be null or a blockade handle, freed once.
 */
void rydcav_blockade_free(struct RydcavBlockade *b);

/**
 * Reflection without and with the stored qubit excitation, and the gate fidelity, at probe offset `delta`.
 *
 * # Safety
 * Handles must be live; outputs writable.
 */
enum RydcavStatus rydcav_gate_evaluate(const struct RydcavParams *p,
                                       const struct RydcavBlockade *b,
                                       double delta,
                                       struct RydcavComplex *r_unblocked,
                                       struct RydcavComplex *r_blocked,
                                       double *fidelity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RYDCAV_H */
