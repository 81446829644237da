#ifndef RELSPIN_H
#define RELSPIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define RELSPIN_SPIN_DIRAC 0

#define RELSPIN_SPIN_FW 1

#define RELSPIN_SPIN_PRYCE 2

// Doubles in one 4×4 complex matrix.
#define RELSPIN_MATRIX_DOUBLES 32

// Result of every fallible call.
typedef enum RelspinStatus {
  RELSPIN_STATUS_OK = 0,
  // A required pointer argument was NULL.
  RELSPIN_STATUS_NULL_ARGUMENT = 1,
  RELSPIN_STATUS_INVALID_ARGUMENT = 2,
  // Scenario parse or validation error; the message names the field.
  RELSPIN_STATUS_CONFIG = 3,
  RELSPIN_STATUS_SINGULAR_MOMENTUM = 4,
  RELSPIN_STATUS_ZERO_MODE_GUARD = 5,
  RELSPIN_STATUS_NOT_HERMITIAN = 6,
  RELSPIN_STATUS_NON_FINITE = 7,
  RELSPIN_STATUS_UNSUPPORTED = 8,
  RELSPIN_STATUS_KRYLOV_NOT_CONVERGED = 9,
  RELSPIN_STATUS_BOUNDARY_FLUX = 10,
  RELSPIN_STATUS_IO = 11,
  // An index or buffer length was out of range.
  RELSPIN_STATUS_OUT_OF_RANGE = 12,
  RELSPIN_STATUS_PANIC = 13,
} RelspinStatus;

// A validated scenario.
typedef struct RelspinScenario RelspinScenario;

// Sampled observables of a run, in the CSV column order.
typedef struct RelspinTrajectory RelspinTrajectory;

// Physical constants (m0, c, e) in internal units.
typedef struct RelspinParams {
  double m0;
  double c;
  double e;
} RelspinParams;

// Proper-spin-operator checks at one momentum.
typedef struct RelspinConditions {
  double su2_residual;
  // Largest deviation of each component's spectrum from (−½, −½, ½, ½).
  double spectrum_deviation;
  double free_commutation_residual;
  double free_commutation_components[3];
} RelspinConditions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *relspin_version(void);

// Message of the last failed call on this thread ("" after a success).
// Valid until the next call into the library on the same thread.
const char *relspin_last_error(void);

// Releases a string returned by the library.
//
// # Safety
// `s` must be NULL or a pointer obtained from this library, freed once.
void relspin_string_free(char *s);

// Writes the three components of the spin operator at momentum `p` into
// `out` (3 × RELSPIN_MATRIX_DOUBLES doubles). `params` may be NULL for the
// scaled electron (m0 = c = 1, e = −1).
//
// # Safety
// `p` must point at 3 doubles and `out` at 96 writable doubles.
enum RelspinStatus relspin_spin_operator(int32_t kind,
                                         const double *p,
                                         const struct RelspinParams *params,
                                         double *out);

// SU(2), spectrum and free-commutation checks at momentum `p`.
//
// # Safety
// `p` must point at 3 doubles; `out` must be writable.
enum RelspinStatus relspin_condition_checks(int32_t kind,
                                            const double *p,
                                            const struct RelspinParams *params,
                                            struct RelspinConditions *out);

// The operator suite over `samples` seeded momenta with |p| ≤ `pmax`.
// Sets `*passed` and, if `json_out` is not NULL, the JSON report.
//
// # Safety
// `passed` must be writable; `json_out` NULL or writable.
enum RelspinStatus relspin_check_operators(uint64_t samples,
                                           double pmax,
                                           uint64_t seed,
                                           bool *passed,
                                           char **json_out);

// Parses and validates a scenario from JSON text.
//
// # Safety
// `json` must be a NUL-terminated string; `out` writable.
enum RelspinStatus relspin_scenario_parse(const char *json, struct RelspinScenario **out);

// Reads, parses and validates a scenario file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` writable.
enum RelspinStatus relspin_scenario_load(const char *path, struct RelspinScenario **out);

// # Safety
// `s` must be NULL or a handle from this library, freed once.
void relspin_scenario_free(struct RelspinScenario *s);

// Verifies the scenario's spin equations (`refine` runs the grid ladder).
// Sets `*passed`; writes the JSON report if `json_out` is not NULL.
//
// # Safety
// `s` must be a live scenario handle; `passed` writable; `json_out` NULL or
// writable.
enum RelspinStatus relspin_verify_dynamics(const struct RelspinScenario *s,
                                           bool refine,
                                           bool *passed,
                                           char **json_out);

// Propagates the scenario's initial state.
//
// # Safety
// `s` must be a live scenario handle; `out` writable.
enum RelspinStatus relspin_simulate(const struct RelspinScenario *s,
                                    struct RelspinTrajectory **out);

// # Safety
// `t` must be NULL or a handle from this library, freed once.
void relspin_trajectory_free(struct RelspinTrajectory *t);

// Number of samples (0 for NULL).
//
// # Safety
// `t` must be NULL or a live trajectory handle.
size_t relspin_trajectory_len(const struct RelspinTrajectory *t);

// Number of columns in the trajectory CSV contract.
size_t relspin_trajectory_column_count(void);

// Name of column `index` (static string), or NULL when out of range.
const char *relspin_trajectory_column_name(size_t index);

// Copies column `name` into `buf` (capacity `len`, at least the
// trajectory length).
//
// # Safety
// `t` must be a live trajectory handle, `name` a NUL-terminated string and
// `buf` writable for `len` doubles.
enum RelspinStatus relspin_trajectory_column(const struct RelspinTrajectory *t,
                                             const char *name,
                                             double *buf,
                                             size_t len);

// The trajectory as CSV text (header plus one row per sample).
//
// # Safety
// `t` must be a live trajectory handle; `out` writable.
enum RelspinStatus relspin_trajectory_csv(const struct RelspinTrajectory *t, char **out);

// Runs the scenario over `count` field strengths (internal units) and
// returns the divergence CSV (b0, t, d_py, d_fw).
//
// # Safety
// `s` must be a live scenario handle, `strengths` readable for `count`
// doubles and `out` writable.
enum RelspinStatus relspin_sweep(const struct RelspinScenario *s,
                                 const double *strengths,
                                 size_t count,
                                 char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELSPIN_H */
