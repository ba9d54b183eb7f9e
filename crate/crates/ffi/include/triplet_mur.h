#ifndef TRIPLET_MUR_H
#define TRIPLET_MUR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TmurForm {
  TMUR_FORM_BLOCH = 0,
  TMUR_FORM_POVM = 1,
} TmurForm;

typedef enum TmurStatus {
  TMUR_STATUS_OK = 0,
  TMUR_STATUS_NULL_POINTER = 1,
  TMUR_STATUS_INVALID_INPUT = 2,
  TMUR_STATUS_UNSUPPORTED = 3,
  TMUR_STATUS_PRECONDITION = 4,
  TMUR_STATUS_DEGENERATE_GEOMETRY = 5,
  TMUR_STATUS_NUMERIC = 6,
  TMUR_STATUS_NOT_CONVERGED = 7,
  TMUR_STATUS_PANIC = 8,
} TmurStatus;

/**
 * Opaque solver result handle.
 */
typedef struct TmurSolution TmurSolution;

/**
 * Opaque triplet handle.
 */
typedef struct TmurTriplet TmurTriplet;

/**
 * Joint-measurability summary of an unbiased triplet.
 */
typedef struct TmurReport {
  /**
   * Diagonal vectors p_0..p_3, row-major.
   */
  double p[12];
  double ft_point[3];
  double lhs;
  double delta;
  double lower_bound;
  double min_distance;
  bool jointly_measurable;
  bool attainable;
} TmurReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tmur_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into the library from the same thread.
 */
const char *tmur_last_error(void);

/**
 * Unbiased triplet from 9 Bloch components (each |m_j| ≤ 1).
 */
enum TmurStatus tmur_triplet_new(const double *m, struct TmurTriplet **out);

/**
 * Family member: `name` is one of "m_o", "m_perp", "m_p", "m_y"; 0 ≤ γ ≤ 90.
 */
enum TmurStatus tmur_triplet_family(const char *name, double gamma_deg, struct TmurTriplet **out);

enum TmurStatus tmur_triplet_bloch(const struct TmurTriplet *t, double *out);

void tmur_triplet_free(struct TmurTriplet *t);

enum TmurStatus tmur_analyze(const struct TmurTriplet *t, struct TmurReport *out);

/**
 * Exact incompatibility. On `TMUR_STATUS_NOT_CONVERGED` the handle is still
 * written so the partial result can be inspected.
 */
enum TmurStatus tmur_solve(const struct TmurTriplet *t,
                           enum TmurForm form,
                           double tol,
                           struct TmurSolution **out);

enum TmurStatus tmur_solution_value(const struct TmurSolution *s, double *out);

/**
 * Optimal approximating Bloch vectors, 9 values.
 */
enum TmurStatus tmur_solution_approximators(const struct TmurSolution *s, double *out);

/**
 * Biases of the approximators, 3 values.
 */
enum TmurStatus tmur_solution_biases(const struct TmurSolution *s, double *out);

/**
 * Bloch vector of the worst-case state, 3 values.
 */
enum TmurStatus tmur_solution_worst_state(const struct TmurSolution *s, double *out);

/**
 * Number of parent POVM outcomes.
 */
enum TmurStatus tmur_solution_parent_len(const struct TmurSolution *s, size_t *out);

/**
 * Outcome `index` of the parent POVM as (a, b_x, b_y, b_z), effect (a + b·σ)/2,
 * plus the "+" probabilities of the three post-processed observables.
 */
enum TmurStatus tmur_solution_parent_outcome(const struct TmurSolution *s,
                                             size_t index,
                                             double *effect,
                                             double *readout);

void tmur_solution_free(struct TmurSolution *s);

enum TmurStatus tmur_delta_orthogonal(double gamma_deg, double *out);

enum TmurStatus tmur_delta_perp(double gamma_deg, double *out);

enum TmurStatus tmur_delta_y(double gamma_deg, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRIPLET_MUR_H */
