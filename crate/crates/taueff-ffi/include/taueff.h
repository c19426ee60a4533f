/* C interface of the taueff identification library. */

#ifndef TAUEFF_H
#define TAUEFF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code of every fallible call.
typedef enum TaueffStatus {
  // Success.
  TAUEFF_STATUS_OK = 0,
  // A pointer argument was null or a string was not valid UTF-8.
  TAUEFF_STATUS_INVALID_ARGUMENT = 1,
  // The graph text or a JSON document failed to parse.
  TAUEFF_STATUS_PARSE_ERROR = 2,
  // The covariance matrix was rejected (shape, symmetry, definiteness).
  TAUEFF_STATUS_COVARIANCE_ERROR = 3,
  // The graphical criterion is not satisfied.
  TAUEFF_STATUS_CRITERION_NOT_SATISFIED = 4,
  // Identification failed numerically (misfit, degeneracy, roles).
  TAUEFF_STATUS_IDENTIFICATION_ERROR = 5,
  // Simulation failed (missing annotations, infeasible variances).
  TAUEFF_STATUS_SIMULATION_ERROR = 6,
} TaueffStatus;

// Opaque labeled covariance matrix.
typedef struct TaueffCovariance TaueffCovariance;

// Opaque parsed graph document.
typedef struct TaueffGraph TaueffGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread; do not free it.
const char *taueff_last_error(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must have been returned by this library and not freed before.
void taueff_string_free(char *s);

// Parses graph text into an owned handle.
//
// # Safety
// `text` must be a valid NUL-terminated string; `out` a valid pointer.
enum TaueffStatus taueff_graph_parse(const char *text, struct TaueffGraph **out);

// Releases a graph handle.
//
// # Safety
// `g` must come from `taueff_graph_parse` and not be freed twice.
void taueff_graph_free(struct TaueffGraph *g);

// Canonical text form of the graph.
//
// # Safety
// `g` must be a valid handle; `out` a valid pointer.
enum TaueffStatus taueff_graph_print(const struct TaueffGraph *g, char **out);

// Number of vertices (observed and latent).
//
// # Safety
// `g` must be a valid handle; `out` a valid pointer.
enum TaueffStatus taueff_graph_vertex_count(const struct TaueffGraph *g, size_t *out);

// Parses a covariance JSON document into an owned handle.
//
// # Safety
// `text` must be a valid NUL-terminated string; `out` a valid pointer.
enum TaueffStatus taueff_covariance_parse_json(const char *text, struct TaueffCovariance **out);

// Releases a covariance handle.
//
// # Safety
// `c` must come from this library and not be freed twice.
void taueff_covariance_free(struct TaueffCovariance *c);

// Serializes a covariance handle back to JSON.
//
// # Safety
// `c` must be a valid handle; `out` a valid pointer.
enum TaueffStatus taueff_covariance_to_json(const struct TaueffCovariance *c, char **out);

// Exact implied covariance of the observed variables; the graph must
// carry a coefficient on every edge.
//
// # Safety
// `g` must be a valid handle; `out` a valid pointer.
enum TaueffStatus taueff_graph_exact_covariance(const struct TaueffGraph *g,
                                                struct TaueffCovariance **out);

// Seeded sample covariance of the observed variables.
//
// # Safety
// `g` must be a valid handle; `out` a valid pointer.
enum TaueffStatus taueff_graph_sample_covariance(const struct TaueffGraph *g,
                                                 size_t n,
                                                 uint64_t seed,
                                                 struct TaueffCovariance **out);

// Runs the criterion check matching the role assignment kind (the
// single-latent criterion for `"Single"` roles, the two-latent criterion
// for `"Double"`). Writes the certificate as JSON regardless of the
// outcome; returns `CriterionNotSatisfied` when the check fails.
//
// # Safety
// `g` must be a valid handle; strings NUL-terminated; `out_certificate`
// a valid pointer.
enum TaueffStatus taueff_check(const struct TaueffGraph *g,
                               const char *roles_json,
                               char **out_certificate);

// Identifies the squared total effect. `strategy` is one of
// `backdoor-latent-response`, `backdoor-latent-treatment`,
// `civ-latent-response`, `double-latent`; `roles_json` the matching role
// assignment; `sample_tol` less than or equal to zero selects the exact
// regime. On success writes the full result object as JSON and the bare
// value to `out_tau_squared` (either may be null to skip).
//
// # Safety
// Handles must be valid; strings NUL-terminated.
enum TaueffStatus taueff_identify(const struct TaueffGraph *g,
                                  const struct TaueffCovariance *c,
                                  const char *strategy,
                                  const char *roles_json,
                                  double sample_tol,
                                  double *out_tau_squared,
                                  char **out_result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAUEFF_H */
