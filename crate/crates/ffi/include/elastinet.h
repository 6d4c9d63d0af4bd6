#ifndef ELASTINET_H
#define ELASTINET_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define ELN_OK 0

#define ELN_ERR_NULL 1

#define ELN_ERR_INVALID 2

#define ELN_ERR_PARSE 3

#define ELN_ERR_IO 4

#define ELN_ERR_TOPOLOGY 5

#define ELN_ERR_INADMISSIBLE 6

#define ELN_ERR_SINGULAR 7

#define ELN_ERR_IRREGULAR 8

#define ELN_ERR_NUMERIC 9

#define ELN_ERR_PANIC 10

#define ELN_FLAVOR_C0 0

#define ELN_FLAVOR_C1 1

/**
 * A network together with its length weight `mu`.
 */
typedef struct ElnNetwork ElnNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *eln_last_error(void);

/**
 * Builds a built-in scenario (`"triod-straight"`, `"triod-perturbed"`,
 * `"theta-symmetric"`, `"theta-degenerate"`). A negative `amplitude`
 * selects the scenario's default.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
int32_t eln_network_from_scenario(const char *name,
                                  uintptr_t grid,
                                  double mu,
                                  double amplitude,
                                  struct ElnNetwork **out);

/**
 * Parses a snapshot JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
int32_t eln_network_from_json(const char *json, struct ElnNetwork **out);

/**
 * Serializes the network as a snapshot JSON document. Release the string
 * with [`eln_string_free`].
 *
 * # Safety
 * `net` must come from this library and `out` must be a valid pointer.
 */
int32_t eln_network_to_json(const struct ElnNetwork *net, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void eln_string_free(char *s);

/**
 * # Safety
 * `net` must be null or a handle from this library, freed once.
 */
void eln_network_free(struct ElnNetwork *net);

/**
 * Number of grid intervals `N`; each curve has `N + 1` nodes.
 *
 * # Safety
 * Pointers must be valid.
 */
int32_t eln_network_grid(const struct ElnNetwork *net, uintptr_t *out);

/**
 * Elastic energy summed over the three curves.
 *
 * # Safety
 * Pointers must be valid.
 */
int32_t eln_network_energy(const struct ElnNetwork *net, double *out);

/**
 * Copies the nodes of `curve` (0, 1 or 2) as `x0, y0, x1, y1, ...` into
 * `buf`, which must hold `2 (N + 1)` values.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
int32_t eln_network_points(const struct ElnNetwork *net,
                           uintptr_t curve,
                           double *buf,
                           uintptr_t len);

/**
 * Runs the geometric and parametric admissibility checks. A positive
 * `tolerance` overrides the default one.
 *
 * # Safety
 * Pointers must be valid.
 */
int32_t eln_check(const struct ElnNetwork *net,
                  int32_t flavor,
                  double tolerance,
                  bool *geometric_pass,
                  bool *parametric_pass);

/**
 * Samples the complementing condition at the junctions; reports the
 * smallest normalized singular value and the verdict.
 *
 * # Safety
 * Pointers must be valid.
 */
int32_t eln_ls_verify(const struct ElnNetwork *net, int32_t flavor, double *min_ratio, bool *pass);

/**
 * Reparametrizes a geometrically admissible network into a new handle.
 *
 * # Safety
 * Pointers must be valid.
 */
int32_t eln_reparametrize(const struct ElnNetwork *net, struct ElnNetwork **out);

/**
 * One time step of size `dt`, returned as a new handle.
 *
 * # Safety
 * Pointers must be valid.
 */
int32_t eln_step(const struct ElnNetwork *net, double dt, struct ElnNetwork **out);

/**
 * Runs the adaptive flow to `t_final` starting with step `dt`. Writes the
 * final network, the number of accepted steps and whether `t_final` was
 * reached.
 *
 * # Safety
 * Pointers must be valid.
 */
int32_t eln_simulate(const struct ElnNetwork *net,
                     double t_final,
                     double dt,
                     struct ElnNetwork **out,
                     uintptr_t *steps,
                     bool *reached);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELASTINET_H */
