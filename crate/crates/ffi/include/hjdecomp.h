#ifndef HJDECOMP_H
#define HJDECOMP_H

/* Generated by cbindgen from the hjdecomp-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible entry point.
typedef enum HjdStatus {
  HjdStatus_Ok = 0,
  HjdStatus_NullPointer = 1,
  HjdStatus_InvalidArgument = 2,
  HjdStatus_InvalidUtf8 = 3,
  HjdStatus_NotConverged = 4,
  HjdStatus_CoverageViolation = 5,
  HjdStatus_Io = 6,
  HjdStatus_Panic = 7,
} HjdStatus;

// Opaque node field handle: grid layout plus one value per node.
typedef struct HjdField HjdField;

// Opaque result of a pipeline run.
typedef struct HjdIsaResult HjdIsaResult;

// Opaque problem handle.
typedef struct HjdProblem HjdProblem;

// Statistics of one value iteration.
typedef struct HjdSolveStats {
  uint64_t iterations;
  double final_residual;
  double seconds;
  bool converged;
} HjdSolveStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread. The pointer stays
// valid until the next failing call from the same thread.
const char *hjd_last_error_message(void);

// Creates a built-in problem. `name` is one of `eikonal-square`,
// `eikonal-kruzkov`, `strip-flat`, `van-der-pol`, `pursuit-evasion`;
// `params` is an optional comma-separated `key=value` list (`rho`, `delta`).
//
// # Safety
// `name` and (when non-null) `params` must point to NUL-terminated strings;
// `out` must point to writable storage for one pointer.
enum HjdStatus hjd_problem_builtin(const char *name, const char *params, struct HjdProblem **out);

// Releases a problem handle. NULL is ignored.
//
// # Safety
// `problem` must come from [`hjd_problem_builtin`] and not be freed twice.
void hjd_problem_free(struct HjdProblem *problem);

// Direct value iteration on a square lattice of `cells` cells per side.
// Pass 0 for `n_a`/`n_b` to get the problem's default sample counts and a
// non-positive `tol` for the default tolerance.
//
// # Safety
// `problem` must be a live handle; `out` must point to writable storage;
// `stats` may be NULL.
enum HjdStatus hjd_solve(const struct HjdProblem *problem,
                         uint32_t cells,
                         uint32_t n_a,
                         uint32_t n_b,
                         uint32_t h_mode,
                         double tol,
                         uint64_t max_iter,
                         struct HjdField **out,
                         struct HjdSolveStats *stats);

// Runs the coarse-to-fine pipeline: reconstruction on `coarse_cells`,
// projection, `parts` concurrent masked fine solves, minimum assembly.
// Zero-valued optional arguments select defaults (`n_a`, `n_b`, `workers`,
// `tol <= 0`).
//
// # Safety
// `problem` must be a live handle; `out` must point to writable storage.
enum HjdStatus hjd_isa_run(const struct HjdProblem *problem,
                           uint32_t coarse_cells,
                           uint32_t fine_cells,
                           uint32_t parts,
                           double error_coeff,
                           double lipschitz_bound,
                           double order,
                           double penalty,
                           double tol,
                           uint32_t workers,
                           uint32_t n_a,
                           uint32_t n_b,
                           struct HjdIsaResult **out);

// Node count along x.
//
// # Safety
// `field` must be a live handle.
uint32_t hjd_field_nx(const struct HjdField *field);

// Node count along y.
//
// # Safety
// `field` must be a live handle.
uint32_t hjd_field_ny(const struct HjdField *field);

// Borrowed pointer to the nx*ny node values in row-major order (j outer).
// Valid while the field handle lives. `len` (optional) receives the count.
//
// # Safety
// `field` must be a live handle; `len` may be NULL.
const double *hjd_field_values(const struct HjdField *field, size_t *len);

// Writes the field in the text dump format.
//
// # Safety
// `field` must be a live handle; `path` a NUL-terminated string.
enum HjdStatus hjd_field_write_text(const struct HjdField *field, const char *path);

// Releases a field handle. NULL is ignored.
//
// # Safety
// `field` must come from this library and not be freed twice.
void hjd_field_free(struct HjdField *field);

// Copies the assembled fine field out of a pipeline result.
//
// # Safety
// `result` must be a live handle; `out` must point to writable storage.
enum HjdStatus hjd_isa_field(const struct HjdIsaResult *result, struct HjdField **out);

// Number of boundary parts / fine masks.
//
// # Safety
// `result` must be a live handle.
uint32_t hjd_isa_parts(const struct HjdIsaResult *result);

// Mask membership of fine node (i, j) for one part: 1 member, 0 not,
// -1 on bad arguments.
//
// # Safety
// `result` must be a live handle.
int32_t hjd_isa_mask_member(const struct HjdIsaResult *result,
                            uint32_t part,
                            uint32_t i,
                            uint32_t j);

// Wall-clock sum over all pipeline stages, in seconds.
//
// # Safety
// `result` must be a live handle.
double hjd_isa_total_seconds(const struct HjdIsaResult *result);

// Fine nodes covered by two or more masks.
//
// # Safety
// `result` must be a live handle.
uint64_t hjd_isa_overlap_nodes(const struct HjdIsaResult *result);

// Releases a pipeline result. NULL is ignored.
//
// # Safety
// `result` must come from [`hjd_isa_run`] and not be freed twice.
void hjd_isa_free(struct HjdIsaResult *result);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* HJDECOMP_H */
