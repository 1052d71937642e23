#ifndef HALFSPACE_H
#define HALFSPACE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  HS_STATUS_INVALID_UTF8 = 2,
  HS_STATUS_PARSE_ERROR = 3,
  HS_STATUS_INVALID_SPEC = 4,
  HS_STATUS_EVAL_ERROR = 5,
  HS_STATUS_ORACLE_ERROR = 6,
  HS_STATUS_PANIC = 7,
  HS_STATUS_INVALID_ARGUMENT = 8,
} HsStatus;

typedef enum {
  HS_VERDICT_NON_EXISTENCE = 0,
  HS_VERDICT_UNIQUE = 1,
  HS_VERDICT_FAMILY = 2,
  HS_VERDICT_INCONCLUSIVE = 3,
} HsVerdict;

/**
 * Classifier result.
 */
typedef struct HsClassification HsClassification;

/**
 * Parsed expression in `x1..x{n}`.
 */
typedef struct HsExpr HsExpr;

/**
 * Validated problem.
 */
typedef struct HsProblem HsProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call on the same thread; do not free.
 */
const char *hs_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hs_version(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void hs_string_free(char *s);

/**
 * Parses `text` as an expression in `x1..x{n_vars}`.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must be writable.
 */
HsStatus hs_expr_parse(const char *text, size_t n_vars, HsExpr **out);

/**
 * Evaluates at `point[0..len]`; `len` must equal the variable count.
 *
 * # Safety
 * `point` must hold `len` doubles; `out` must be writable.
 */
HsStatus hs_expr_eval(const HsExpr *e, const double *point, size_t len, double *out);

/**
 * `∂/∂x{axis+1}` as a new handle.
 *
 * # Safety
 * `e` must be a live handle; `out` must be writable.
 */
HsStatus hs_expr_differentiate(const HsExpr *e, size_t axis, HsExpr **out);

/**
 * Canonical text of the expression; free with `hs_string_free`.
 *
 * # Safety
 * `e` must be a live handle; `out` must be writable.
 */
HsStatus hs_expr_to_string(const HsExpr *e, char **out);

/**
 * # Safety
 * `e` must come from this library and not be freed twice. NULL is ignored.
 */
void hs_expr_free(HsExpr *e);

/**
 * Parses a JSON problem file (schema version 1).
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be writable.
 */
HsStatus hs_problem_from_json(const char *json, HsProblem **out);

/**
 * # Safety
 * `p` must come from this library and not be freed twice. NULL is ignored.
 */
void hs_problem_free(HsProblem *p);

/**
 * Runs the classifier.
 *
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
HsStatus hs_classify(const HsProblem *p, HsClassification **out);

/**
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
HsStatus hs_classification_verdict(const HsClassification *c, HsVerdict *out);

/**
 * Rule id such as `R-THETA-NONNEG`, or NULL written to `out` when no rule
 * applied. Free a non-NULL result with `hs_string_free`.
 *
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
HsStatus hs_classification_rule_id(const HsClassification *c, char **out);

/**
 * Full classification as JSON; free with `hs_string_free`.
 *
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
HsStatus hs_classification_to_json(const HsClassification *c, char **out);

/**
 * Evaluates the payload at `(xp[0..len], xn)`. For a family, `param` selects
 * the member; it is ignored for a single series.
 *
 * # Safety
 * `xp` must hold `len` doubles; `out` must be writable.
 */
HsStatus hs_classification_payload_eval(const HsClassification *c,
                                        const double *xp,
                                        size_t len,
                                        double xn,
                                        double param,
                                        double *out);

/**
 * # Safety
 * `c` must come from this library and not be freed twice. NULL is ignored.
 */
void hs_classification_free(HsClassification *c);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HALFSPACE_H */
