/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef BIFLIP_H
#define BIFLIP_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum BiflipStatus {
  BIFLIP_STATUS_OK = 0,
  BIFLIP_STATUS_NULL_POINTER = 1,
  BIFLIP_STATUS_USAGE = 2,
  BIFLIP_STATUS_DOMAIN = 3,
  BIFLIP_STATUS_DEGENERATE_INPUT = 4,
  BIFLIP_STATUS_NORMALIZATION = 5,
  BIFLIP_STATUS_PRECONDITION = 6,
  BIFLIP_STATUS_PARSE = 7,
  BIFLIP_STATUS_IO = 8,
  BIFLIP_STATUS_BUFFER_TOO_SMALL = 9,
  BIFLIP_STATUS_PANIC = 10,
} BiflipStatus;

typedef enum BiflipVerdict {
  BIFLIP_VERDICT_AFFIRMED = 0,
  BIFLIP_VERDICT_DEGENERATE = 1,
  BIFLIP_VERDICT_NOT_AFFIRMED = 2,
} BiflipVerdict;

typedef enum BiflipFlipSide {
  BIFLIP_FLIP_SIDE_MINUS = 0,
  BIFLIP_FLIP_SIDE_PLUS = 1,
  BIFLIP_FLIP_SIDE_DOUBLE = 2,
} BiflipFlipSide;

typedef enum BiflipFlipKind {
  BIFLIP_FLIP_KIND_FLIP = 0,
  BIFLIP_FLIP_KIND_DUAL_FLIP = 1,
  BIFLIP_FLIP_KIND_UNDETERMINED = 2,
} BiflipFlipKind;

typedef enum BiflipModelKind {
  BIFLIP_MODEL_KIND_NORMAL_FORM = 0,
  BIFLIP_MODEL_KIND_OSCILLATOR12 = 1,
  BIFLIP_MODEL_KIND_OSCILLATOR12_CUBIC = 2,
  BIFLIP_MODEL_KIND_HIRZEBRUCH = 3,
} BiflipModelKind;

// Opaque model handle.
typedef struct BiflipModel BiflipModel;

// `ν(j, t) = c_jj j² + c_j j + c_t t`.
typedef struct BiflipNuSpec {
  double c_jj;
  double c_j;
  double c_t;
} BiflipNuSpec;

typedef struct BiflipParams {
  double epsilon;
  double a;
  double b;
  struct BiflipNuSpec nu1;
  struct BiflipNuSpec nu2;
  double branch_sign;
} BiflipParams;

typedef struct BiflipCoefficients {
  double a;
  double nu1;
  double nu2;
  double u3_coeff;
  double b_sextic;
  double b_u3;
  double residual;
} BiflipCoefficients;

typedef struct BiflipDerivatives {
  double nu1;
  double nu2;
  double d_nu1_dj;
  double d2_nu1_dj2;
  double d_nu1_dt;
  double d_nu2_dj;
  double step_j;
  double step_t;
} BiflipDerivatives;

// Point analysis with the sextic `b`; `concavity_ratio` is NaN when undefined.
typedef struct BiflipAnalysis {
  struct BiflipCoefficients coefficients;
  struct BiflipDerivatives derivatives;
  bool saddle_node_passed;
  double concavity_ratio;
  enum BiflipVerdict verdict;
} BiflipAnalysis;

typedef struct BiflipFlipEvent {
  double j0;
  double t;
  double a;
  double nu1;
  double nu2;
  enum BiflipFlipSide side;
  enum BiflipFlipKind kind;
} BiflipFlipEvent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library defaults: ε = 1/8, a = b = 1, ν₁ = j² − t, ν₂ = 3j − t.
struct BiflipParams biflip_default_params(void);

// Create a model; `kind` is a [`BiflipModelKind`] value. Free with [`biflip_model_free`].
//
// # Safety
// `params` must be null or point to a valid `BiflipParams`; `out` must be writable.
enum BiflipStatus biflip_model_new(int32_t kind,
                                   const struct BiflipParams *params,
                                   struct BiflipModel **out);

// Create a model by CLI name (`normal-form`, `osc12`, `osc12-cubic`, `hirzebruch`).
//
// # Safety
// `name` must be a NUL-terminated string; `params` null or valid; `out` writable.
enum BiflipStatus biflip_model_from_name(const char *name,
                                         const struct BiflipParams *params,
                                         struct BiflipModel **out);

// Release a handle; null is ignored.
//
// # Safety
// `model` must be null or a handle not yet freed.
void biflip_model_free(struct BiflipModel *model);

// # Safety
// `model` must be a live handle; `j0` and `t0` writable.
enum BiflipStatus biflip_model_candidate(const struct BiflipModel *model, double *j0, double *t0);

// Normal-form coefficients of the reduced Hamiltonian at `(j, t)`.
//
// # Safety
// `model` must be a live handle; `out` writable.
enum BiflipStatus biflip_normalize(const struct BiflipModel *model,
                                   double j,
                                   double t,
                                   uint32_t degree_cap,
                                   struct BiflipCoefficients *out);

// Finite-difference derivatives of `ν₁`, `ν₂`; `step <= 0` picks the default steps.
//
// # Safety
// `model` must be a live handle; `out` writable.
enum BiflipStatus biflip_nu_derivatives(const struct BiflipModel *model,
                                        double j,
                                        double t,
                                        double step,
                                        uint32_t degree_cap,
                                        struct BiflipDerivatives *out);

// Normal form, derivatives, saddle-node test, concavity and verdict at `(j, t)`.
//
// # Safety
// `model` must be a live handle; `out` writable.
enum BiflipStatus biflip_analyze_point(const struct BiflipModel *model,
                                       double j,
                                       double t,
                                       double step,
                                       uint32_t degree_cap,
                                       struct BiflipAnalysis *out);

// Flip events at fixed `t` for `j` in `[j_min, j_max]`.
//
// `*count` receives the number of events. If it exceeds `capacity` nothing
// is copied and the call returns `BufferTooSmall`; `events` may be null
// when `capacity` is 0.
//
// # Safety
// `model` must be a live handle; `events` must hold `capacity` elements; `count` writable.
enum BiflipStatus biflip_flip_locus(const struct BiflipModel *model,
                                    double t,
                                    double j_min,
                                    double j_max,
                                    uint32_t degree_cap,
                                    struct BiflipFlipEvent *events,
                                    size_t capacity,
                                    size_t *count);

// Message of the last failed call on this thread, or an empty string.
// The pointer stays valid until the next call on the same thread.
const char *biflip_last_error(void);

// Static name of a `BiflipStatus` value; `unknown` for anything else.
const char *biflip_status_name(int32_t status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIFLIP_H */
