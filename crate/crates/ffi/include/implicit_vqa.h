#ifndef IMPLICIT_VQA_H
#define IMPLICIT_VQA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible function.
typedef enum IvqaStatus {
  IVQA_STATUS_OK = 0,
  IVQA_STATUS_NULL_POINTER = 1,
  IVQA_STATUS_INVALID_ARGUMENT = 2,
  IVQA_STATUS_NON_CONVERGENCE = 3,
  IVQA_STATUS_IO = 4,
  IVQA_STATUS_PANIC = 5,
} IvqaStatus;

typedef enum IvqaGate {
  IVQA_GATE_RX = 0,
  IVQA_GATE_RY = 1,
  IVQA_GATE_RZ = 2,
  IVQA_GATE_ROT = 3,
  IVQA_GATE_CZ = 4,
  IVQA_GATE_CNOT = 5,
  IVQA_GATE_H = 6,
  IVQA_GATE_SWAP = 7,
  IVQA_GATE_CSWAP = 8,
} IvqaGate;

typedef enum IvqaPipeline {
  IVQA_PIPELINE_SUSCEPTIBILITY = 0,
  IVQA_PIPELINE_HYPEROPT = 1,
  IVQA_PIPELINE_ENTANGLEMENT = 2,
} IvqaPipeline;

typedef enum IvqaFormat {
  IVQA_FORMAT_JSON = 0,
  IVQA_FORMAT_CSV = 1,
} IvqaFormat;

// Opaque pipeline result handle.
typedef struct IvqaResult IvqaResult;

// Opaque statevector handle.
typedef struct IvqaState IvqaState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or null if none.
//
// The pointer stays valid until the next failing call on the same thread.
const char *ivqa_last_error_message(void);

// Creates `|0...0>` on `n_qubits` qubits.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum IvqaStatus ivqa_state_new(uintptr_t n_qubits, struct IvqaState **out);

// # Safety
// `state` must be null or a handle from [`ivqa_state_new`] not yet freed.
void ivqa_state_free(struct IvqaState *state);

// Applies one gate in place.
//
// # Safety
// `state` must be a live handle; `targets` and `params` must point to
// `n_targets` and `n_params` readable elements (either may be null when its
// length is zero).
enum IvqaStatus ivqa_state_apply(struct IvqaState *state,
                                 enum IvqaGate gate,
                                 const uintptr_t *targets,
                                 uintptr_t n_targets,
                                 const double *params,
                                 uintptr_t n_params);

// `<psi| P |psi>` for a Pauli label such as `"ZZI"` (qubit 0 first).
//
// # Safety
// `state` must be a live handle, `label` a NUL-terminated string and `out`
// writable.
enum IvqaStatus ivqa_state_expectation(const struct IvqaState *state,
                                       const char *label,
                                       double *out);

// Copies the `2^n` amplitudes into `re` and `im`.
//
// # Safety
// `re` and `im` must each have room for `len` values.
enum IvqaStatus ivqa_state_amplitudes(const struct IvqaState *state,
                                      double *re,
                                      double *im,
                                      uintptr_t len);

// Geometric entanglement `1 - max |<product|psi>|^2` by multi-start search.
//
// # Safety
// `state` must be a live handle and `out` writable.
enum IvqaStatus ivqa_state_entanglement(const struct IvqaState *state,
                                        uintptr_t restarts,
                                        uint64_t seed,
                                        double *out);

// Runs a pipeline. `config_json` holds any subset of the pipeline's config
// keys (nested objects merge key by key); null or empty means all defaults.
//
// # Safety
// `config_json` must be null or NUL-terminated; `out` must be writable.
enum IvqaStatus ivqa_run(enum IvqaPipeline pipeline,
                         const char *config_json,
                         struct IvqaResult **out);

// Headline number of a result: the maximum susceptibility deviation, the
// final validation loss, or the final entanglement.
//
// # Safety
// `result` must be a live handle and `out` writable.
enum IvqaStatus ivqa_result_summary(const struct IvqaResult *result, double *out);

// Renders a result; free the string with [`ivqa_string_free`].
//
// # Safety
// `result` must be a live handle and `out` writable.
enum IvqaStatus ivqa_result_render(const struct IvqaResult *result,
                                   enum IvqaFormat format,
                                   char **out);

// Writes a result to `path`.
//
// # Safety
// `result` must be a live handle and `path` NUL-terminated.
enum IvqaStatus ivqa_result_write(const struct IvqaResult *result,
                                  const char *path,
                                  enum IvqaFormat format);

// # Safety
// `result` must be null or a handle from [`ivqa_run`] not yet freed.
void ivqa_result_free(struct IvqaResult *result);

// # Safety
// `s` must be null or a string returned by this library not yet freed.
void ivqa_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IMPLICIT_VQA_H */
