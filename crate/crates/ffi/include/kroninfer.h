/* kroninfer C API: random Kronecker multiplex graph generation, denoising, and parameter inference. */

#ifndef KRONINFER_H
#define KRONINFER_H

/* Generated by cbindgen from the kroninfer-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes for status-returning functions.
typedef enum KronStatus {
  KRON_STATUS_OK = 0,
  KRON_STATUS_NULL_ARGUMENT = 1,
  KRON_STATUS_INVALID_ARGUMENT = 2,
  KRON_STATUS_SHAPE_MISMATCH = 3,
  KRON_STATUS_CAPACITY_EXCEEDED = 4,
  KRON_STATUS_NUMERICAL_FAILURE = 5,
  KRON_STATUS_IO_ERROR = 6,
  KRON_STATUS_DIVERGENCE = 7,
  KRON_STATUS_MALFORMED_INPUT = 8,
  KRON_STATUS_BUFFER_TOO_SMALL = 9,
  KRON_STATUS_INTERNAL_PANIC = 10,
} KronStatus;

// Opaque initiator parameters (p, X, m, l, K).
typedef struct KronParams KronParams;

// Opaque inference result.
typedef struct KronResult KronResult;

// Opaque sampled graph.
typedef struct KronSample KronSample;

// Opaque dense even-order tensor.
typedef struct KronTensor KronTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static version string of the library.
const char *kron_version(void);

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `cap`). Returns the full message length in
// bytes, excluding the terminator.
size_t kron_last_error(char *buf, size_t cap);

// Creates initiator parameters from row-major `mat(X)` entries
// (`x_len = (m*l)^2` values). Returns NULL on invalid parameters.
struct KronParams *kron_params_new(size_t m,
                                   size_t l,
                                   uint32_t k,
                                   double p,
                                   const double *x_row_major,
                                   size_t x_len);

void kron_params_free(struct KronParams *params);

// Flattened graph dimension d = (m*l)^K.
size_t kron_params_dimension(const struct KronParams *params);

// Samples a graph: Bernoulli draws from the K-th Kronecker power of the
// initiator, conjugated by a random permutation displacing `permutation_s`
// labels (0 for the identity).
struct KronSample *kron_sample_generate(const struct KronParams *params,
                                        uint64_t seed,
                                        size_t permutation_s);

void kron_sample_free(struct KronSample *sample);

// Number of sampled edges (nonzero adjacency entries).
uint64_t kron_sample_edge_count(const struct KronSample *sample);

// Clones the sample's adjacency into a new tensor handle.
struct KronTensor *kron_sample_adjacency(const struct KronSample *sample);

// Runs the full inference pipeline on a sample. `solver_json` is an
// optional JSON object with keys method/eta/sparsity/gamma/max_iter/tol;
// pass NULL for defaults.
struct KronResult *kron_infer(const struct KronSample *sample, uint32_t k, const char *solver_json);

void kron_result_free(struct KronResult *result);

// Estimated density parameter p.
double kron_result_p_hat(const struct KronResult *result);

// Copies the row-major entries of `mat(X_hat)` into `out`. Returns the
// required length; copies only when `cap` is large enough.
size_t kron_result_x_hat(const struct KronResult *result, double *out, size_t cap);

// Serializes the result (estimates, diagnostics, metrics) to a JSON string.
// Free with `kron_string_free`.
char *kron_result_json(const struct KronResult *result);

void kron_string_free(char *s);

// Reads a KTEN1 tensor file.
struct KronTensor *kron_tensor_read(const char *path);

// Writes a tensor as a KTEN1 file.
enum KronStatus kron_tensor_write(const struct KronTensor *tensor, const char *path);

void kron_tensor_free(struct KronTensor *tensor);

// Tensor order (number of modes, row plus column).
size_t kron_tensor_order(const struct KronTensor *tensor);

// Copies the mode dimensions (row modes then column modes) into `out`.
// Returns the required length; copies only when `cap` is large enough.
size_t kron_tensor_dims(const struct KronTensor *tensor, size_t *out, size_t cap);

// Total entry count.
size_t kron_tensor_numel(const struct KronTensor *tensor);

// Copies the entries (canonical order) into `out`.
enum KronStatus kron_tensor_copy_data(const struct KronTensor *tensor, double *out, size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KRONINFER_H */
