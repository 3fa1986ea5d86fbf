/* Dual Gaussian process learning-based MPC toolkit - public C API.
 *
 * All functions return DGPC_OK on success; on failure they return an error
 * code and dgpc_last_error() describes the problem. Handles are opaque and
 * must be released with their matching free function.
 */
#ifndef DGPC_DGPC_H
#define DGPC_DGPC_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dgpc_status {
  DGPC_OK = 0,
  DGPC_ERR_INVALID_ARGUMENT = 1,
  DGPC_ERR_NUMERICAL = 2,
  DGPC_ERR_IO = 3,
  DGPC_ERR_SIMULATION = 4,
  DGPC_ERR_UNKNOWN = 5
} dgpc_status;

const char* dgpc_version(void);

/* Thread-local message describing the most recent failure. */
const char* dgpc_last_error(void);

/* Pipeline verbs. config_path may be NULL to use the built-in study
 * configuration. Artifacts are written under out_dir/<run name>/. */
dgpc_status dgpc_collect(const char* config_path, uint64_t seed,
                         const char* out_dir);
dgpc_status dgpc_train(const char* config_path, uint64_t seed,
                       const char* out_dir);
dgpc_status dgpc_run(const char* config_path, uint64_t seed,
                     const char* out_dir);
dgpc_status dgpc_compare(const char* config_path, uint64_t seed,
                         const char* out_dir);
dgpc_status dgpc_export(const char* run_dir, const char* out_dir);

/* Dual-GP model handle. */
typedef struct dgpc_model dgpc_model;

dgpc_status dgpc_model_load(const char* path, dgpc_model** out);
dgpc_status dgpc_model_save(const dgpc_model* model, const char* path);
void dgpc_model_free(dgpc_model* model);

dgpc_status dgpc_model_dims(const dgpc_model* model, int32_t* input_dim,
                            int32_t* n_channels);

/* Per-channel predictive mean and variance at input z (length input_dim);
 * mean_out/var_out must hold n_channels entries. */
dgpc_status dgpc_model_predict(const dgpc_model* model, const double* z,
                               int32_t input_dim, double* mean_out,
                               double* var_out);

/* Feed one online measurement y (length n_channels) at input z into the
 * short-term components. */
dgpc_status dgpc_model_observe(dgpc_model* model, const double* z,
                               int32_t input_dim, const double* y,
                               int32_t n_channels);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DGPC_DGPC_H */
