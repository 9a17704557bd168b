#ifndef ROUGHCTL_ROUGHCTL_H
#define ROUGHCTL_ROUGHCTL_H

/* C interface of the roughctl engine. Handles are opaque; every fallible call
   returns an rc_status and leaves a message for rc_last_error() on the
   calling thread. */

#include <stddef.h>
#include <stdint.h>

#if defined(ROUGHCTL_BUILDING_LIBRARY)
#define RC_API __attribute__((visibility("default")))
#else
#define RC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rc_status {
    RC_OK = 0,
    RC_INVALID_ARGUMENT = 1,
    RC_CONFIG = 2,
    RC_NUMERICAL = 3, /* overflow, finite escape, leaving the domain, resolution cap */
    RC_IO = 4,
    RC_INTERNAL = 5
} rc_status;

typedef struct rc_path rc_path;
typedef struct rc_run rc_run;

RC_API const char* rc_version(void);

/* Message of the last failed call on this thread ("" if none). */
RC_API const char* rc_last_error(void);

/* Brownian motion on a uniform grid of `steps` intervals over [0, horizon],
   simulated on the `substeps`-fold refinement and lifted piecewise-linearly. */
RC_API rc_status rc_path_sample_brownian(uint64_t seed, double horizon, size_t steps, size_t substeps, size_t dim,
                                         rc_path** out);

/* Piecewise-linear lift through `values` (n_times x dim, time-major) at strictly increasing `times`. */
RC_API rc_status rc_path_from_points(const double* times, size_t n_times, const double* values, size_t dim,
                                     rc_path** out);

RC_API rc_status rc_path_read(const char* filename, rc_path** out);
RC_API rc_status rc_path_write(const rc_path* path, const char* filename);
RC_API void rc_path_free(rc_path* path);

RC_API size_t rc_path_dim(const rc_path* path);
RC_API size_t rc_path_steps(const rc_path* path);
RC_API double rc_path_time(const rc_path* path, size_t k);

/* Level-1 (dim) and level-2 (dim x dim, row-major) increment over [t_from, t_to]. */
RC_API rc_status rc_path_increment(const rc_path* path, size_t from, size_t to, double* delta, double* area);

/* Grid-restricted inhomogeneous alpha-Hoelder distance between two paths on the same grid. */
RC_API rc_status rc_path_hoelder_distance(const rc_path* p, const rc_path* q, double alpha, double* out);

/* Runs a harness subcommand (lqc-verify, bound, hjb, pmp, wong-zakai,
   sample-path) with a JSON configuration. Configuration problems and
   numerical failures still produce a run whose exit code is 2 or 3. */
RC_API rc_status rc_run_command(const char* command, const char* config_json, rc_run** out);
RC_API int rc_run_exit_code(const rc_run* run);
RC_API const char* rc_run_record_json(const rc_run* run);
RC_API void rc_run_free(rc_run* run);

/* Canonical form of a configuration: defaults filled in, validated. */
RC_API rc_status rc_config_normalize(const char* config_json, char** out_json);
RC_API void rc_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
