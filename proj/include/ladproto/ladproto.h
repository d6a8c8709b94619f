#ifndef LADPROTO_LADPROTO_H_
#define LADPROTO_LADPROTO_H_

#include <stddef.h>

#if defined(_WIN32)
#define LP_API __declspec(dllexport)
#else
#define LP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. The CLI uses the same numbers as process exit codes, except
 * that LP_ERR_ARGUMENT exits with 2 like a configuration error. */
typedef enum lp_status {
  LP_OK = 0,
  LP_ERR_INTERNAL = 1,
  LP_ERR_CONFIG = 2,   /* bad configuration, unknown key, geometry mismatch */
  LP_ERR_DATA = 3,     /* missing or malformed input, infeasible split or episode */
  LP_ERR_NUMERIC = 4,  /* non-finite values during training */
  LP_ERR_ARGUMENT = 5  /* null pointer or too small buffer */
} lp_status;

/* Message of the last failure on the calling thread; empty after success.
 * Valid until the next call on the same thread. */
LP_API const char* lp_last_error(void);
LP_API const char* lp_status_name(lp_status status);
LP_API const char* lp_version(void);

/* Progress lines from commands. NULL restores printing to stdout. */
typedef void (*lp_log_fn)(const char* line, void* user);
LP_API void lp_set_log_callback(lp_log_fn fn, void* user);

/* String results use caller buffers: *needed receives the length including
 * the terminator; LP_ERR_ARGUMENT is returned when capacity is too small. */

typedef struct lp_config lp_config;

LP_API lp_status lp_config_new(lp_config** out);
LP_API lp_status lp_config_load(const char* path, lp_config** out);
LP_API lp_status lp_config_merge_file(lp_config* config, const char* path);
/* Relative paths in value resolve against the current directory. */
LP_API lp_status lp_config_set(lp_config* config, const char* key, const char* value);
LP_API lp_status lp_config_get(const lp_config* config, const char* key, char* buf, size_t capacity, size_t* needed);
LP_API lp_status lp_config_dump(const lp_config* config, char* buf, size_t capacity, size_t* needed);
/* Resolves and validates every key without running anything. */
LP_API lp_status lp_config_validate(const lp_config* config);
LP_API void lp_config_free(lp_config* config);

LP_API lp_status lp_cmd_synth(const lp_config* config);
LP_API lp_status lp_cmd_curate(const lp_config* config);
LP_API lp_status lp_cmd_train(const lp_config* config);
LP_API lp_status lp_cmd_eval(const lp_config* config);
LP_API lp_status lp_cmd_sweep_beta(const lp_config* config);
LP_API lp_status lp_cmd_report(const lp_config* config);

typedef struct lp_taxonomy lp_taxonomy;

LP_API lp_status lp_taxonomy_load(const char* path, lp_taxonomy** out);
LP_API lp_status lp_taxonomy_size(const lp_taxonomy* taxonomy, size_t* out);
LP_API lp_status lp_taxonomy_distance(const lp_taxonomy* taxonomy, const char* a, const char* b, int* out);
LP_API lp_status lp_taxonomy_depth(const lp_taxonomy* taxonomy, const char* id, int* out);
LP_API void lp_taxonomy_free(lp_taxonomy* taxonomy);

/* truth[i] is 0 or 1. */
LP_API lp_status lp_average_precision(const double* scores, const int* truth, size_t n, double* out);
LP_API lp_status lp_roc_auc(const double* scores, const int* truth, size_t n, double* out);
LP_API lp_status lp_f1(const double* scores, const int* truth, size_t n, double threshold, double* out);

/* Log-mel features of a WAV file with the default front end, row-major
 * [frames x 64]. Pass out = NULL to query the shape. */
LP_API lp_status lp_logmel_wav(const char* path, double* out, size_t capacity, size_t* rows, size_t* cols);

#ifdef __cplusplus
}
#endif

#endif /* LADPROTO_LADPROTO_H_ */
