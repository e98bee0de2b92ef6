/* C interface to the crystalgym core. Every handle is opaque; every call
 * returns a cg_status and leaves a thread-local message in cg_last_error().
 * Strings returned through char** are owned by the caller and released with
 * cg_string_free. */
#ifndef CRYSTALGYM_H
#define CRYSTALGYM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CG_API __declspec(dllexport)
#else
#define CG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cg_status {
  CG_OK = 0,
  CG_ERR_PARSE = 10,
  CG_ERR_VALIDATION = 11,
  CG_ERR_LOOKUP = 12,
  CG_ERR_INDEX = 13,
  CG_ERR_DOMAIN = 14,
  CG_ERR_ACTION_SPACE = 15,
  CG_ERR_FIT = 16,
  CG_ERR_IO = 17,
  CG_ERR_STORE = 18,
  CG_ERR_CONFIG = 19,
  CG_ERR_EPISODE_DONE = 20,
  CG_ERR_ACTION = 21,
  CG_ERR_SHAPE = 22,
  CG_ERR_GRAPH = 23,
  CG_ERR_CHECKPOINT_MISMATCH = 24,
  CG_ERR_INVALID_ARGUMENT = 30, /* null handle or output pointer */
  CG_ERR_BUFFER_TOO_SMALL = 31,
  CG_ERR_INTERNAL = 40
} cg_status;

/* Message of the last failing call on this thread, "" after a success. */
CG_API const char* cg_last_error(void);
/* Symbolic name of a status, e.g. "ConfigError". */
CG_API const char* cg_status_name(int status);
CG_API void cg_string_free(char* s);

/* ---- environment ------------------------------------------------------ */

typedef struct cg_env cg_env;

/* Layout version of cg_env_observation. */
#define CG_OBSERVATION_VERSION 1

/* Config JSON object, keys mirror the episode config:
 *   property      "density" | "bulk_modulus" | "band_gap" (required)
 *   target        number; default from "difficulty" ("easy" | "hard")
 *   mode          "completion" | "substitution"
 *   structures    "C1" or ["C1", ...]                (default "C1")
 *   traversal     "fixed" | "random"
 *   action_space  "small" | "medium" | "large" | "Na,Cl,..."
 *   seed          integer
 *   cutoff, rho   graph cutoff (Angstrom) and edge width (Angstrom^2)
 *   focus_width   focus one-hot length (default: largest pool structure)
 *   calculator    "surrogate" | "exact" | "qe"; mock_seed for the band-gap mock
 *   cache         path of a result store shared by every env naming it
 * Unknown keys fail with CG_ERR_CONFIG naming the key. */
CG_API int cg_env_create(const char* config_json, cg_env** out);
CG_API void cg_env_destroy(cg_env* env);
CG_API int cg_env_reset(cg_env* env);
/* terminated is set to 1 on the last step; episodes never truncate.
 * reward and terminated may be null. */
CG_API int cg_env_step(cg_env* env, size_t action, double* reward, int* terminated);
CG_API int cg_env_action_count(const cg_env* env, size_t* out);
/* Length of the current flat observation. */
CG_API int cg_env_observation_size(const cg_env* env, size_t* out);
/* Flat observation, version 1:
 *   [0] version  [1] node_count N  [2] node_width W  [3] global_count G
 *   [4] edge_count E
 *   N*W node features, row-major (one-hot element, last column = empty site)
 *   G global features
 *   E edges of 7 values: u, v, shift_1, shift_2, shift_3, distance, feature
 * Writes min(capacity, size) values and stores the full size in *size;
 * CG_ERR_BUFFER_TOO_SMALL when capacity < size. buffer may be null to query. */
CG_API int cg_env_observation(const cg_env* env, double* buffer, size_t capacity, size_t* size);
/* Info of the last reset or step as a JSON object: structure, composition,
 * reduced, episode, step, terminated, truncated, reward and, on terminal steps,
 * success, value (null on failure), failure_reason (null on success). */
CG_API int cg_env_info_json(const cg_env* env, char** out);

/* ---- harness ---------------------------------------------------------- */

/* Runs an experiment. config is a file path or a preset name ("exp1"..);
 * overrides_json (may be null) is merged over it, e.g.
 * {"seeds":[0],"episodes":100,"calculator":"exact"}. Writes the run summary. */
CG_API int cg_train(const char* config, const char* overrides_json, char** summary_json);
/* Evaluation report of a checkpoint written by cg_train. */
CG_API int cg_evaluate(const char* checkpoint, size_t rollouts, uint64_t seed, char** report_json);
/* Writes curves.csv and curves.svg into a run directory; out lists the files. */
CG_API int cg_emit_curves(const char* run_dir, size_t window, char** files_json);
/* Record counts of a result store. */
CG_API int cg_cache_stats(const char* path, char** stats_json);

#ifdef __cplusplus
}
#endif

#endif
