/* altlab — continual-RL reset-strategy laboratory.
 *
 * C API for the shared library. All functions return an error code
 * (ALTLAB_OK on success) unless documented otherwise; the most recent
 * error message for the calling thread is available via altlab_last_error().
 * Handles are opaque and must be released with their matching free function.
 */
#ifndef ALTLAB_H
#define ALTLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define ALTLAB_OK 0
#define ALTLAB_ERR_CONFIG 1  /* invalid configuration / arguments */
#define ALTLAB_ERR_RUNTIME 2 /* numeric or internal failure */
#define ALTLAB_ERR_IO 3      /* filesystem failure */

/* Library version string, e.g. "0.1.0". Never fails. */
const char* altlab_version(void);

/* Message for the last error raised on this thread ("" if none). */
const char* altlab_last_error(void);

/* ------------------------------------------------------------------ */
/* Configs                                                             */

typedef struct altlab_config altlab_config;

/* Parse and validate an experiment config from a JSON file / JSON text.
 * On success *out owns the config; free with altlab_config_free. */
int altlab_config_load(const char* path, altlab_config** out);
int altlab_config_parse(const char* json_text, altlab_config** out);
void altlab_config_free(altlab_config* cfg);

/* Re-run full validation (also done on load). Returns ALTLAB_OK or
 * ALTLAB_ERR_CONFIG with the reason in altlab_last_error(). */
int altlab_config_validate(const altlab_config* cfg);

/* Resolved view of the config as canonical JSON text. Caller frees the
 * string with altlab_string_free. */
int altlab_config_resolved_json(const altlab_config* cfg, char** out);

void altlab_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Running experiments                                                 */

/* Run every seed of the experiment; writes per-seed CSVs and a manifest
 * under the config's output directory. On success *manifest_path_out
 * (if non-NULL) receives the manifest path (free with altlab_string_free). */
int altlab_run(const altlab_config* cfg, char** manifest_path_out);

/* Expand the config's sweep axes and run each variant. *summary_out
 * (if non-NULL) receives the summary table text. */
int altlab_sweep(const altlab_config* cfg, char** summary_out);

/* Aggregate all run manifests found under root_dir into a summary table;
 * also writes summary.csv under root_dir. *table_out (if non-NULL)
 * receives the table text. */
int altlab_summarize(const char* root_dir, char** table_out);

/* ------------------------------------------------------------------ */
/* Small pure helpers exposed for embedding and scripting              */

/* Reset frequency in environment steps from an update budget, replay
 * ratio and network count. Errors if the division is not exact. */
int altlab_reset_freq_env_steps(uint64_t update_budget, int replay_ratio, int num_networks,
                                int64_t* out);

/* Time-normalized area under a (steps, returns) curve. */
int altlab_normalized_auc(const double* steps, const double* returns, int n, double* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ALTLAB_H */
