#ifndef LGOCV_LGOCV_H
#define LGOCV_LGOCV_H

/*
 * C interface to the latent Gaussian model library: model setup from a JSON
 * configuration, hyperparameter fitting, automatic cross-validation group
 * construction, grouped predictive scoring, and the two simulation studies.
 *
 * Every function returns a status code; on failure lgocv_last_error() holds
 * a message for the calling thread and the outputs are untouched. Strings
 * returned through char** out parameters are heap-allocated and must be
 * released with lgocv_string_free. Fit and group handles stay bound to the
 * model that produced them; mixing handles across models is rejected.
 */

#include <stdint.h>

#if defined(_WIN32)
#define LGOCV_API __declspec(dllexport)
#else
#define LGOCV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  LGOCV_OK = 0,
  LGOCV_INVALID = 2, /* bad configuration or data */
  LGOCV_NUMERIC = 3  /* the computation itself failed */
} lgocv_status;

typedef struct lgocv_model lgocv_model;
typedef struct lgocv_fit lgocv_fit;
typedef struct lgocv_groups lgocv_groups;

LGOCV_API const char* lgocv_version(void);
LGOCV_API const char* lgocv_last_error(void);
LGOCV_API void lgocv_string_free(char* s);

/* Builds a model from a configuration document (see docs for the schema).
 * Relative data paths resolve against base_dir (NULL: current directory). */
LGOCV_API lgocv_status lgocv_model_create(const char* config_json, const char* base_dir,
                                          lgocv_model** out);
LGOCV_API void lgocv_model_free(lgocv_model* m);

/* Optimizes the hyperparameters and stores the latent approximation at the
 * mode. criteria_samples > 0 additionally estimates DIC/WAIC by Monte Carlo
 * with that many draws (seeded). ccd != 0 evaluates a small design grid
 * around the mode for the fit report. */
LGOCV_API lgocv_status lgocv_model_fit(const lgocv_model* m, uint64_t seed, int criteria_samples,
                                       int ccd, lgocv_fit** out);
LGOCV_API void lgocv_fit_free(lgocv_fit* f);
LGOCV_API lgocv_status lgocv_fit_summary_json(const lgocv_fit* f, char** out);

/* Builds one cross-validation group per observation from linear-predictor
 * correlations. mode is "prior" or "posterior"; level_count is the number of
 * correlation levels each group keeps; max_size caps the group size
 * (0: unlimited); tie_tol <= 0 picks the default tie tolerance. */
LGOCV_API lgocv_status lgocv_groups_build(const lgocv_model* m, const lgocv_fit* f,
                                          const char* mode, int level_count, int max_size,
                                          double tie_tol, lgocv_groups** out);
/* One group per observation holding only itself: leave-one-out. */
LGOCV_API lgocv_status lgocv_groups_singletons(const lgocv_model* m, lgocv_groups** out);
/* Rebinds a group set onto another model over the same observations, so one
 * model can be scored on groups derived from a reference model. */
LGOCV_API lgocv_status lgocv_groups_rebind(const lgocv_model* m, const lgocv_groups* g,
                                           lgocv_groups** out);
/* Expands every group to whole link classes of the configured link column. */
LGOCV_API lgocv_status lgocv_groups_expand_linked(const lgocv_model* m, lgocv_groups* g);
LGOCV_API lgocv_status lgocv_groups_json(const lgocv_model* m, const lgocv_groups* g, char** out);
LGOCV_API void lgocv_groups_free(lgocv_groups* g);

/* Grouped predictive scores at the fitted hyperparameters. method is "fast"
 * (curvature downdate with exact-refit fallback) or "exact" (refit per
 * group). grouped_coordinates != 0 validates that groups are unions of link
 * classes. criteria_samples as in lgocv_model_fit. Either output may be
 * NULL when not wanted. */
LGOCV_API lgocv_status lgocv_cv_score(const lgocv_model* m, const lgocv_fit* f,
                                      const lgocv_groups* g, const char* method,
                                      int grouped_coordinates, int criteria_samples,
                                      uint64_t seed, char** report_json, char** records_csv);

/* Synthetic data generators; outputs are ready for lgocv_model_create. */
LGOCV_API lgocv_status lgocv_simulate_temporal_csv(uint64_t seed, int n, double rho,
                                                   double noise_sd, double intercept,
                                                   char** csv);
LGOCV_API lgocv_status lgocv_simulate_lattice_csv(uint64_t seed, int rows, int cols,
                                                  double spatial_sd, char** data_csv,
                                                  char** graph_text);

/* Runs the simulation study selected by the config's "study" key
 * ("temporal-forecast" or "spatial-holdout"). Outputs the metric table and
 * the per-replicate prediction dump the table is computed from. */
LGOCV_API lgocv_status lgocv_study_run(const char* config_json, char** table_json,
                                       char** replicates_csv);
/* Validates a study config and reports its kind and optional output paths
 * ("" when the config leaves them unset). Any output may be NULL. */
LGOCV_API lgocv_status lgocv_study_describe(const char* config_json, char** kind,
                                            char** table_path, char** replicates_path);

/* Recomputes the metric table of a study from its replicate dump. */
LGOCV_API lgocv_status lgocv_report_from_replicates(const char* replicates_csv,
                                                    char** table_json);

#ifdef __cplusplus
}
#endif

#endif /* LGOCV_LGOCV_H */
