#ifndef DEFERLAB_H
#define DEFERLAB_H

/* C interface to deferlab. Every fallible call returns a dl_status; on failure
 * dl_last_error() holds a message for the calling thread. Handles are opaque
 * and released with the matching *_free function (NULL is accepted). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DL_API __declspec(dllexport)
#elif defined(DEFERLAB_BUILDING_LIBRARY)
#define DL_API __attribute__((visibility("default")))
#else
#define DL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dl_status {
  DL_OK = 0,
  DL_ERR_ARGUMENT = 1, /* invalid value, unknown key or method, shape mismatch */
  DL_ERR_PARSE = 2,    /* malformed input text; see dl_last_error_line */
  DL_ERR_IO = 3,       /* file could not be read or written */
  DL_ERR_SOLVER = 4,   /* training diverged or the MILP produced no pair */
  DL_ERR_INTERNAL = 5
} dl_status;

typedef struct dl_config dl_config;
typedef struct dl_dataset dl_dataset;
typedef struct dl_pair dl_pair;
typedef struct dl_system dl_system;
typedef struct dl_milp_result dl_milp_result;
typedef struct dl_curve dl_curve;
typedef struct dl_bench dl_bench;

DL_API const char* dl_version(void);
DL_API const char* dl_last_error(void);
/* 1-based line of the last parse error, 0 when not a parse error. */
DL_API size_t dl_last_error_line(void);

/* ---- configuration ------------------------------------------------------
 * Keys are "section.name" with sections data, method, solver, train, eval.
 * Every key has a default; values are stored as text and checked on set. */
DL_API dl_status dl_config_new(dl_config** out);
DL_API void dl_config_free(dl_config* cfg);
DL_API dl_status dl_config_set(dl_config* cfg, const char* key, const char* value);
/* Pointer valid until the next mutation of cfg. */
DL_API dl_status dl_config_get(const dl_config* cfg, const char* key, const char** value);
/* 1 when set explicitly (file or dl_config_set), 0 when still the default. */
DL_API int dl_config_is_set(const dl_config* cfg, const char* key);
DL_API size_t dl_config_key_count(const dl_config* cfg);
DL_API const char* dl_config_key_at(const dl_config* cfg, size_t index);
/* INI text: [section] headers, key = value lines, '#' or ';' comments. */
DL_API dl_status dl_config_load_file(dl_config* cfg, const char* path);
DL_API dl_status dl_config_load_string(dl_config* cfg, const char* text);
/* Every key with its resolved value, INI layout. Caller frees with dl_string_free. */
DL_API dl_status dl_config_dump(const dl_config* cfg, char** out);
DL_API void dl_string_free(char* s);

/* ---- datasets ----------------------------------------------------------- */
DL_API dl_status dl_dataset_load_csv(const char* path, int num_classes, dl_dataset** out);
DL_API dl_status dl_dataset_save_csv(const dl_dataset* ds, const char* path);
DL_API void dl_dataset_free(dl_dataset* ds);
DL_API size_t dl_dataset_size(const dl_dataset* ds);
DL_API size_t dl_dataset_dim(const dl_dataset* ds);
DL_API int dl_dataset_num_classes(const dl_dataset* ds);
DL_API double dl_dataset_human_accuracy(const dl_dataset* ds);
/* Shuffled split; the first part holds round((1 - fraction) n) points. */
DL_API dl_status dl_dataset_split(const dl_dataset* ds, double fraction, uint64_t seed, dl_dataset** first,
                                  dl_dataset** second);

/* Draws a data.preset instance (synthetic or grouped) of data.n points.
 * planted may be NULL; it stays NULL for the grouped preset. */
DL_API dl_status dl_generate(const dl_config* cfg, dl_dataset** out, dl_pair** planted);
/* key=value sidecar for a synthetic instance: seed, p_m, p_h0, p_h1, weights. */
DL_API dl_status dl_write_planted_metadata(const dl_config* cfg, const dl_pair* planted, const char* path);

/* ---- halfspace pairs ---------------------------------------------------- */
DL_API dl_status dl_pair_load_csv(const char* path, dl_pair** out);
DL_API dl_status dl_pair_save_csv(const dl_pair* pair, const char* path);
DL_API void dl_pair_free(dl_pair* pair);
/* 1 for the binary form, C for the multiclass form. */
DL_API size_t dl_pair_classifier_rows(const dl_pair* pair);
/* Weights per row: d + 1, bias last. */
DL_API size_t dl_pair_width(const dl_pair* pair);
DL_API dl_status dl_pair_classifier_row(const dl_pair* pair, size_t row, double* weights);
DL_API dl_status dl_pair_rejector(const dl_pair* pair, double* weights);

/* ---- exact MILP --------------------------------------------------------- */
/* Reads the solver section. A result is returned for every status; dl_milp_pair
 * fails with DL_ERR_SOLVER when no pair was found. */
DL_API dl_status dl_milp_solve(const dl_config* cfg, const dl_dataset* train, dl_milp_result** out);
DL_API void dl_milp_result_free(dl_milp_result* r);
DL_API const char* dl_milp_status(const dl_milp_result* r);
DL_API double dl_milp_objective(const dl_milp_result* r);
DL_API double dl_milp_best_bound(const dl_milp_result* r);
DL_API double dl_milp_train_loss(const dl_milp_result* r);
DL_API size_t dl_milp_nodes(const dl_milp_result* r);
DL_API size_t dl_milp_lp_iterations(const dl_milp_result* r);
DL_API double dl_milp_wall_time(const dl_milp_result* r);
/* New handle owning a copy of the solved pair (original coordinates). */
DL_API dl_status dl_milp_pair(const dl_milp_result* r, dl_pair** out);

/* ---- trained systems ---------------------------------------------------- */
/* Method from method.name, hyperparameters from the method and train sections. */
DL_API dl_status dl_train(const dl_config* cfg, const dl_dataset* train, const dl_dataset* val, dl_system** out);
DL_API dl_status dl_system_load(const char* path, dl_system** out);
DL_API dl_status dl_system_save(const dl_system* sys, const char* path);
DL_API void dl_system_free(dl_system* sys);
DL_API const char* dl_system_method(const dl_system* sys);
DL_API double dl_system_tau(const dl_system* sys);
DL_API double dl_system_alpha(const dl_system* sys);

/* ---- evaluation --------------------------------------------------------- */
typedef struct dl_report {
  double system_accuracy;
  double coverage;
  double classifier_accuracy_nondeferred; /* meaningful only if has_classifier_arm */
  double human_accuracy_deferred;         /* meaningful only if has_human_arm */
  int has_classifier_arm;
  int has_human_arm;
  size_t n_points;
  size_t n_deferred;
} dl_report;

DL_API dl_status dl_evaluate_system(const dl_system* sys, const dl_dataset* ds, dl_report* out);
DL_API dl_status dl_evaluate_pair(const dl_pair* pair, const dl_dataset* ds, dl_report* out);
DL_API dl_status dl_curve_system(const dl_system* sys, const dl_dataset* ds, size_t grid, dl_curve** out);
DL_API dl_status dl_curve_pair(const dl_pair* pair, const dl_dataset* ds, size_t grid, dl_curve** out);
DL_API void dl_curve_free(dl_curve* c);
DL_API size_t dl_curve_size(const dl_curve* c);
DL_API dl_status dl_curve_point(const dl_curve* c, size_t i, double* threshold, double* coverage,
                                double* system_accuracy);
DL_API dl_status dl_curve_save_csv(const dl_curve* c, const char* path);
/* One series: the curve plus its operating point from report. */
DL_API dl_status dl_curve_save_svg(const dl_curve* c, const dl_report* report, const char* name, const char* title,
                                   const char* path);

DL_API dl_status dl_generalization_bound(double train_loss, double k_m, double k_r, size_t d, size_t n,
                                         double human_error_rate, double delta, double* out);

/* ---- benchmark ---------------------------------------------------------- */
typedef struct dl_bench_row {
  const char* method;
  size_t trial;
  dl_report report;
  double train_error;
  double tau;
  double alpha;
  const char* status; /* MILP status, "" for trained methods */
  double seconds;
} dl_bench_row;

typedef struct dl_bench_summary {
  const char* method;
  size_t trials;
  double mean_system_accuracy;
  double se_system_accuracy; /* meaningful only if has_se */
  int has_se;
  double mean_coverage;
} dl_bench_summary;

/* Instance from data, methods and alpha grids from method, MILP from solver,
 * training from train, trials/seed/jobs/curve grid from eval. */
DL_API dl_status dl_bench_run(const dl_config* cfg, dl_bench** out);
DL_API void dl_bench_free(dl_bench* b);
DL_API size_t dl_bench_row_count(const dl_bench* b);
DL_API dl_status dl_bench_row_at(const dl_bench* b, size_t i, dl_bench_row* out);
DL_API size_t dl_bench_summary_count(const dl_bench* b);
DL_API dl_status dl_bench_summary_at(const dl_bench* b, size_t i, dl_bench_summary* out);
DL_API dl_status dl_bench_save_results(const dl_bench* b, const char* path);
DL_API dl_status dl_bench_save_summary(const dl_bench* b, const char* path);
DL_API dl_status dl_bench_save_curve(const dl_bench* b, size_t row, const char* path);
/* Curves of one trial, one series per method. */
DL_API dl_status dl_bench_save_svg(const dl_bench* b, size_t trial, const char* title, const char* path);

#ifdef __cplusplus
}
#endif

#endif
