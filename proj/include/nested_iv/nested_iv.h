#ifndef NESTED_IV_H
#define NESTED_IV_H

#include <stddef.h>
#include <stdint.h>

#if defined(NIV_BUILDING_LIBRARY)
#define NIV_API __attribute__((visibility("default")))
#else
#define NIV_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values 1..17 mirror niv::ErrorCode. */
typedef enum {
  NIV_OK = 0,
  NIV_INVALID_ARGUMENT = 1,
  NIV_IO = 2,
  NIV_MISSING_COLUMN = 3,
  NIV_UNPARSEABLE_VALUE = 4,
  NIV_EMPTY_FILE = 5,
  NIV_SCHEMA_MISMATCH = 6,
  NIV_SINGULAR_COVARIANCE = 7,
  NIV_EMPTY_ARM = 8,
  NIV_INFEASIBLE_STRATA_COUNT = 9,
  NIV_INFEASIBLE = 10,
  NIV_TOO_FEW_STRATA = 11,
  NIV_UNDEFINED_ESTIMAND = 12,
  NIV_GAMMA_BELOW_ONE = 13,
  NIV_INVALID_CONFIG = 14,
  NIV_TOO_LARGE_FOR_ENUMERATION = 15,
  NIV_INVALID_DESIGN = 16,
  NIV_INTERNAL = 17
} niv_status_t;

typedef struct niv_dataset* niv_dataset_t;
typedef struct niv_design* niv_design_t;
typedef struct niv_table* niv_table_t;

typedef enum { NIV_TWO_SIDED = 0, NIV_GREATER = 1, NIV_LESS = 2 } niv_alternative_t;

typedef enum {
  NIV_TARGET_ACO = 0,
  NIV_TARGET_SW = 1,
  NIV_TARGET_PROPORTION = 2,
  NIV_TARGET_COMPLIANCE_A = 3,
  NIV_TARGET_COMPLIANCE_B = 4,
  NIV_TARGET_FULL_COHORT = 5
} niv_target_t;

typedef enum { NIV_DISTANCE_RANK_MAHALANOBIS = 0, NIV_DISTANCE_EUCLIDEAN = 1 } niv_distance_t;

typedef enum { NIV_SHAPE_BOUNDED = 0, NIV_SHAPE_HALF_LINE, NIV_SHAPE_WHOLE_LINE, NIV_SHAPE_DISJOINT } niv_shape_t;
typedef enum { NIV_METHOD_CLOSED_FORM = 0, NIV_METHOD_FIELLER, NIV_METHOD_GRID } niv_method_t;

/* Version string of the library, e.g. "0.1.0". */
NIV_API const char* niv_version(void);
/* Name of the status code, e.g. "MissingColumn". */
NIV_API const char* niv_status_name(niv_status_t status);
/* Message of the last failed call on this thread; "" when none. */
NIV_API const char* niv_last_error(void);
/* Identity of the random generator used by simulation and oracle calls. */
NIV_API const char* niv_rng_name(void);

/* ---- data ---- */

/* Reads a unit CSV with columns unit_id, z, d, r and covariates. */
NIV_API niv_status_t niv_dataset_load(const char* path, niv_dataset_t* out);
NIV_API niv_status_t niv_dataset_size(niv_dataset_t data, size_t* n_units);
NIV_API void niv_dataset_destroy(niv_dataset_t data);

/* ---- matching ---- */

typedef struct {
  niv_distance_t distance;
  int num_strata;      /* 0 means the smallest arm size */
  int64_t cost_scale;  /* 0 means 10000 */
  double regularization;
  const char* const* covariates; /* NULL or n_covariates names; NULL means all */
  size_t n_covariates;
} niv_match_options_t;

NIV_API void niv_match_options_default(niv_match_options_t* opts);
NIV_API niv_status_t niv_match(niv_dataset_t data, const niv_match_options_t* opts, niv_design_t* out);
NIV_API niv_status_t niv_design_load(const char* path, niv_dataset_t data, niv_design_t* out);
NIV_API niv_status_t niv_design_save(niv_design_t design, const char* path);
NIV_API niv_status_t niv_design_size(niv_design_t design, int* num_strata);
NIV_API niv_status_t niv_design_total_cost(niv_design_t design, int64_t* cost);
NIV_API void niv_design_destroy(niv_design_t design);

/* ---- tables (rows of text cells) ---- */

NIV_API niv_status_t niv_table_shape(niv_table_t table, size_t* rows, size_t* cols);
NIV_API niv_status_t niv_table_header(niv_table_t table, size_t col, const char** name);
NIV_API niv_status_t niv_table_cell(niv_table_t table, size_t row, size_t col, const char** value);
/* CSV text owned by the table, valid until the table is destroyed. */
NIV_API niv_status_t niv_table_csv(niv_table_t table, const char** csv);
NIV_API void niv_table_destroy(niv_table_t table);

/* Design rows stratum_id, pair, slot, unit_id, as written by niv_design_save. */
NIV_API niv_status_t niv_design_table(niv_design_t design, niv_table_t* out);

NIV_API niv_status_t niv_balance(niv_design_t design, niv_dataset_t data, niv_table_t* out);

/* ---- inference ---- */

typedef struct {
  double point;
  double se;
  double lower;
  double upper;
  double level;
  niv_shape_t shape;
  niv_method_t method;
  int n_components;
  double component_lower[2];
  double component_upper[2];
  /* Test of theta0 (proportion: zero; full cohort: unused). */
  double theta0;
  double statistic;
  double test_se;
  double z_score;
  double p_value;
  /* Full cohort only: weight on the always-complier effect. */
  double weight_aco;
} niv_estimate_t;

NIV_API niv_status_t niv_estimate(niv_design_t design, niv_target_t target, double level,
                                  niv_alternative_t alt, double theta0, niv_estimate_t* out);

typedef struct {
  double statistic;
  double se;
  double z_score;
  double p_value;
} niv_test_t;

/* One-sided test of iota_b - iota_a >= 0. */
NIV_API niv_status_t niv_test_implication(niv_design_t design, niv_test_t* out);

/* ---- sensitivity ---- */

/* One row per gamma. has_changepoint is 0 when the test still rejects at gamma = 20. */
NIV_API niv_status_t niv_sensitivity(niv_design_t design, niv_target_t target, double theta0,
                                     const double* gammas, size_t n_gammas, double level,
                                     niv_alternative_t alt, niv_table_t* out,
                                     double* changepoint, int* has_changepoint);

/* ---- simulation ---- */

typedef struct {
  const char* label;
  int n_strata;
  double p_focal;
  int focal;        /* 0 switchers, 1 always-compliers */
  int effect_dist;  /* 0 uniform, 1 normal, 2 exponential */
  double mu;
  double partner_mean;
  double other_mean;
  double background_sd;
  double baseline_sd;
  int constant_effects;
  int layout;       /* 0 multinomial, 1 two switchers per stratum, 2 switcher/always-complier pairs */
  int scheme;       /* 0 uniform, 1 submodel I, 2 submodel II */
  double gamma;
  double level;
  int sensitivity;
  int reps;
} niv_experiment_t;

NIV_API void niv_experiment_default(niv_experiment_t* cfg);
/* Names separated by newlines, static storage. */
NIV_API const char* niv_preset_names(void);
NIV_API niv_status_t niv_simulate_preset(const char* name, int reps, uint64_t seed, int threads,
                                         niv_table_t* out);
NIV_API niv_status_t niv_simulate(const niv_experiment_t* cfgs, size_t n, uint64_t seed,
                                  int threads, niv_table_t* out);

/* ---- exact enumeration ---- */

typedef struct {
  uint64_t assignments;
  double mean;
  double variance;
  double mean_s2;
  double expected;  /* closed-form expectation from the latent table */
  double truth;     /* iota_b - iota_a, kappa or lambda of the latent table */
} niv_oracle_t;

/* Draws a latent table of num_strata strata from the experiment's generating process
   and enumerates every assignment. statistic: 0 proportion, 1 ACO, 2 SW; theta0 is
   ignored for the proportion. Pass theta0 = NaN to test at the table's true value. */
NIV_API niv_status_t niv_oracle(const niv_experiment_t* dgp, uint64_t seed, int statistic,
                                double theta0, niv_oracle_t* out);

#ifdef __cplusplus
}
#endif

#endif
