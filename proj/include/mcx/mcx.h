/* mcx - mixed-model analysis of multivariate crossover trials with missing
 * responses: Monte Carlo EM fitting, multiple-imputation standard errors,
 * likelihood ratio tests, and simulation / power studies.
 *
 * C API of the shared library. All functions returning mcx_status set a
 * thread-local message retrievable with mcx_last_error() on failure. Handles
 * are opaque and freed with their matching *_free function.
 */
#ifndef MCX_H
#define MCX_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define MCX_VERSION "0.1.0"

typedef enum mcx_status {
  MCX_OK = 0,
  MCX_ERR_INVALID = 1, /* bad arguments or configuration */
  MCX_ERR_DATA = 2,    /* malformed or inconsistent input data */
  MCX_ERR_NUMERIC = 3, /* numerical failure */
  MCX_ERR_IO = 4       /* file system failure */
} mcx_status;

const char* mcx_version(void);
const char* mcx_last_error(void);

typedef struct mcx_design mcx_design;
typedef struct mcx_data mcx_data;
typedef struct mcx_fit mcx_fit;
typedef struct mcx_sim_result mcx_sim_result;
typedef struct mcx_power_result mcx_power_result;

/* ---- design ------------------------------------------------------------ */

/* json_text declares treatments, responses, and per-sequence treatment
 * orders; see the project README for the schema. */
mcx_status mcx_design_from_json(const char* json_text, mcx_design** out);
void mcx_design_free(mcx_design* design);

int mcx_design_sequences(const mcx_design* design);
int mcx_design_periods(const mcx_design* design);
int mcx_design_treatments(const mcx_design* design);
int mcx_design_responses(const mcx_design* design);
int mcx_design_n_coef(const mcx_design* design);
mcx_status mcx_design_coef_name(const mcx_design* design, int index, char* buf, size_t buflen);

/* ---- data -------------------------------------------------------------- */

/* CSV columns: sequence,subject,period,treatment,response,value. Empty value
 * = missing. log_transform != 0 applies the natural log at ingestion. */
mcx_status mcx_data_read_csv(const mcx_design* design, const char* path, int log_transform,
                             mcx_data** out);
mcx_status mcx_data_write_csv(const mcx_data* data, const char* path);
void mcx_data_free(mcx_data* data);

long mcx_data_observed(const mcx_data* data);
long mcx_data_missing(const mcx_data* data);
int mcx_data_subjects(const mcx_data* data, int sequence);
/* sequence >= 0: that sequence's missing fraction; sequence < 0: overall. */
double mcx_data_missing_fraction(const mcx_data* data, int sequence);

/* ---- fitting ----------------------------------------------------------- */

typedef struct mcx_fit_options {
  uint64_t seed;
  int mc_initial;   /* Monte Carlo samples per E-step during warmup */
  int warmup_iters; /* iterations run at mc_initial */
  int mc_main;      /* samples per E-step afterwards */
  int mc_polish;    /* samples for the final polishing update */
  int max_iter;
  double tol;       /* max relative parameter change declaring convergence */
  int tol_window;   /* consecutive iterations required under tol */
  double var_floor;
} mcx_fit_options;

void mcx_fit_options_default(mcx_fit_options* options);

typedef struct mcx_mi_options {
  uint64_t seed;
  int imputations; /* completed datasets per repetition */
  int burn_in;     /* Gibbs sweeps discarded before collection */
  int repetitions; /* independent chains (m0) */
} mcx_mi_options;

void mcx_mi_options_default(mcx_mi_options* options);

/* restriction: NULL or "" fits the full model. Otherwise one of
 *   "treatment" | "period" | "response"    (all indicators of a factor zero)
 *   "response:A=B"                         (pairwise contrast, 1-based labels)
 *   "cols:J,K,..."                         (explicit coefficient indices)   */
mcx_status mcx_fit_run(const mcx_design* design, const mcx_data* data,
                       const mcx_fit_options* options, const char* restriction, mcx_fit** out);
void mcx_fit_free(mcx_fit* fit);

int mcx_fit_converged(const mcx_fit* fit);
int mcx_fit_iterations(const mcx_fit* fit);
double mcx_fit_loglik(const mcx_fit* fit);
int mcx_fit_n_coef(const mcx_fit* fit); /* full coefficient space */
double mcx_fit_coef(const mcx_fit* fit, int index);
double mcx_fit_sigma_e2(const mcx_fit* fit);
double mcx_fit_sigma_s2(const mcx_fit* fit);
double mcx_fit_aic(const mcx_fit* fit);
double mcx_fit_bic(const mcx_fit* fit);
double mcx_fit_rmse(const mcx_fit* fit);

/* Multiple-imputation standard errors (full-model fits only). Fills the
 * values returned by the three se getters; NaN before this call. */
mcx_status mcx_fit_mi_se(mcx_fit* fit, const mcx_mi_options* options);
double mcx_fit_se(const mcx_fit* fit, int index);
double mcx_fit_se_sigma_e2(const mcx_fit* fit);
double mcx_fit_se_sigma_s2(const mcx_fit* fit);

/* Drop-one-column LRT p-values per coefficient (full-model fits only). The
 * intercept slot stays NaN. threads <= 0 uses the hardware default. */
mcx_status mcx_fit_lrt_pvalues(mcx_fit* fit, const mcx_fit_options* options, int threads);
double mcx_fit_pvalue(const mcx_fit* fit, int index);

/* ---- likelihood ratio tests --------------------------------------------- */

typedef struct mcx_test_result {
  double statistic;
  int df;
  double p_value;
  double full_loglik;
  double reduced_loglik;
} mcx_test_result;

/* Both fits must come from the same data handle. */
mcx_status mcx_lrt(const mcx_fit* full, const mcx_fit* reduced, mcx_test_result* out);
/* Q-function statistic variant (one fresh E-step at the full estimate). */
mcx_status mcx_lrt_q(const mcx_fit* full, const mcx_fit* reduced, const mcx_fit_options* options,
                     mcx_test_result* out);

/* ---- simulation studies ------------------------------------------------- */

/* scenario_json: design (with subject counts), true parameters, missingness,
 * replication count, optional "mcem"/"mi" blocks. threads <= 0 uses the
 * hardware default. */
mcx_status mcx_simulate_run(const char* scenario_json, int threads, mcx_sim_result** out);
void mcx_sim_result_free(mcx_sim_result* result);

int mcx_sim_result_n_params(const mcx_sim_result* result);
mcx_status mcx_sim_result_param_name(const mcx_sim_result* result, int index, char* buf, size_t buflen);
double mcx_sim_result_truth(const mcx_sim_result* result, int index);
double mcx_sim_result_mean_estimate(const mcx_sim_result* result, int index);
double mcx_sim_result_mean_se(const mcx_sim_result* result, int index);
double mcx_sim_result_bias(const mcx_sim_result* result, int index);
double mcx_sim_result_mse(const mcx_sim_result* result, int index);
double mcx_sim_result_ecp(const mcx_sim_result* result, int index);
int mcx_sim_result_reps_requested(const mcx_sim_result* result);
int mcx_sim_result_reps_used(const mcx_sim_result* result);
int mcx_sim_result_mask_redraws(const mcx_sim_result* result);
/* Raw per-replication estimates (rep in [0, reps_used)). */
double mcx_sim_result_estimate(const mcx_sim_result* result, int rep, int index);
/* Standardized estimates and per-parameter KS distance against the standard
 * normal; available when at least 30 replications converged, else NaN. */
double mcx_sim_result_standardized(const mcx_sim_result* result, int rep, int index);
double mcx_sim_result_ks(const mcx_sim_result* result, int index);

/* ---- power studies ------------------------------------------------------ */

/* config_json: scenario fields plus hypothesis, subject/missingness/effect
 * grids, alpha, reps, statistic ("loglik" or "q"). */
mcx_status mcx_power_run(const char* config_json, int threads, mcx_power_result** out);
void mcx_power_result_free(mcx_power_result* result);

int mcx_power_result_n_points(const mcx_power_result* result);
int mcx_power_result_subjects(const mcx_power_result* result, int point);
double mcx_power_result_miss_prob(const mcx_power_result* result, int point);
double mcx_power_result_effect(const mcx_power_result* result, int point);
double mcx_power_result_power(const mcx_power_result* result, int point);
int mcx_power_result_reps_used(const mcx_power_result* result, int point);
int mcx_power_result_failures(const mcx_power_result* result, int point);
int mcx_power_result_df(const mcx_power_result* result);
mcx_status mcx_power_result_hypothesis(const mcx_power_result* result, char* buf, size_t buflen);

#ifdef __cplusplus
}
#endif

#endif /* MCX_H */
