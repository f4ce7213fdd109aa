#include "mcx/mcx.h"

#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mcx/error.hpp"
#include "mcx/inference.hpp"
#include "mcx/io.hpp"
#include "mcx/parallel.hpp"
#include "mcx/simulate.hpp"

namespace {

thread_local std::string g_last_error;

mcx_status to_status(mcx::errc code) {
  switch (code) {
    case mcx::errc::invalid_argument: return MCX_ERR_INVALID;
    case mcx::errc::data: return MCX_ERR_DATA;
    case mcx::errc::numeric: return MCX_ERR_NUMERIC;
    case mcx::errc::io: return MCX_ERR_IO;
  }
  return MCX_ERR_INVALID;
}

template <typename F>
mcx_status guarded(F&& body) {
  try {
    body();
    return MCX_OK;
  } catch (const mcx::error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MCX_ERR_INVALID;
  } catch (...) {
    g_last_error = "unknown error";
    return MCX_ERR_INVALID;
  }
}

mcx_status copy_name(const std::string& name, char* buf, size_t buflen) {
  if (buf == nullptr || buflen == 0) {
    g_last_error = "output buffer is null or empty";
    return MCX_ERR_INVALID;
  }
  std::snprintf(buf, buflen, "%s", name.c_str());
  return MCX_OK;
}

constexpr double k_nan = std::numeric_limits<double>::quiet_NaN();

mcx::McemOptions to_core(const mcx_fit_options& o) {
  mcx::McemOptions c;
  c.seed = o.seed;
  c.mc_initial = o.mc_initial;
  c.warmup_iters = o.warmup_iters;
  c.mc_main = o.mc_main;
  c.mc_polish = o.mc_polish;
  c.max_iter = o.max_iter;
  c.tol = o.tol;
  c.tol_window = o.tol_window;
  c.var_floor = o.var_floor;
  return c;
}

mcx::MiOptions to_core(const mcx_mi_options& o) {
  mcx::MiOptions c;
  c.seed = o.seed;
  c.imputations = o.imputations;
  c.burn_in = o.burn_in;
  c.repetitions = o.repetitions;
  return c;
}

}  // namespace

struct mcx_design {
  mcx::DesignSpec spec;
};

struct mcx_data {
  const mcx_design* origin = nullptr;
  std::shared_ptr<mcx::Dataset> dataset;
};

struct mcx_fit {
  const mcx_data* origin = nullptr;
  std::optional<mcx::Design> design;
  std::optional<mcx::DesignMatrices> full_mats;
  std::optional<mcx::DesignMatrices> model_mats;
  bool restricted = false;
  mcx::FitResult fit;
  mcx::FitReport report;
  std::optional<mcx::MiResult> mi;
  std::vector<double> pvalues;
};

struct mcx_sim_result {
  mcx::RepSummary summary;
  Eigen::MatrixXd standardized;
  Eigen::VectorXd ks;
  bool has_diag = false;
};

struct mcx_power_result {
  std::vector<mcx::PowerPoint> points;
  std::string hypothesis;
  int df = 0;
};

extern "C" {

const char* mcx_version(void) { return MCX_VERSION; }

const char* mcx_last_error(void) { return g_last_error.c_str(); }

mcx_status mcx_design_from_json(const char* json_text, mcx_design** out) {
  return guarded([&] {
    if (json_text == nullptr || out == nullptr) mcx::throw_invalid("null argument");
    auto handle = std::make_unique<mcx_design>();
    handle->spec = mcx::design_spec_from_json(json_text);
    *out = handle.release();
  });
}

void mcx_design_free(mcx_design* design) { delete design; }

int mcx_design_sequences(const mcx_design* d) { return d ? d->spec.sequences() : 0; }
int mcx_design_periods(const mcx_design* d) { return d ? d->spec.periods : 0; }
int mcx_design_treatments(const mcx_design* d) { return d ? d->spec.treatments() : 0; }
int mcx_design_responses(const mcx_design* d) { return d ? d->spec.responses() : 0; }

int mcx_design_n_coef(const mcx_design* d) {
  return d ? d->spec.periods + d->spec.treatments() + d->spec.responses() - 2 : 0;
}

mcx_status mcx_design_coef_name(const mcx_design* d, int index, char* buf, size_t buflen) {
  if (d == nullptr || index < 0 || index >= mcx_design_n_coef(d)) {
    g_last_error = "bad design handle or index";
    return MCX_ERR_INVALID;
  }
  return copy_name(d->spec.coef_names()[static_cast<std::size_t>(index)], buf, buflen);
}

mcx_status mcx_data_read_csv(const mcx_design* design, const char* path, int log_transform,
                             mcx_data** out) {
  return guarded([&] {
    if (design == nullptr || path == nullptr || out == nullptr) mcx::throw_invalid("null argument");
    auto handle = std::make_unique<mcx_data>();
    handle->origin = design;
    handle->dataset =
        std::make_shared<mcx::Dataset>(mcx::read_dataset_csv(design->spec, path, log_transform != 0));
    *out = handle.release();
  });
}

mcx_status mcx_data_write_csv(const mcx_data* data, const char* path) {
  return guarded([&] {
    if (data == nullptr || path == nullptr) mcx::throw_invalid("null argument");
    mcx::write_dataset_csv(data->origin->spec, data->dataset->design, data->dataset->data,
                           data->dataset->subject_labels, path);
  });
}

void mcx_data_free(mcx_data* data) { delete data; }

long mcx_data_observed(const mcx_data* d) { return d ? d->dataset->data.total_observed() : 0; }
long mcx_data_missing(const mcx_data* d) { return d ? d->dataset->data.total_missing() : 0; }

int mcx_data_subjects(const mcx_data* d, int sequence) {
  if (d == nullptr || sequence < 0 || sequence >= d->dataset->design.sequences()) return 0;
  return d->dataset->design.subjects(sequence);
}

double mcx_data_missing_fraction(const mcx_data* d, int sequence) {
  if (d == nullptr) return k_nan;
  if (sequence < 0) return d->dataset->data.missing_fraction();
  if (sequence >= d->dataset->design.sequences()) return k_nan;
  return d->dataset->data.missing_fraction(sequence);
}

void mcx_fit_options_default(mcx_fit_options* options) {
  if (options == nullptr) return;
  const mcx::McemOptions d;
  options->seed = d.seed;
  options->mc_initial = d.mc_initial;
  options->warmup_iters = d.warmup_iters;
  options->mc_main = d.mc_main;
  options->mc_polish = d.mc_polish;
  options->max_iter = d.max_iter;
  options->tol = d.tol;
  options->tol_window = d.tol_window;
  options->var_floor = d.var_floor;
}

void mcx_mi_options_default(mcx_mi_options* options) {
  if (options == nullptr) return;
  const mcx::MiOptions d;
  options->seed = d.seed;
  options->imputations = d.imputations;
  options->burn_in = d.burn_in;
  options->repetitions = d.repetitions;
}

mcx_status mcx_fit_run(const mcx_design* design, const mcx_data* data,
                       const mcx_fit_options* options, const char* restriction, mcx_fit** out) {
  return guarded([&] {
    if (design == nullptr || data == nullptr || options == nullptr || out == nullptr)
      mcx::throw_invalid("null argument");
    if (data->origin != design) mcx::throw_invalid("data was read with a different design handle");
    auto handle = std::make_unique<mcx_fit>();
    handle->origin = data;
    handle->design = data->dataset->design;
    handle->full_mats = mcx::build_design_matrices(*handle->design);
    const mcx::McemOptions opts = to_core(*options);
    const std::string spec = restriction == nullptr ? "" : restriction;
    if (spec.empty()) {
      handle->model_mats = handle->full_mats;
      handle->fit = mcx::mcem_fit(*handle->design, *handle->full_mats, data->dataset->data, opts);
    } else {
      const mcx::Restriction r = mcx::Restriction::parse(spec, *handle->design);
      handle->restricted = true;
      handle->model_mats = handle->full_mats->transformed(r.transform(handle->design->n_coef()));
      handle->fit = mcx::restricted_fit(*handle->design, *handle->full_mats, data->dataset->data, opts, r);
    }
    handle->report = mcx::fit_report(handle->fit, *handle->design, *handle->model_mats, data->dataset->data);
    handle->pvalues.assign(static_cast<std::size_t>(handle->design->n_coef()), k_nan);
    *out = handle.release();
  });
}

void mcx_fit_free(mcx_fit* fit) { delete fit; }

int mcx_fit_converged(const mcx_fit* f) { return f && f->fit.converged ? 1 : 0; }
int mcx_fit_iterations(const mcx_fit* f) { return f ? f->fit.iterations : 0; }
double mcx_fit_loglik(const mcx_fit* f) { return f ? f->fit.loglik : k_nan; }
int mcx_fit_n_coef(const mcx_fit* f) { return f ? f->design->n_coef() : 0; }

double mcx_fit_coef(const mcx_fit* f, int index) {
  if (f == nullptr || index < 0 || index >= f->design->n_coef()) return k_nan;
  return f->fit.full_beta()[index];
}

double mcx_fit_sigma_e2(const mcx_fit* f) { return f ? f->fit.params.sigma_e2 : k_nan; }
double mcx_fit_sigma_s2(const mcx_fit* f) { return f ? f->fit.params.sigma_s2 : k_nan; }
double mcx_fit_aic(const mcx_fit* f) { return f ? f->report.aic : k_nan; }
double mcx_fit_bic(const mcx_fit* f) { return f ? f->report.bic : k_nan; }
double mcx_fit_rmse(const mcx_fit* f) { return f ? f->report.rmse : k_nan; }

mcx_status mcx_fit_mi_se(mcx_fit* fit, const mcx_mi_options* options) {
  return guarded([&] {
    if (fit == nullptr || options == nullptr) mcx::throw_invalid("null argument");
    if (fit->restricted) mcx::throw_invalid("standard errors are reported for full-model fits only");
    fit->mi = mcx::mi_standard_errors(fit->fit, *fit->design, *fit->model_mats,
                                      fit->origin->dataset->data, to_core(*options));
  });
}

double mcx_fit_se(const mcx_fit* f, int index) {
  if (f == nullptr || !f->mi || index < 0 || index >= f->design->n_coef()) return k_nan;
  return f->mi->se[index];
}

double mcx_fit_se_sigma_e2(const mcx_fit* f) {
  if (f == nullptr || !f->mi) return k_nan;
  return f->mi->se[f->design->n_coef()];
}

double mcx_fit_se_sigma_s2(const mcx_fit* f) {
  if (f == nullptr || !f->mi) return k_nan;
  return f->mi->se[f->design->n_coef() + 1];
}

mcx_status mcx_fit_lrt_pvalues(mcx_fit* fit, const mcx_fit_options* options, int threads) {
  return guarded([&] {
    if (fit == nullptr || options == nullptr) mcx::throw_invalid("null argument");
    if (fit->restricted) mcx::throw_invalid("coefficient p-values are reported for full-model fits only");
    if (threads <= 0) threads = mcx::default_threads();
    fit->pvalues = mcx::coefficient_pvalues(*fit->design, *fit->full_mats, fit->origin->dataset->data,
                                            fit->fit, to_core(*options), threads);
  });
}

double mcx_fit_pvalue(const mcx_fit* f, int index) {
  if (f == nullptr || index < 0 || index >= static_cast<int>(f->pvalues.size())) return k_nan;
  return f->pvalues[static_cast<std::size_t>(index)];
}

mcx_status mcx_lrt(const mcx_fit* full, const mcx_fit* reduced, mcx_test_result* out) {
  return guarded([&] {
    if (full == nullptr || reduced == nullptr || out == nullptr) mcx::throw_invalid("null argument");
    if (full->origin != reduced->origin) mcx::throw_invalid("fits come from different data handles");
    const int df = static_cast<int>(full->fit.params.beta.size() - reduced->fit.params.beta.size());
    if (df < 1) mcx::throw_invalid("models are not nested (reduced model is not smaller)");
    const mcx::TestResult t = mcx::lrt(full->fit, reduced->fit, df);
    *out = {t.statistic, t.df, t.p_value, t.full_loglik, t.reduced_loglik};
  });
}

mcx_status mcx_lrt_q(const mcx_fit* full, const mcx_fit* reduced, const mcx_fit_options* options,
                     mcx_test_result* out) {
  return guarded([&] {
    if (full == nullptr || reduced == nullptr || options == nullptr || out == nullptr)
      mcx::throw_invalid("null argument");
    if (full->origin != reduced->origin) mcx::throw_invalid("fits come from different data handles");
    if (full->restricted) mcx::throw_invalid("the first fit must be the full model");
    const mcx::TestResult t = mcx::lrt_q(*full->design, *full->full_mats, full->origin->dataset->data,
                                         full->fit, reduced->fit, to_core(*options));
    *out = {t.statistic, t.df, t.p_value, t.full_loglik, t.reduced_loglik};
  });
}

mcx_status mcx_simulate_run(const char* scenario_json, int threads, mcx_sim_result** out) {
  return guarded([&] {
    if (scenario_json == nullptr || out == nullptr) mcx::throw_invalid("null argument");
    const mcx::ScenarioConfig cfg = mcx::scenario_from_json(scenario_json);
    int t = threads > 0 ? threads : (cfg.threads > 0 ? cfg.threads : mcx::default_threads());
    auto handle = std::make_unique<mcx_sim_result>();
    handle->summary = mcx::run_replications(cfg.scenario, cfg.mcem, cfg.mi, t);
    if (handle->summary.reps_used >= 30) {
      const mcx::NormalityDiagnostic diag = mcx::normality_diagnostic(handle->summary.estimates);
      handle->standardized = diag.standardized;
      handle->ks = diag.ks_distance;
      handle->has_diag = true;
    }
    *out = handle.release();
  });
}

void mcx_sim_result_free(mcx_sim_result* result) { delete result; }

int mcx_sim_result_n_params(const mcx_sim_result* r) {
  return r ? static_cast<int>(r->summary.parameters.size()) : 0;
}

mcx_status mcx_sim_result_param_name(const mcx_sim_result* r, int index, char* buf, size_t buflen) {
  if (r == nullptr || index < 0 || index >= mcx_sim_result_n_params(r)) {
    g_last_error = "bad result handle or index";
    return MCX_ERR_INVALID;
  }
  return copy_name(r->summary.parameters[static_cast<std::size_t>(index)].name, buf, buflen);
}

#define MCX_SIM_GETTER(field)                                                      \
  (r == nullptr || index < 0 || index >= mcx_sim_result_n_params(r))               \
      ? k_nan                                                                      \
      : r->summary.parameters[static_cast<std::size_t>(index)].field

double mcx_sim_result_truth(const mcx_sim_result* r, int index) { return MCX_SIM_GETTER(truth); }
double mcx_sim_result_mean_estimate(const mcx_sim_result* r, int index) { return MCX_SIM_GETTER(mean_estimate); }
double mcx_sim_result_mean_se(const mcx_sim_result* r, int index) { return MCX_SIM_GETTER(mean_se); }
double mcx_sim_result_bias(const mcx_sim_result* r, int index) { return MCX_SIM_GETTER(bias); }
double mcx_sim_result_mse(const mcx_sim_result* r, int index) { return MCX_SIM_GETTER(mse); }
double mcx_sim_result_ecp(const mcx_sim_result* r, int index) { return MCX_SIM_GETTER(ecp); }

#undef MCX_SIM_GETTER

int mcx_sim_result_reps_requested(const mcx_sim_result* r) { return r ? r->summary.reps_requested : 0; }
int mcx_sim_result_reps_used(const mcx_sim_result* r) { return r ? r->summary.reps_used : 0; }
int mcx_sim_result_mask_redraws(const mcx_sim_result* r) { return r ? r->summary.mask_redraws : 0; }

double mcx_sim_result_estimate(const mcx_sim_result* r, int rep, int index) {
  if (r == nullptr || rep < 0 || rep >= r->summary.estimates.rows() || index < 0 ||
      index >= r->summary.estimates.cols())
    return k_nan;
  return r->summary.estimates(rep, index);
}

double mcx_sim_result_standardized(const mcx_sim_result* r, int rep, int index) {
  if (r == nullptr || !r->has_diag || rep < 0 || rep >= r->standardized.rows() || index < 0 ||
      index >= r->standardized.cols())
    return k_nan;
  return r->standardized(rep, index);
}

double mcx_sim_result_ks(const mcx_sim_result* r, int index) {
  if (r == nullptr || !r->has_diag || index < 0 || index >= r->ks.size()) return k_nan;
  return r->ks[index];
}

mcx_status mcx_power_run(const char* config_json, int threads, mcx_power_result** out) {
  return guarded([&] {
    if (config_json == nullptr || out == nullptr) mcx::throw_invalid("null argument");
    const mcx::PowerStudyConfig cfg = mcx::power_config_from_json(config_json);
    int t = threads > 0 ? threads : (cfg.threads > 0 ? cfg.threads : mcx::default_threads());
    auto handle = std::make_unique<mcx_power_result>();
    handle->points = mcx::power_study(cfg.power, cfg.mcem, t);
    handle->hypothesis = cfg.power.hypothesis.name();
    handle->df = cfg.power.hypothesis.df(cfg.power.base.design);
    *out = handle.release();
  });
}

void mcx_power_result_free(mcx_power_result* result) { delete result; }

int mcx_power_result_n_points(const mcx_power_result* r) {
  return r ? static_cast<int>(r->points.size()) : 0;
}

#define MCX_POWER_GETTER(field, bad)                                     \
  (r == nullptr || point < 0 || point >= mcx_power_result_n_points(r))  \
      ? (bad)                                                            \
      : r->points[static_cast<std::size_t>(point)].field

int mcx_power_result_subjects(const mcx_power_result* r, int point) { return MCX_POWER_GETTER(subjects_per_seq, 0); }
double mcx_power_result_miss_prob(const mcx_power_result* r, int point) { return MCX_POWER_GETTER(miss_prob, k_nan); }
double mcx_power_result_effect(const mcx_power_result* r, int point) { return MCX_POWER_GETTER(effect, k_nan); }
double mcx_power_result_power(const mcx_power_result* r, int point) { return MCX_POWER_GETTER(power, k_nan); }
int mcx_power_result_reps_used(const mcx_power_result* r, int point) { return MCX_POWER_GETTER(reps_used, 0); }
int mcx_power_result_failures(const mcx_power_result* r, int point) { return MCX_POWER_GETTER(failures, 0); }

#undef MCX_POWER_GETTER

int mcx_power_result_df(const mcx_power_result* r) { return r ? r->df : 0; }

mcx_status mcx_power_result_hypothesis(const mcx_power_result* r, char* buf, size_t buflen) {
  if (r == nullptr) {
    g_last_error = "bad result handle";
    return MCX_ERR_INVALID;
  }
  return copy_name(r->hypothesis, buf, buflen);
}

}  // extern "C"
