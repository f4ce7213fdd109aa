#include "mcx/simulate.hpp"

#include <cmath>
#include <limits>

#include "mcx/error.hpp"
#include "mcx/parallel.hpp"
#include "mcx/stats.hpp"

namespace mcx {

MissMode miss_mode_from_string(const std::string& text) {
  if (text == "element") return MissMode::element;
  if (text == "block") return MissMode::block;
  throw_invalid("miss mode: expected 'element' or 'block', got '" + text + "'");
}

std::string to_string(MissMode mode) { return mode == MissMode::element ? "element" : "block"; }

void SimScenario::validate() const {
  truth.validate(design);
  if (!(miss_prob >= 0.0 && miss_prob < 1.0)) throw_invalid("scenario: miss_prob must lie in [0, 1)");
  if (reps < 1) throw_invalid("scenario: reps must be >= 1");
  if (!(truth.sigma_e2 > 1e-12)) throw_invalid("scenario: sigma_e2 of the generator must exceed 1e-12");
}

TrialData generate_dataset(const SimScenario& scenario, int rep_index) {
  scenario.validate();
  const Design& design = scenario.design;
  const DesignMatrices mats = build_design_matrices(design);
  Rng rng = Rng(scenario.seed).substream(0xD5, static_cast<std::uint64_t>(rep_index));

  const double sd_s = std::sqrt(scenario.truth.sigma_s2);
  const double sd_e = std::sqrt(scenario.truth.sigma_e2);
  std::vector<Eigen::VectorXd> values;
  values.reserve(static_cast<std::size_t>(design.sequences()));
  for (int i = 0; i < design.sequences(); ++i) {
    const Eigen::VectorXd mu = mats.subject_block(i) * scenario.truth.beta;
    const int pm = design.per_subject();
    Eigen::VectorXd y(static_cast<long>(pm) * design.subjects(i));
    for (int q = 0; q < design.subjects(i); ++q) {
      const double b = sd_s * rng.normal();
      for (int r = 0; r < pm; ++r) y[static_cast<long>(q) * pm + r] = mu[r] + b + sd_e * rng.normal();
    }
    values.push_back(std::move(y));
  }
  return TrialData::complete(design, std::move(values));
}

namespace {

bool observed_design_ok(const Design& design, const DesignMatrices& mats,
                        const std::vector<std::vector<std::uint8_t>>& observed) {
  long n_obs = 0;
  for (const auto& seq : observed)
    for (auto o : seq) n_obs += o ? 1 : 0;
  const int n_coef = mats.n_coef();
  if (n_obs < n_coef) return false;
  Eigen::MatrixXd x(n_obs, n_coef);
  long row = 0;
  for (int i = 0; i < design.sequences(); ++i) {
    const auto& block = mats.subject_block(i);
    const int pm = design.per_subject();
    for (int k = 0; k < static_cast<int>(observed[static_cast<std::size_t>(i)].size()); ++k)
      if (observed[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]) x.row(row++) = block.row(k % pm);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  return qr.rank() == n_coef;
}

}  // namespace

TrialData apply_missingness(const Design& design, const TrialData& data, double miss_prob,
                            MissMode mode, Rng& rng, int* redraws) {
  if (!(miss_prob >= 0.0 && miss_prob < 1.0)) throw_invalid("apply_missingness: miss_prob must lie in [0, 1)");
  const DesignMatrices mats = build_design_matrices(design);
  const int pm = design.per_subject();
  const int m = design.responses();

  for (int attempt = 0; attempt < 50; ++attempt) {
    std::vector<std::vector<std::uint8_t>> observed;
    observed.reserve(static_cast<std::size_t>(design.sequences()));
    for (int i = 0; i < design.sequences(); ++i) {
      const auto& base = data.observed(i);
      std::vector<std::uint8_t> seq_mask(base.begin(), base.end());
      for (int q = 0; q < design.subjects(i); ++q) {
        if (mode == MissMode::element) {
          for (int r = 0; r < pm; ++r)
            if (rng.uniform() < miss_prob) seq_mask[static_cast<std::size_t>(q * pm + r)] = 0;
        } else {
          for (int j = 0; j < design.periods(); ++j) {
            if (rng.uniform() < miss_prob) {
              for (int l = 0; l < m; ++l) seq_mask[static_cast<std::size_t>(design.entry_index(q, j, l))] = 0;
            }
          }
        }
      }
      observed.push_back(std::move(seq_mask));
    }
    if (observed_design_ok(design, mats, observed)) {
      std::vector<Eigen::VectorXd> values;
      for (int i = 0; i < design.sequences(); ++i) values.push_back(data.values(i));
      return TrialData(design, std::move(values), std::move(observed));
    }
    if (redraws) ++(*redraws);
  }
  throw_numeric("apply_missingness: 50 consecutive masks left the observed design rank deficient");
}

RepSummary run_replications(const SimScenario& scenario, const McemOptions& fit_opts,
                            const MiOptions& mi_opts, int threads) {
  scenario.validate();
  fit_opts.validate();
  mi_opts.validate();
  const Design& design = scenario.design;
  const DesignMatrices mats = build_design_matrices(design);
  const int n_coef = design.n_coef();
  const int n_par = n_coef + 2;

  struct Outcome {
    bool ok = false;
    Eigen::VectorXd estimate;
    Eigen::VectorXd se;
    int redraws = 0;
  };
  std::vector<Outcome> outcomes(static_cast<std::size_t>(scenario.reps));

  parallel_for(scenario.reps, threads, [&](int rep) {
    Outcome& out = outcomes[static_cast<std::size_t>(rep)];
    const TrialData complete = generate_dataset(scenario, rep);
    Rng mask_rng = Rng(scenario.seed).substream(0xA7, static_cast<std::uint64_t>(rep));
    const TrialData data =
        apply_missingness(design, complete, scenario.miss_prob, scenario.miss_mode, mask_rng, &out.redraws);

    McemOptions opts = fit_opts;
    opts.seed = detail::mix64(fit_opts.seed ^ detail::mix64(static_cast<std::uint64_t>(rep) + 0x51));
    const FitResult fit = mcem_fit(design, mats, data, opts);
    if (!fit.converged) return;

    MiOptions mio = mi_opts;
    mio.seed = detail::mix64(mi_opts.seed ^ detail::mix64(static_cast<std::uint64_t>(rep) + 0xB3));
    const MiResult mi = mi_standard_errors(fit, design, mats, data, mio);

    out.estimate = Eigen::VectorXd(n_par);
    out.estimate.head(n_coef) = fit.params.beta;
    out.estimate[n_coef] = fit.params.sigma_e2;
    out.estimate[n_coef + 1] = fit.params.sigma_s2;
    out.se = mi.se;
    out.ok = true;
  });

  RepSummary summary;
  summary.reps_requested = scenario.reps;
  Eigen::VectorXd truth(n_par);
  truth.head(n_coef) = scenario.truth.beta;
  truth[n_coef] = scenario.truth.sigma_e2;
  truth[n_coef + 1] = scenario.truth.sigma_s2;

  std::vector<const Outcome*> used;
  for (const auto& o : outcomes) {
    summary.mask_redraws += o.redraws;
    if (o.ok) used.push_back(&o);
    else ++summary.non_converged;
  }
  summary.reps_used = static_cast<int>(used.size());
  if (used.empty()) throw_numeric("run_replications: no replication converged");

  summary.estimates = Eigen::MatrixXd(static_cast<long>(used.size()), n_par);
  for (std::size_t r = 0; r < used.size(); ++r) summary.estimates.row(static_cast<long>(r)) = used[r]->estimate;

  auto names = design.coef_names();
  names.emplace_back("sigma_e2");
  names.emplace_back("sigma_s2");
  const double k = static_cast<double>(used.size());
  for (int j = 0; j < n_par; ++j) {
    ParameterSummary ps;
    ps.name = names[static_cast<std::size_t>(j)];
    ps.truth = truth[j];
    double sum_est = 0.0, sum_se = 0.0, sum_sq = 0.0;
    int covered = 0;
    for (const Outcome* o : used) {
      sum_est += o->estimate[j];
      sum_se += o->se[j];
      sum_sq += (o->estimate[j] - truth[j]) * (o->estimate[j] - truth[j]);
      const Interval ci = wald_ci(o->estimate[j], o->se[j], 0.95);
      if (ci.lo <= truth[j] && truth[j] <= ci.hi) ++covered;
    }
    ps.mean_estimate = sum_est / k;
    ps.mean_se = sum_se / k;
    ps.bias = std::fabs(ps.mean_estimate - truth[j]);
    ps.mse = sum_sq / k;
    ps.ecp = static_cast<double>(covered) / k;
    summary.parameters.push_back(std::move(ps));
  }
  return summary;
}

NormalityDiagnostic normality_diagnostic(const Eigen::MatrixXd& estimates) {
  if (estimates.rows() < 30) throw_invalid("normality_diagnostic: need at least 30 replications");
  NormalityDiagnostic out;
  out.standardized = Eigen::MatrixXd(estimates.rows(), estimates.cols());
  out.ks_distance = Eigen::VectorXd(estimates.cols());
  for (long j = 0; j < estimates.cols(); ++j) {
    const double mean = estimates.col(j).mean();
    const double var = (estimates.col(j).array() - mean).square().sum() / static_cast<double>(estimates.rows() - 1);
    if (!(var > 1e-24)) throw_numeric("normality_diagnostic: parameter column has zero spread");
    const double sd = std::sqrt(var);
    out.standardized.col(j) = (estimates.col(j).array() - mean) / sd;
    std::vector<double> col(out.standardized.col(j).data(),
                            out.standardized.col(j).data() + estimates.rows());
    out.ks_distance[j] = ks_distance_normal(std::move(col));
  }
  return out;
}

Restriction Hypothesis::restriction(const Design& design) const {
  switch (kind) {
    case Kind::treatment_zero:
      return Restriction::parse("treatment", design);
    case Kind::response_all_zero:
      return Restriction::parse("response", design);
    case Kind::response_pair:
      return Restriction::parse("response:" + std::to_string(pair_a) + "=" + std::to_string(pair_b), design);
  }
  throw_invalid("hypothesis: unknown kind");
}

int Hypothesis::df(const Design& design) const {
  return restriction(design).df(design.n_coef());
}

Hypothesis Hypothesis::parse(const std::string& text) {
  Hypothesis h;
  if (text == "treatment") {
    h.kind = Kind::treatment_zero;
  } else if (text == "response-all") {
    h.kind = Kind::response_all_zero;
  } else if (text.rfind("response-pair:", 0) == 0) {
    h.kind = Kind::response_pair;
    const std::string body = text.substr(14);
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw_invalid("hypothesis: expected response-pair:A=B");
    try {
      h.pair_a = std::stoi(body.substr(0, eq));
      h.pair_b = std::stoi(body.substr(eq + 1));
    } catch (const std::exception&) {
      throw_invalid("hypothesis: expected response-pair:A=B with integer labels");
    }
  } else {
    throw_invalid("hypothesis: unknown specification '" + text + "'");
  }
  return h;
}

std::string Hypothesis::name() const {
  switch (kind) {
    case Kind::treatment_zero:
      return "treatment";
    case Kind::response_all_zero:
      return "response-all";
    case Kind::response_pair:
      return "response-pair:" + std::to_string(pair_a) + "=" + std::to_string(pair_b);
  }
  return "?";
}

std::vector<PowerPoint> power_study(const PowerConfig& config, const McemOptions& fit_opts,
                                    int threads) {
  config.base.validate();
  fit_opts.validate();
  if (config.subjects.empty()) throw_invalid("power_study: subjects grid is empty");
  if (config.miss_probs.empty()) throw_invalid("power_study: missingness grid is empty");
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw_invalid("power_study: alpha must lie in (0,1)");
  if (config.reps < 1) throw_invalid("power_study: reps must be >= 1");

  const int p = config.base.design.periods();
  const int treatment_col = 1 + (p - 1);
  std::vector<double> effects = config.effects;
  if (effects.empty()) {
    double current = 0.0;
    if (config.hypothesis.kind == Hypothesis::Kind::treatment_zero)
      current = config.base.truth.beta[treatment_col];
    effects.push_back(current);
  } else if (config.hypothesis.kind != Hypothesis::Kind::treatment_zero) {
    throw_invalid("power_study: effect grids are supported for the treatment hypothesis only");
  }

  std::vector<PowerPoint> points;
  int point_index = 0;
  for (int n_subj : config.subjects) {
    for (double miss : config.miss_probs) {
      for (double effect : effects) {
        SimScenario scen = config.base;
        scen.design = config.base.design.with_subjects(
            std::vector<int>(static_cast<std::size_t>(config.base.design.sequences()), n_subj));
        scen.miss_prob = miss;
        scen.reps = config.reps;
        scen.seed = detail::mix64(config.base.seed ^ detail::mix64(static_cast<std::uint64_t>(point_index) + 0xE1));
        if (config.hypothesis.kind == Hypothesis::Kind::treatment_zero)
          scen.truth.beta[treatment_col] = effect;
        scen.validate();

        const DesignMatrices mats = build_design_matrices(scen.design);
        const Restriction restriction = config.hypothesis.restriction(scen.design);
        const int df = config.hypothesis.df(scen.design);

        enum class RepResult : std::uint8_t { failed, retained, rejected };
        std::vector<RepResult> results(static_cast<std::size_t>(config.reps), RepResult::failed);

        parallel_for(config.reps, threads, [&](int rep) {
          try {
            const TrialData complete = generate_dataset(scen, rep);
            Rng mask_rng = Rng(scen.seed).substream(0xA7, static_cast<std::uint64_t>(rep));
            const TrialData data =
                apply_missingness(scen.design, complete, scen.miss_prob, scen.miss_mode, mask_rng);

            McemOptions opts = fit_opts;
            opts.seed = detail::mix64(fit_opts.seed ^ detail::mix64(static_cast<std::uint64_t>(rep) + 0x51));
            const FitResult full = mcem_fit(scen.design, mats, data, opts);
            McemOptions opts_red = opts;
            opts_red.seed = detail::mix64(opts.seed + 0x77);
            const FitResult reduced = restricted_fit(scen.design, mats, data, opts_red, restriction);
            if (!full.converged || !reduced.converged) return;

            const TestResult test = config.use_q_statistic
                                        ? lrt_q(scen.design, mats, data, full, reduced, opts)
                                        : lrt(full, reduced, df);
            results[static_cast<std::size_t>(rep)] =
                test.p_value < config.alpha ? RepResult::rejected : RepResult::retained;
          } catch (const error&) {
            // leave marked failed
          }
        });

        PowerPoint pt;
        pt.subjects_per_seq = n_subj;
        pt.miss_prob = miss;
        pt.effect = effect;
        int used = 0, rejected = 0;
        for (auto r : results) {
          if (r == RepResult::failed) ++pt.failures;
          else {
            ++used;
            if (r == RepResult::rejected) ++rejected;
          }
        }
        pt.reps_used = used;
        if (used == 0) throw_numeric("power_study: no replication completed at a grid point");
        pt.power = static_cast<double>(rejected) / static_cast<double>(used);
        points.push_back(pt);
        ++point_index;
      }
    }
  }
  return points;
}

}  // namespace mcx
