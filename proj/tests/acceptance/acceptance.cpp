// Acceptance suite: end-to-end checks of the fitting engine, the inference
// machinery, the simulation harness, and the CLI. Prints one PASS/FAIL line
// per criterion; the exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mcx/conditional.hpp"
#include "mcx/design.hpp"
#include "mcx/error.hpp"
#include "mcx/inference.hpp"
#include "mcx/io.hpp"
#include "mcx/mcem.hpp"
#include "mcx/parallel.hpp"
#include "mcx/simulate.hpp"
#include "mcx/stats.hpp"
#include "oracles.hpp"

using namespace mcx;

namespace {

std::string g_cli;
std::filesystem::path g_scratch;
int g_threads = 2;

struct Outcome {
  bool pass;
  std::string detail;
};

Design reference_design(int n) { return Design(2, 2, 2, 4, {n, n}, {0, 1, 1, 0}); }

Params reference_truth() {
  Params p;
  p.beta = Eigen::VectorXd(6);
  p.beta << 4.5, 0.2, 1.06, 0.46, 1.09, 0.50;
  p.sigma_e2 = 1.44;
  p.sigma_s2 = 0.49;
  return p;
}

// --- criterion 1: complete-data fits match the profile-likelihood oracle ---

Outcome complete_data_oracle() {
  const int datasets = 50;
  const Design design = reference_design(50);
  std::vector<double> worst(static_cast<std::size_t>(datasets), 0.0);
  std::vector<std::string> errors(static_cast<std::size_t>(datasets));

  parallel_for(datasets, g_threads, [&](int k) {
    const SimScenario sc{design, reference_truth(), 0.0, MissMode::element, 1,
                         1000 + static_cast<std::uint64_t>(k)};
    const TrialData data = generate_dataset(sc, k);
    McemOptions opts;
    opts.tol = 1e-8;
    opts.max_iter = 5000;
    opts.seed = 77 + static_cast<std::uint64_t>(k);
    const FitResult fit = mcem_fit(design, data, opts);
    if (!fit.converged) {
      errors[static_cast<std::size_t>(k)] = "dataset " + std::to_string(k) + " did not converge";
      return;
    }
    const oracle::CompleteMl ml = oracle::complete_ml(design, {data.values(0), data.values(1)});
    double rel = 0.0;
    for (int j = 0; j < 6; ++j)
      rel = std::max(rel, std::fabs(fit.params.beta[j] - ml.beta[j]) / std::fabs(ml.beta[j]));
    rel = std::max(rel, std::fabs(fit.params.sigma_e2 - ml.sigma_e2) / ml.sigma_e2);
    rel = std::max(rel, std::fabs(fit.params.sigma_s2 - ml.sigma_s2) / ml.sigma_s2);
    worst[static_cast<std::size_t>(k)] = rel;
  });

  double rel = 0.0;
  for (double w : worst) rel = std::max(rel, w);
  for (const auto& e : errors)
    if (!e.empty()) return {false, e};
  std::ostringstream ss;
  ss << "max relative error " << rel << " over " << datasets << " datasets (tolerance 1e-3)";
  return {rel <= 1e-3, ss.str()};
}

// --- criterion 2: desk-scale replication study, 15% and 35% missing ---

Outcome table_reproduction() {
  McemOptions fit_opts;  // defaults: c 100 -> 1000, polish 5000
  MiOptions mi_opts;     // defaults: 100 imputations, burn-in 1000, m0 = 5

  SimScenario sc{reference_design(50), reference_truth(), 0.15, MissMode::element, 100, 1};
  const RepSummary at15 = run_replications(sc, fit_opts, mi_opts, g_threads);
  sc.miss_prob = 0.35;
  sc.seed = 2;
  const RepSummary at35 = run_replications(sc, fit_opts, mi_opts, g_threads);

  std::ostringstream ss;
  bool ok = true;
  ss << "reps used " << at15.reps_used << "/" << at15.reps_requested << "; ";
  if (at15.reps_used < 90) {
    ok = false;
    ss << "too many non-converged replications; ";
  }
  double max_bias = 0.0;
  for (int j = 0; j < 6; ++j) max_bias = std::max(max_bias, at15.parameters[static_cast<std::size_t>(j)].bias);
  ss << "max fixed-effect bias " << max_bias << " (<= 0.08); ";
  if (max_bias > 0.08) ok = false;

  const double se0 = at15.parameters[0].mean_se;
  ss << "mean SE(intercept) " << se0 << " (0.11 +/- 0.03); ";
  if (se0 < 0.08 || se0 > 0.14) ok = false;

  double ecp_lo = 1.0, ecp_hi = 0.0;
  for (const auto& p : at15.parameters) {
    ecp_lo = std::min(ecp_lo, p.ecp);
    ecp_hi = std::max(ecp_hi, p.ecp);
  }
  ss << "ECP range [" << ecp_lo << ", " << ecp_hi << "] (within [0.85, 0.99]); ";
  if (ecp_lo < 0.85 || ecp_hi > 0.99) ok = false;

  const double ecp15 = at15.parameters[1].ecp;  // Period1
  const double ecp35 = at35.parameters[1].ecp;
  ss << "ECP(Period1) 15%: " << ecp15 << " vs 35%: " << ecp35;
  if (!(ecp35 < ecp15)) ok = false;
  return {ok, ss.str()};
}

// --- criterion 3: EM ascent at fixed c = 5000 ---

Outcome em_monotonicity() {
  int steps = 0, violations = 0;
  std::vector<std::pair<int, int>> counts(10);
  parallel_for(10, g_threads, [&](int run) {
    const std::uint64_t seed = 100 + static_cast<std::uint64_t>(run);
    const SimScenario sc{reference_design(50), reference_truth(), 0.15, MissMode::element, 1, seed};
    TrialData data = generate_dataset(sc, 0);
    Rng mask_rng(seed + 7);
    data = apply_missingness(sc.design, data, 0.15, MissMode::element, mask_rng);
    McemOptions opts;
    opts.mc_initial = 5000;
    opts.warmup_iters = 0;
    opts.mc_main = 5000;
    opts.mc_polish = 5000;
    opts.max_iter = 20;
    opts.tol = 1e-12;  // run the whole budget
    opts.seed = seed;
    const FitResult fit = mcem_fit(sc.design, data, opts);
    int s = 0, v = 0;
    for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t) {
      ++s;
      if (fit.loglik_trace[t] < fit.loglik_trace[t - 1] - 0.05) ++v;
    }
    counts[static_cast<std::size_t>(run)] = {s, v};
  });
  for (const auto& [s, v] : counts) {
    steps += s;
    violations += v;
  }
  std::ostringstream ss;
  ss << violations << " descent steps beyond slack 0.05 out of " << steps << " (<= 5% allowed)";
  return {violations * 20 <= steps, ss.str()};
}

// --- criterion 4: conditional laws against brute force; Gibbs stationarity ---

Outcome conditional_exactness() {
  // All missing patterns of one subject with pm = 4.
  Params p;
  p.beta = Eigen::VectorXd(3);
  p.beta << 1.1, -0.6, 0.4;
  p.sigma_e2 = 1.2;
  p.sigma_s2 = 0.75;
  const Design d(1, 2, 1, 2, {1}, {0, 0});
  const DesignMatrices mats = build_design_matrices(d);
  const Eigen::VectorXd mu = mats.subject_block(0) * p.beta;
  const Eigen::MatrixXd sigma = subject_covariance(p, 2, 2);
  Rng gen(42);
  Eigen::VectorXd y(4);
  for (int k = 0; k < 4; ++k) y[k] = mu[k] + gen.normal();

  double worst = 0.0;
  for (int bits = 0; bits < 15; ++bits) {  // bit set = observed
    std::vector<std::uint8_t> mask(4);
    std::vector<int> miss, obs;
    for (int k = 0; k < 4; ++k) {
      mask[static_cast<std::size_t>(k)] = (bits >> k) & 1;
      (mask[static_cast<std::size_t>(k)] ? obs : miss).push_back(k);
    }
    const TrialData data(d, {y}, {mask});
    const ConditionalNormal cn = missing_conditional(p, d, mats, 0, data);
    Eigen::VectorXd y_obs(static_cast<long>(obs.size()));
    for (std::size_t u = 0; u < obs.size(); ++u) y_obs[static_cast<long>(u)] = y[obs[u]];
    const oracle::Conditional ref = oracle::condition(mu, sigma, miss, obs, y_obs);
    worst = std::max(worst, (cn.mean - ref.mean).cwiseAbs().maxCoeff());
    worst = std::max(worst, (cn.cov - ref.cov).cwiseAbs().maxCoeff());
  }
  if (worst > 1e-10) {
    return {false, "conditional law deviates from the partitioned-inverse oracle by " + std::to_string(worst)};
  }

  // Gibbs chain moments against the exact conditional, 1e5 draws, 3 MC SEs.
  const TrialData data(d, {y}, {std::vector<std::uint8_t>{0, 1, 0, 1}});
  const ConditionalNormal exact = missing_conditional(p, d, mats, 0, data);
  const auto miss = missing_indices(data, 0);
  const int burn = 1000, keep = 100000;
  Rng rng(2027);
  Eigen::VectorXd work = y;
  for (long u = 0; u < 2; ++u) work[miss[static_cast<std::size_t>(u)]] = exact.mean[u];
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(2, 2);
  std::vector<double> chain0;
  chain0.reserve(keep);
  for (int sweep = 0; sweep < burn + keep; ++sweep) {
    const Eigen::VectorXd b = sample_b_given_y(p, d, mats, 0, work, rng);
    const Eigen::VectorXd v = sample_ymis_given_b(p, d, mats, 0, data, b, rng);
    for (long u = 0; u < 2; ++u) work[miss[static_cast<std::size_t>(u)]] = v[u];
    if (sweep >= burn) {
      m1 += v;
      m2 += v * v.transpose();
      chain0.push_back(v[0]);
    }
  }
  m1 /= keep;
  m2 = m2 / keep - m1 * m1.transpose();
  double num = 0.0, den = 0.0;
  for (int k = 0; k + 1 < keep; ++k) {
    num += (chain0[static_cast<std::size_t>(k)] - m1[0]) * (chain0[static_cast<std::size_t>(k + 1)] - m1[0]);
    den += (chain0[static_cast<std::size_t>(k)] - m1[0]) * (chain0[static_cast<std::size_t>(k)] - m1[0]);
  }
  const double rho = std::max(0.0, num / den);
  const double inflate = std::sqrt((1.0 + rho) / (1.0 - rho));
  bool ok = true;
  double z_worst = 0.0;
  for (long u = 0; u < 2; ++u) {
    const double z_mean = std::fabs(m1[u] - exact.mean[u]) / (std::sqrt(exact.cov(u, u) / keep) * inflate);
    const double z_var =
        std::fabs(m2(u, u) - exact.cov(u, u)) / (exact.cov(u, u) * std::sqrt(2.0 / keep) * inflate);
    z_worst = std::max(z_worst, std::max(z_mean, z_var));
  }
  const double se_cov =
      std::sqrt((exact.cov(0, 0) * exact.cov(1, 1) + exact.cov(0, 1) * exact.cov(0, 1)) / keep) * inflate;
  z_worst = std::max(z_worst, std::fabs(m2(0, 1) - exact.cov(0, 1)) / se_cov);
  if (z_worst > 3.0) ok = false;
  std::ostringstream ss;
  ss << "pattern deviation " << worst << " (<= 1e-10); Gibbs worst moment z = " << z_worst << " (<= 3)";
  return {ok, ss.str()};
}

// --- criterion 5: type-I error, p-value uniformity, power shape ---

struct TypeIResult {
  double rate = 0.0;
  double ks = 1.0;
  int used = 0;
};

TypeIResult type_one_error(int reps) {
  Params null_truth = reference_truth();
  null_truth.beta[2] = 0.0;  // treatment effect zero
  const Design design = reference_design(50);
  const DesignMatrices mats = build_design_matrices(design);
  const Restriction restriction = Restriction::parse("treatment", design);

  std::vector<double> pvals(static_cast<std::size_t>(reps), -1.0);
  parallel_for(reps, g_threads, [&](int rep) {
    try {
      const SimScenario sc{design, null_truth, 0.15, MissMode::element, 1, 5000};
      TrialData data = generate_dataset(sc, rep);
      Rng mask_rng = Rng(5000).substream(0xA7, static_cast<std::uint64_t>(rep));
      data = apply_missingness(design, data, 0.15, MissMode::element, mask_rng);
      McemOptions opts;
      opts.seed = detail::mix64(900 + static_cast<std::uint64_t>(rep));
      const FitResult full = mcem_fit(design, mats, data, opts);
      McemOptions ropts = opts;
      ropts.seed = detail::mix64(opts.seed + 3);
      const FitResult reduced = restricted_fit(design, mats, data, ropts, restriction);
      if (!full.converged || !reduced.converged) return;
      pvals[static_cast<std::size_t>(rep)] = lrt(full, reduced, 1).p_value;
    } catch (const mcx::error&) {
    }
  });

  TypeIResult out;
  std::vector<double> kept;
  int rejected = 0;
  for (double p : pvals) {
    if (p < 0.0) continue;
    kept.push_back(p);
    if (p < 0.05) ++rejected;
  }
  out.used = static_cast<int>(kept.size());
  out.rate = static_cast<double>(rejected) / std::max(1, out.used);

  // Kolmogorov-Smirnov distance of the null p-values against U(0,1).
  std::sort(kept.begin(), kept.end());
  double ks = 0.0;
  const double n = static_cast<double>(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    ks = std::max(ks, std::max(std::fabs(kept[i] - lo), std::fabs(hi - kept[i])));
  }
  out.ks = ks;
  return out;
}

Outcome test_calibration_and_power() {
  const int reps = 1000;
  const TypeIResult t1 = type_one_error(reps);
  std::ostringstream ss;
  bool ok = true;
  ss << "type-I rate " << t1.rate << " on " << t1.used << " reps (in [0.03, 0.07]); ";
  if (t1.rate < 0.03 || t1.rate > 0.07) ok = false;
  const double ks_crit = 1.6276 / std::sqrt(static_cast<double>(t1.used));
  ss << "p-value KS " << t1.ks << " (< " << ks_crit << "); ";
  if (t1.ks >= ks_crit) ok = false;

  // Power grid at effect 1.06.
  PowerConfig cfg{SimScenario{reference_design(50), reference_truth(), 0.15, MissMode::element, 1, 9001},
                  Hypothesis::parse("treatment"),
                  {20, 50, 100},
                  {0.15, 0.25, 0.35},
                  {1.06},
                  0.05,
                  160,
                  false};
  McemOptions fit_opts;
  const auto points = power_study(cfg, fit_opts, g_threads);
  const auto power_at = [&](int n, double q) {
    for (const auto& pt : points)
      if (pt.subjects_per_seq == n && std::fabs(pt.miss_prob - q) < 1e-12) return pt.power;
    return -1.0;
  };
  ss << "power:";
  for (const auto& pt : points)
    ss << " n" << pt.subjects_per_seq << "/m" << pt.miss_prob << "=" << pt.power;
  // Monotone within two binomial standard errors of an estimated difference.
  const double slack = 2.0 * std::sqrt(0.5 * 0.5 / cfg.reps) * std::sqrt(2.0);
  for (double q : {0.15, 0.25, 0.35}) {
    if (power_at(50, q) < power_at(20, q) - slack) ok = false;
    if (power_at(100, q) < power_at(50, q) - slack) ok = false;
  }
  for (int n : {20, 50, 100}) {
    if (power_at(n, 0.25) > power_at(n, 0.15) + slack) ok = false;
    if (power_at(n, 0.35) > power_at(n, 0.25) + slack) ok = false;
  }
  return {ok, ss.str()};
}

// --- criterion 6: multiple-imputation variance rule ---

Outcome mi_variance_rule() {
  // Exact arithmetic of the combination formula.
  const double delta = std::sqrt(2.0 * 0.004);
  std::vector<Eigen::VectorXd> within{Eigen::VectorXd::Constant(1, 0.01),
                                      Eigen::VectorXd::Constant(1, 0.02)};
  std::vector<Eigen::VectorXd> est{Eigen::VectorXd::Constant(1, 0.0),
                                   Eigen::VectorXd::Constant(1, delta)};
  const double total = mi_combine_variance(within, est, 2)[0];
  if (std::fabs(total - 0.021) > 1e-12)
    return {false, "combination rule gave " + std::to_string(total) + ", expected 0.021"};

  // Zero missing data: MI standard errors equal complete-data ML SEs.
  const Design design = reference_design(30);
  const DesignMatrices mats = build_design_matrices(design);
  const SimScenario sc{design, reference_truth(), 0.0, MissMode::element, 1, 60};
  const TrialData data = generate_dataset(sc, 0);
  McemOptions opts;
  opts.tol = 1e-8;
  opts.max_iter = 5000;
  const FitResult fit = mcem_fit(design, mats, data, opts);
  MiOptions mi;
  mi.imputations = 20;
  mi.burn_in = 10;
  mi.repetitions = 2;
  const MiResult res = mi_standard_errors(fit, design, mats, data, mi);
  const CompleteDataMl ml = complete_data_ml(design, mats, {data.values(0), data.values(1)});
  const double dev = (res.se - ml.variances.cwiseSqrt()).cwiseAbs().maxCoeff();
  std::ostringstream ss;
  ss << "rule exact; zero-missing MI SE vs ML SE deviation " << dev << " (<= 1e-6)";
  return {dev <= 1e-6, ss.str()};
}

// --- criterion 7: case-study workflow through the CLI ---

int run_cli(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

bool check_fit_outputs(const std::filesystem::path& dir, int coef_rows, std::string* why) {
  std::ifstream csv(dir / "fit.csv");
  if (!csv) {
    *why = "missing fit.csv";
    return false;
  }
  std::string line;
  std::getline(csv, line);
  if (line != "variable,estimate,se,p_value") {
    *why = "unexpected fit.csv header: " + line;
    return false;
  }
  int rows = 0;
  bool saw_sigma_e = false, saw_sigma_s = false;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    ++rows;
    if (line.rfind("sigma_e2,", 0) == 0) saw_sigma_e = true;
    if (line.rfind("sigma_s2,", 0) == 0) saw_sigma_s = true;
  }
  if (rows != coef_rows + 2 || !saw_sigma_e || !saw_sigma_s) {
    *why = "fit.csv has " + std::to_string(rows) + " rows, expected " + std::to_string(coef_rows + 2);
    return false;
  }
  std::ifstream stats(dir / "fit_stats.csv");
  if (!stats) {
    *why = "missing fit_stats.csv";
    return false;
  }
  std::getline(stats, line);
  if (line.find("aic") == std::string::npos || line.find("bic") == std::string::npos ||
      line.find("rmse") == std::string::npos) {
    *why = "fit_stats.csv lacks aic/bic/rmse columns";
    return false;
  }
  std::getline(stats, line);
  std::stringstream vals(line);
  std::string field;
  for (int c = 0; c < 4; ++c) {
    if (!std::getline(vals, field, ',')) {
      *why = "fit_stats.csv row too short";
      return false;
    }
    const double v = std::atof(field.c_str());
    if (!std::isfinite(v)) {
      *why = "non-finite report value " + field;
      return false;
    }
  }
  if (!std::filesystem::exists(dir / "fit_manifest.json")) {
    *why = "missing fit_manifest.json";
    return false;
  }
  return true;
}

Outcome case_study_workflow() {
  std::filesystem::create_directories(g_scratch);
  const char* design_json = R"({
  "treatments": ["placebo", "10mg", "25mg"],
  "responses": ["g1","g2","g3","g4","g5","g6","g7","g8","g9","g10"],
  "sequences": [
    {"label": "1", "treatments": ["10mg", "placebo", "25mg"], "subjects": 6},
    {"label": "2", "treatments": ["25mg", "10mg", "placebo"], "subjects": 6},
    {"label": "3", "treatments": ["placebo", "25mg", "10mg"], "subjects": 5}
  ]
})";
  const DesignSpec spec = design_spec_from_json(design_json);
  {
    std::ofstream out(g_scratch / "case_design.json");
    out << design_json;
  }
  const Design design = spec.make_design();

  // Synthetic responses shaped like the case study: small variances, strongly
  // negative response effects, near-null period and treatment effects.
  Params truth;
  truth.beta = Eigen::VectorXd::Zero(14);
  truth.beta[0] = 3.49;
  truth.beta[1] = 0.001;
  truth.beta[2] = 0.01;
  truth.beta[3] = -0.01;
  truth.beta[4] = 0.01;
  const double genes[9] = {-0.93, -1.59, -0.33, -0.04, -1.27, -1.48, -2.03, -0.82, -0.65};
  for (int g = 0; g < 9; ++g) truth.beta[5 + g] = genes[g];
  truth.sigma_e2 = 0.01;
  truth.sigma_s2 = 0.001;

  const SimScenario sc{design, truth, 0.0, MissMode::element, 1, 424242};
  const TrialData complete = generate_dataset(sc, 0);

  // Period-3 block pattern of the motivating trial: two subjects in each of
  // the first two sequences, one in the third.
  std::vector<std::vector<std::uint8_t>> mask;
  for (int i = 0; i < 3; ++i)
    mask.emplace_back(static_cast<std::size_t>(design.seq_len(i)), std::uint8_t{1});
  const auto drop_period3 = [&](int seq, int subj) {
    for (int l = 0; l < 10; ++l)
      mask[static_cast<std::size_t>(seq)][static_cast<std::size_t>(design.entry_index(subj, 2, l))] = 0;
  };
  drop_period3(0, 1);
  drop_period3(0, 4);
  drop_period3(1, 1);
  drop_period3(1, 3);
  drop_period3(2, 1);
  const TrialData base(design, {complete.values(0), complete.values(1), complete.values(2)}, mask);
  if (std::fabs(base.missing_fraction() - 50.0 / 510.0) > 1e-12)
    return {false, "constructed base missingness is not 50/510"};

  std::vector<std::vector<std::string>> labels;
  int sid = 0;
  for (int i = 0; i < 3; ++i) {
    std::vector<std::string> seq;
    for (int q = 0; q < design.subjects(i); ++q) seq.push_back("S" + std::to_string(++sid));
    labels.push_back(std::move(seq));
  }
  write_dataset_csv(spec, design, base, labels, (g_scratch / "case_base.csv").string());

  // Degraded variants layered on the base pattern.
  Rng rng_block(7331);
  const TrialData deg_block = apply_missingness(design, base, 0.125, MissMode::block, rng_block);
  Rng rng_elem(7332);
  const TrialData deg_elem = apply_missingness(design, base, 0.155, MissMode::element, rng_elem);
  write_dataset_csv(spec, design, deg_block, labels, (g_scratch / "case_block.csv").string());
  write_dataset_csv(spec, design, deg_elem, labels, (g_scratch / "case_elem.csv").string());

  std::ostringstream ss;
  ss << "missing fractions: base " << base.missing_fraction() << ", block " << deg_block.missing_fraction()
     << ", element " << deg_elem.missing_fraction() << "; ";
  if (std::fabs(deg_block.missing_fraction() - 0.21) > 0.05) return {false, ss.str() + "block run far from 21%"};
  if (std::fabs(deg_elem.missing_fraction() - 0.24) > 0.05) return {false, ss.str() + "element run far from 24%"};

  const std::string design_arg = " --design " + (g_scratch / "case_design.json").string();
  const std::string common = " --seed 11 --threads " + std::to_string(g_threads);
  struct Run {
    const char* data;
    const char* out;
    const char* extra;
  };
  const Run runs[] = {{"case_base.csv", "out_base", ""},
                      {"case_base.csv", "out_base_log", " --log-response"},
                      {"case_block.csv", "out_block", ""},
                      {"case_elem.csv", "out_elem", ""}};
  for (const Run& r : runs) {
    const std::filesystem::path out = g_scratch / r.out;
    std::filesystem::create_directories(out);
    const std::string args = "fit" + design_arg + " --data " + (g_scratch / r.data).string() +
                             " --out " + out.string() + common + r.extra;
    if (run_cli(args) != 0) return {false, ss.str() + "CLI fit failed for " + std::string(r.data) + r.extra};
    std::string why;
    if (!check_fit_outputs(out, 14, &why))
      return {false, ss.str() + "bad outputs for " + std::string(r.out) + ": " + why};
  }

  // Same seed twice: byte-identical outputs.
  const std::filesystem::path rerun = g_scratch / "out_base_rerun";
  std::filesystem::create_directories(rerun);
  if (run_cli("fit" + design_arg + " --data " + (g_scratch / "case_base.csv").string() + " --out " +
              rerun.string() + common) != 0)
    return {false, ss.str() + "CLI fit rerun failed"};
  for (const char* name : {"fit.csv", "fit_stats.csv", "fit.txt"}) {
    std::ifstream a(g_scratch / "out_base" / name), b(rerun / name);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    if (sa.str() != sb.str() || sa.str().empty())
      return {false, ss.str() + std::string(name) + " differs between identically seeded runs"};
  }

  // lrt subcommand on the base data.
  const std::filesystem::path lrt_out = g_scratch / "out_lrt";
  std::filesystem::create_directories(lrt_out);
  if (run_cli("lrt" + design_arg + " --data " + (g_scratch / "case_base.csv").string() +
              " --restriction response --out " + lrt_out.string() + common) != 0)
    return {false, ss.str() + "CLI lrt failed"};
  {
    std::ifstream csv(lrt_out / "lrt.csv");
    std::string header;
    std::getline(csv, header);
    if (header != "statistic,df,p_value,full_loglik,reduced_loglik,kind")
      return {false, ss.str() + "unexpected lrt.csv header"};
  }

  // simulate subcommand: one small scenario, Table-style summary columns.
  {
    std::ofstream cfg(g_scratch / "sim_config.json");
    cfg << R"({
  "design": {
    "treatments": ["A", "B"],
    "responses": 4,
    "sequences": [
      {"label": "1", "treatments": ["A", "B"], "subjects": 12},
      {"label": "2", "treatments": ["B", "A"], "subjects": 12}
    ]
  },
  "beta": [4.5, 0.2, 1.06, 0.46, 1.09, 0.50],
  "sigma_e2": 1.44, "sigma_s2": 0.49,
  "miss_prob": 0.25, "miss_mode": "element",
  "reps": 6, "seed": 5,
  "mcem": {"max_iter": 80},
  "mi": {"imputations": 10, "burn_in": 50, "repetitions": 2}
})";
  }
  const std::filesystem::path sim_out = g_scratch / "out_sim";
  std::filesystem::create_directories(sim_out);
  if (run_cli("simulate --config " + (g_scratch / "sim_config.json").string() + " --out " +
              sim_out.string() + common) != 0)
    return {false, ss.str() + "CLI simulate failed"};
  {
    std::ifstream csv(sim_out / "simulate.csv");
    std::string header;
    std::getline(csv, header);
    if (header != "parameter,truth,mean_mle,mean_se,bias,mse,ecp")
      return {false, ss.str() + "unexpected simulate.csv header"};
    int rows = 0;
    std::string line;
    while (std::getline(csv, line))
      if (!line.empty()) ++rows;
    if (rows != 8) return {false, ss.str() + "simulate.csv should list 8 parameters"};
  }

  // power subcommand smoke run.
  {
    std::ofstream cfg(g_scratch / "power_config.json");
    cfg << R"({
  "design": {
    "treatments": ["A", "B"],
    "responses": 4,
    "sequences": [
      {"label": "1", "treatments": ["A", "B"], "subjects": 12},
      {"label": "2", "treatments": ["B", "A"], "subjects": 12}
    ]
  },
  "beta": [4.5, 0.2, 1.06, 0.46, 1.09, 0.50],
  "sigma_e2": 1.44, "sigma_s2": 0.49,
  "hypothesis": "treatment",
  "subjects": [12], "miss_probs": [0.15], "effects": [1.06],
  "alpha": 0.05, "reps": 5, "seed": 6,
  "mcem": {"max_iter": 80}
})";
  }
  const std::filesystem::path pow_out = g_scratch / "out_power";
  std::filesystem::create_directories(pow_out);
  if (run_cli("power --config " + (g_scratch / "power_config.json").string() + " --out " +
              pow_out.string() + common) != 0)
    return {false, ss.str() + "CLI power failed"};
  {
    std::ifstream csv(pow_out / "power.csv");
    std::string header;
    std::getline(csv, header);
    if (header != "hypothesis,df,subjects,miss_prob,effect,reps_used,failures,power")
      return {false, ss.str() + "unexpected power.csv header"};
  }

  ss << "fit/lrt/simulate/power completed; identical seeds gave identical bytes";
  return {true, ss.str()};
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--cli") g_cli = argv[i + 1];
    else if (flag == "--scratch") g_scratch = argv[i + 1];
    else if (flag == "--threads") g_threads = std::atoi(argv[i + 1]);
  }
  if (g_scratch.empty()) g_scratch = std::filesystem::temp_directory_path() / "mcx_acceptance";
  if (g_threads <= 0) g_threads = default_threads();

  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"complete-data oracle equivalence", complete_data_oracle},
      {"replication study reproduction (15%/35%)", table_reproduction},
      {"EM monotonicity at fixed c=5000", em_monotonicity},
      {"conditional-law exactness and Gibbs stationarity", conditional_exactness},
      {"type-I error, p-value uniformity, power shape", test_calibration_and_power},
      {"MI variance combination rule", mi_variance_rule},
      {"case-study CLI workflow", case_study_workflow},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome{false, ""};
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
            .count() /
        1000.0;
    std::printf("[%s] %s (%.1fs) - %s\n", outcome.pass ? "PASS" : "FAIL", c.name, secs,
                outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  if (failures == 0) std::printf("all acceptance criteria passed\n");
  else std::printf("%d acceptance criteria FAILED\n", failures);
  return failures;
}
