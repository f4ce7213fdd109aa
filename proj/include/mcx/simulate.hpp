#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mcx/design.hpp"
#include "mcx/inference.hpp"
#include "mcx/mcem.hpp"
#include "mcx/rng.hpp"

namespace mcx {

// How responses are removed: independently entry by entry, or whole
// (subject, period) cells at once (all m variates together).
enum class MissMode { element, block };

MissMode miss_mode_from_string(const std::string& text);
std::string to_string(MissMode mode);

struct SimScenario {
  Design design;
  Params truth;
  double miss_prob = 0.0;
  MissMode miss_mode = MissMode::element;
  int reps = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

// Complete dataset y = X beta + Z b + e for replication rep_index,
// deterministic in (scenario.seed, rep_index).
TrialData generate_dataset(const SimScenario& scenario, int rep_index);

// Masks entries (element mode) or whole subject-period cells (block mode)
// with the given probability. A mask that leaves the observed design rank
// deficient or without any observed entry is redrawn, up to 50 consecutive
// rejections; redraws are counted into *redraws when provided.
TrialData apply_missingness(const Design& design, const TrialData& data, double miss_prob,
                            MissMode mode, Rng& rng, int* redraws = nullptr);

struct ParameterSummary {
  std::string name;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double mean_se = 0.0;
  double bias = 0.0;  // |mean(estimate) - truth|
  double mse = 0.0;
  double ecp = 0.0;  // fraction of 95% Wald intervals covering the truth
};

struct RepSummary {
  std::vector<ParameterSummary> parameters;
  int reps_requested = 0;
  int reps_used = 0;       // converged replications entering the averages
  int non_converged = 0;
  int mask_redraws = 0;
  // Raw per-replication estimates (rows: converged reps; cols: parameters),
  // kept for normality diagnostics and external plotting.
  Eigen::MatrixXd estimates;
};

// Full replication study: generate, mask, fit, MI standard errors, Wald
// intervals; aggregates bias / MSE / ECP per parameter. Replications run in
// parallel with per-replication rng substreams; aggregation is order-fixed.
RepSummary run_replications(const SimScenario& scenario, const McemOptions& fit_opts,
                            const MiOptions& mi_opts, int threads);

struct NormalityDiagnostic {
  Eigen::MatrixXd standardized;  // (estimate - column mean) / column sd
  Eigen::VectorXd ks_distance;   // per parameter, against the standard normal
};

// Standardizes per-parameter estimates across replications. Requires at
// least 30 rows and nonzero spread in every column.
NormalityDiagnostic normality_diagnostic(const Eigen::MatrixXd& estimates);

struct Hypothesis {
  enum class Kind { treatment_zero, response_all_zero, response_pair };
  Kind kind = Kind::treatment_zero;
  int pair_a = 1, pair_b = 2;  // 1-based response variates for response_pair

  Restriction restriction(const Design& design) const;
  int df(const Design& design) const;
  static Hypothesis parse(const std::string& text);
  std::string name() const;
};

struct PowerConfig {
  SimScenario base;              // miss_prob/reps here are defaults for grid cells
  Hypothesis hypothesis;
  std::vector<int> subjects;     // per-sequence subject counts to sweep
  std::vector<double> miss_probs;
  std::vector<double> effects;   // values substituted into the tested treatment
                                 // coefficient; empty = keep the scenario truth
  double alpha = 0.05;
  int reps = 1000;
  bool use_q_statistic = false;
};

struct PowerPoint {
  int subjects_per_seq = 0;
  double miss_prob = 0.0;
  double effect = 0.0;
  double power = 0.0;
  int reps_used = 0;
  int failures = 0;  // replications dropped (non-convergence or test failure)
};

// Empirical power over the (subjects x missingness x effect) grid: fit full
// and restricted models per replication, reject when the statistic exceeds
// the chi-square critical value.
std::vector<PowerPoint> power_study(const PowerConfig& config, const McemOptions& fit_opts,
                                    int threads);

}  // namespace mcx
