#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mcx/conditional.hpp"
#include "mcx/design.hpp"
#include "mcx/rng.hpp"

namespace mcx {

struct McemOptions {
  int mc_initial = 100;   // Monte Carlo samples per iteration during warmup
  int warmup_iters = 20;  // iterations run at mc_initial
  int mc_main = 1000;     // samples per iteration after warmup
  int mc_polish = 5000;   // one extra E/M update after convergence
  int max_iter = 200;
  // Threshold on the max relative parameter change. The Monte Carlo noise
  // floor at mc_main samples sits near 1.5e-3 on reference problems, so the
  // default must stay above it; convergence is never declared while the
  // E-step still runs at the reduced warmup sample count.
  double tol = 5e-3;
  int tol_window = 3;     // consecutive iterations required under tol
  double var_floor = 1e-8;
  std::uint64_t seed = 20240101;

  int samples_for(int iteration) const {  // iteration is 1-based
    return iteration <= warmup_iters ? mc_initial : mc_main;
  }
  void validate() const;
};

// Per-sequence Monte Carlo averages from which both the M-step update and
// Q(gamma | gamma_t) for any candidate gamma can be evaluated. w_k denotes
// the sample-k working response y_k - Z b0_k.
struct SequenceStats {
  double avg_wtw = 0.0;        // avg_k ||w_k||^2
  Eigen::VectorXd avg_xtw;     // avg_k X' w_k
  double avg_btb = 0.0;        // avg_k b0_k' b0_k
  double tr_ztz_sigma0 = 0.0;  // Tr(Z'Z Sigma0) = pm * n_i * phi
  double tr_sigma0 = 0.0;      // Tr(Sigma0) = n_i * phi
  Eigen::VectorXd avg_y;       // avg_k completed response vector
  Eigen::VectorXd avg_b0;      // avg_k b0_k
};

struct EStepSummary {
  std::vector<SequenceStats> seq;
  double phi = 0.0;  // posterior variance of the random effects at params_t
  int draws = 0;
};

// Monte Carlo E-step: per sequence, draws c completions of the missing
// entries from their conditional law, forms b0 per completion, and returns
// the averages above. Sequences and subjects use pre-split rng substreams
// and fixed accumulation order, so results are reproducible.
EStepSummary estep(const Params& params, const Design& design, const DesignMatrices& mats,
                   const TrialData& data, int c, const Rng& rng);

// Closed-form maximizer of Q given the E-step averages. Variances are floored
// at var_floor.
Params mstep(const EStepSummary& stats, const DesignMatrices& mats, double var_floor);

// Q(candidate | params_t) evaluated from the E-step averages.
double q_value(const EStepSummary& stats, const DesignMatrices& mats, const Params& candidate);

// Starting values: OLS on the observed rows for beta, then a one-way ANOVA of
// the OLS residuals grouped by subject for the variance components
// (within-subject mean square -> sigma_e2, (between - within) / harmonic mean
// group size -> sigma_s2, both floored at 1e-6).
Params init_params(const Design& design, const DesignMatrices& mats, const TrialData& data);

struct FitResult {
  Params params;  // in model space (reduced length for restricted fits)
  bool converged = false;
  int iterations = 0;
  double loglik = 0.0;               // observed-data log-likelihood at params
  std::vector<double> loglik_trace;  // observed-data log-likelihood per iteration
  std::vector<double> change_trace;  // max relative parameter change per iteration
  Eigen::MatrixXd transform;         // full-space beta = transform * params.beta

  // params.beta mapped to the full coefficient space (restricted fits fill
  // constrained slots with their implied values).
  Eigen::VectorXd full_beta() const { return transform * params.beta; }
};

// Full MCEM fit: iterates estep/mstep from init_params until the maximum
// relative parameter change stays below tol for tol_window consecutive
// iterations, then runs one E/M update at mc_polish. Hitting max_iter returns
// the current state flagged non-converged. Deterministic given options.seed.
FitResult mcem_fit(const Design& design, const TrialData& data, const McemOptions& opts);

// As mcem_fit but with externally built design matrices (must match design).
FitResult mcem_fit(const Design& design, const DesignMatrices& mats, const TrialData& data,
                   const McemOptions& opts);

// Linear restriction on the fixed effects, expressible as forcing a subset of
// coefficients to zero and/or forcing pairs equal. Covers the treatment /
// period / response-variate null hypotheses and pairwise contrasts.
struct Restriction {
  std::vector<int> zero_columns;
  std::vector<std::pair<int, int>> equal_pairs;

  bool empty() const { return zero_columns.empty() && equal_pairs.empty(); }
  // Column map A (n_coef x k): the restricted model uses X A.
  Eigen::MatrixXd transform(int n_coef) const;
  int df(int n_coef) const;

  // Named forms: "treatment", "period", "response" (all indicators of the
  // factor equal zero), "response:A=B" (pairwise contrast of variates A, B in
  // 1..m), "cols:J,K,..." (explicit 0-based coefficient indices).
  static Restriction parse(const std::string& text, const Design& design);
};

// MCEM fit of the column-restricted model. The returned FitResult carries the
// restriction transform so coefficients can be reported in full space.
FitResult restricted_fit(const Design& design, const TrialData& data, const McemOptions& opts,
                         const Restriction& restriction);
FitResult restricted_fit(const Design& design, const DesignMatrices& mats, const TrialData& data,
                         const McemOptions& opts, const Restriction& restriction);

}  // namespace mcx
