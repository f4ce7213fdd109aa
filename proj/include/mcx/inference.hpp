#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mcx/design.hpp"
#include "mcx/mcem.hpp"
#include "mcx/stats.hpp"

namespace mcx {

struct MiOptions {
  int imputations = 100;  // completed datasets collected per repetition
  int burn_in = 1000;     // Gibbs sweeps discarded before collection
  int repetitions = 5;    // independent chains (m0)
  std::uint64_t seed = 31;

  void validate() const;
};

// Maximum likelihood for fully observed data, exploiting the two-eigenvalue
// structure of the per-subject covariance (lambda_1 = sigma_e2 with
// multiplicity pm-1, lambda_2 = sigma_e2 + pm sigma_s2): profile likelihood
// over the eigenvalue ratio, GLS for beta at each ratio.
struct CompleteDataMl {
  Params params;
  Eigen::VectorXd variances;  // diag of inverse information, (beta..., sigma_e2, sigma_s2)
  double loglik = 0.0;
};

CompleteDataMl complete_data_ml(const Design& design, const DesignMatrices& mats,
                                const std::vector<Eigen::VectorXd>& y_complete);

// Rubin-style combination used here: total variance =
// mean(within) + (1 + 1/m0) * empirical variance of the point estimates,
// pooling the estimates of all repetitions. Returns the total variances.
Eigen::VectorXd mi_combine_variance(const std::vector<Eigen::VectorXd>& within,
                                    const std::vector<Eigen::VectorXd>& estimates, int m0);

struct MiResult {
  Eigen::VectorXd se;       // (beta..., sigma_e2, sigma_s2)
  Eigen::VectorXd within;   // mean within-imputation variance
  Eigen::VectorXd between;  // empirical variance of the point estimates
  int imputations_total = 0;
};

// Standard errors by multiple imputation. Each repetition runs a Gibbs
// sampler: the chain is initialized from the marginal laws of b and y_mis at
// the fitted parameters, alternates b | y and y_mis | y_obs, b for burn_in
// sweeps, then yields `imputations` completed datasets (one per sweep). Each
// completed dataset is refit by complete_data_ml; the combination rule above
// pools them. Refuses a non-converged fit.
MiResult mi_standard_errors(const FitResult& fit, const Design& design, const DesignMatrices& mats,
                            const TrialData& data, const MiOptions& options);

struct TestResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  double full_loglik = 0.0;
  double reduced_loglik = 0.0;
};

// Likelihood-ratio test from two nested fits using observed-data
// log-likelihoods: Lambda = 2 (l_full - l_reduced), referred to chi^2_df.
// Small negative Lambda (Monte Carlo noise) is clamped to zero; below -0.1
// it is treated as a fitting failure and throws.
TestResult lrt(const FitResult& full, const FitResult& reduced, int df);

// Q-function variant of the test: one fresh E-step at the full-model estimate
// gives Q(.|full); the statistic is 2 Q(full) - 2 Q(reduced embedded in the
// full space). Used as an alternative statistic in power studies.
TestResult lrt_q(const Design& design, const DesignMatrices& mats, const TrialData& data,
                 const FitResult& full, const FitResult& reduced, const McemOptions& opts);

struct FitReport {
  double aic = 0.0;
  double bic = 0.0;
  double rmse = 0.0;
  int k = 0;        // parameter count: coefficients + 2 variance components
  long n_obs = 0;
};

// AIC = -2 l + 2k, BIC = -2 l + k log(n_obs), RMSE over observed marginal
// residuals y - x'beta.
FitReport fit_report(const FitResult& fit, const Design& design, const DesignMatrices& mats,
                     const TrialData& data);

// Drop-one-column LRT p-value per coefficient. The intercept cannot be
// dropped, so its slot holds NaN; callers wanting an intercept p-value use a
// Wald test with the MI standard error instead.
std::vector<double> coefficient_pvalues(const Design& design, const DesignMatrices& mats,
                                        const TrialData& data, const FitResult& full,
                                        const McemOptions& opts, int threads);

}  // namespace mcx
