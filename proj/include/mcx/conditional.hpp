#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mcx/design.hpp"
#include "mcx/rng.hpp"

namespace mcx {

// Posterior law of the subject random effects given a completed response
// vector: b | y ~ N(b0, phi * I). The covariance is diagonal because
// subjects are independent; phi = sigma_s2 * sigma_e2 / (sigma_e2 + pm * sigma_s2).
struct PosteriorSummary {
  Eigen::VectorXd b0;
  double phi = 0.0;
  bool degenerate = false;  // sigma_s2 == 0: point mass at zero

  Eigen::MatrixXd sigma0() const {
    return phi * Eigen::MatrixXd::Identity(b0.size(), b0.size());
  }
};

// Sigma0 = [sigma_e^{-2} Z'Z + D^{-1}]^{-1}, b0 = Sigma0 Z'(y - X beta) / sigma_e2.
// y_complete must hold pm * n_i finite values (missing entries already filled).
PosteriorSummary random_effect_posterior(const Params& params, const Design& design,
                                         const DesignMatrices& mats, int seq,
                                         const Eigen::VectorXd& y_complete);

// A multivariate normal given by moments. cov must be symmetric PSD up to
// the numerical tolerance used by sample_missing.
struct ConditionalNormal {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Indices (sequence entry order) of the missing entries of sequence seq.
std::vector<int> missing_indices(const TrialData& data, int seq);

// Law of the missing entries given the observed ones under N(X beta, Sigma_i):
// mean mu1 + S12 S22^{-1} (y_obs - mu2), covariance S11 - S12 S22^{-1} S21.
// Computed subject by subject (the cross-subject blocks are zero) and
// assembled in missing_indices order. Requires at least one missing entry.
ConditionalNormal missing_conditional(const Params& params, const Design& design,
                                      const DesignMatrices& mats, int seq, const TrialData& data);

// count i.i.d. draws via the symmetric PSD square root of cov. Eigenvalues in
// [-1e-10, 0) are clipped to zero; anything lower is an error.
std::vector<Eigen::VectorXd> sample_missing(const ConditionalNormal& cond, Rng& rng, int count);

// One draw from b | y (see random_effect_posterior).
Eigen::VectorXd sample_b_given_y(const Params& params, const Design& design, const DesignMatrices& mats,
                                 int seq, const Eigen::VectorXd& y_complete, Rng& rng);

// One draw of the missing entries given the random effects: conditional on b
// the entries are independent N(x'beta + b_subject, sigma_e2), so y_obs drops
// out. Returned in missing_indices order.
Eigen::VectorXd sample_ymis_given_b(const Params& params, const Design& design, const DesignMatrices& mats,
                                    int seq, const TrialData& data, const Eigen::VectorXd& b, Rng& rng);

// Log-density of the observed entries under the marginal law, summed over
// sequences and subjects (independent blocks), each block via Cholesky.
// Errors if the data contain no observed entry at all.
double observed_loglik(const Params& params, const Design& design, const DesignMatrices& mats,
                       const TrialData& data);

namespace detail {

// Closed form of the per-subject conditional law. With b observed entries in
// a subject, the missing block given the observed one is
//   mean: mu_M + w * (sum of observed residuals) * 1,  w = sigma_s2 / (sigma_e2 + b sigma_s2)
//   cov:  sigma_e2 * I + phi_b * J,                    phi_b = sigma_s2 * sigma_e2 / (sigma_e2 + b sigma_s2)
// (b = 0 gives back the marginal sigma_e2 I + sigma_s2 J.)
struct SubjectLaw {
  double w;
  double phi_b;
};

SubjectLaw subject_law(const Params& params, int n_observed);

}  // namespace detail

}  // namespace mcx
