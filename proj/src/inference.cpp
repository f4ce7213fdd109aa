#include "mcx/inference.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "mcx/conditional.hpp"
#include "mcx/error.hpp"
#include "mcx/parallel.hpp"
#include "mcx/rng.hpp"

namespace mcx {

void MiOptions::validate() const {
  if (imputations < 1) throw_invalid("mi options: imputations must be >= 1");
  if (burn_in < 1) throw_invalid("mi options: burn_in must be >= 1");
  if (repetitions < 1) throw_invalid("mi options: repetitions must be >= 1");
}

namespace {

// Sufficient statistics of the complete-data likelihood. With r = y - X beta
// per subject, S1 = sum over subjects of (1'r)^2 / pm and S0 = sum r'r - S1;
// both are quadratics in beta with the precomputed pieces below.
struct ProfileStats {
  double yty = 0.0;
  Eigen::VectorXd xty;
  Eigen::MatrixXd xtx;
  double t2 = 0.0;      // sum over subjects of (1'y_subject)^2
  Eigen::VectorXd t1;   // sum over subjects of (1'y_subject) * colsum_i
  Eigen::MatrixXd t0;   // sum over subjects of colsum_i colsum_i'
  double n_subjects = 0.0;
  double pm = 0.0;
};

ProfileStats profile_stats(const Design& design, const DesignMatrices& mats,
                           const std::vector<Eigen::VectorXd>& y_complete) {
  const int n_coef = mats.n_coef();
  ProfileStats ps;
  ps.xty = Eigen::VectorXd::Zero(n_coef);
  ps.xtx = Eigen::MatrixXd::Zero(n_coef, n_coef);
  ps.t1 = Eigen::VectorXd::Zero(n_coef);
  ps.t0 = Eigen::MatrixXd::Zero(n_coef, n_coef);
  ps.pm = static_cast<double>(design.per_subject());
  const int pm = design.per_subject();
  for (int i = 0; i < design.sequences(); ++i) {
    const Eigen::MatrixXd& block = mats.subject_block(i);
    const Eigen::VectorXd colsum = block.colwise().sum().transpose();
    const Eigen::VectorXd& y = y_complete[static_cast<std::size_t>(i)];
    if (y.size() != static_cast<long>(pm) * design.subjects(i))
      throw_invalid("complete_data_ml: completed vector has the wrong length");
    if (!y.allFinite()) throw_invalid("complete_data_ml: completed vector contains non-finite entries");
    ps.xtx += mats.xtx(i);
    ps.t0 += static_cast<double>(design.subjects(i)) * colsum * colsum.transpose();
    for (int q = 0; q < design.subjects(i); ++q) {
      const auto yq = y.segment(static_cast<long>(q) * pm, pm);
      ps.yty += yq.squaredNorm();
      const double s = yq.sum();
      ps.t2 += s * s;
      ps.t1 += s * colsum;
      ps.xty.noalias() += block.transpose() * yq;
    }
    ps.n_subjects += design.subjects(i);
  }
  return ps;
}

struct ProfileEval {
  Eigen::VectorXd beta;
  double lambda1 = 0.0;  // sigma_e2
  double s0 = 0.0, s1 = 0.0;
  double profile_loglik = 0.0;
};

ProfileEval profile_eval(const ProfileStats& ps, double rho) {
  const double inv_pm = 1.0 / ps.pm;
  const Eigen::MatrixXd a = ps.xtx - (1.0 - 1.0 / rho) * inv_pm * ps.t0;
  const Eigen::VectorXd b = ps.xty - (1.0 - 1.0 / rho) * inv_pm * ps.t1;
  ProfileEval ev;
  ev.beta = a.ldlt().solve(b);
  const double total = ps.yty - 2.0 * ev.beta.dot(ps.xty) + ev.beta.dot(ps.xtx * ev.beta);
  ev.s1 = inv_pm * (ps.t2 - 2.0 * ev.beta.dot(ps.t1) + ev.beta.dot(ps.t0 * ev.beta));
  ev.s0 = total - ev.s1;
  const double n_entries = ps.pm * ps.n_subjects;
  // Guards exact-fit data, where the residual criterion collapses to zero.
  ev.lambda1 = std::max((ev.s0 + ev.s1 / rho) / n_entries, 1e-12);
  constexpr double log2pi = 1.8378770664093454836;
  ev.profile_loglik = -0.5 * n_entries * (log2pi + 1.0 + std::log(ev.lambda1)) -
                      0.5 * ps.n_subjects * std::log(rho);
  return ev;
}

}  // namespace

CompleteDataMl complete_data_ml(const Design& design, const DesignMatrices& mats,
                                const std::vector<Eigen::VectorXd>& y_complete) {
  if (static_cast<int>(y_complete.size()) != design.sequences())
    throw_invalid("complete_data_ml: need one completed vector per sequence");
  const ProfileStats ps = profile_stats(design, mats, y_complete);

  // Golden-section maximization of the profile log-likelihood over
  // log(rho) in [0, 30]; the profile is unimodal in the eigenvalue ratio.
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = 30.0;
  double x1 = hi - gr * (hi - lo);
  double x2 = lo + gr * (hi - lo);
  double f1 = profile_eval(ps, std::exp(x1)).profile_loglik;
  double f2 = profile_eval(ps, std::exp(x2)).profile_loglik;
  for (int it = 0; it < 120; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = profile_eval(ps, std::exp(x2)).profile_loglik;
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = profile_eval(ps, std::exp(x1)).profile_loglik;
    }
  }
  const double rho = std::exp(0.5 * (lo + hi));
  const ProfileEval ev = profile_eval(ps, rho);

  CompleteDataMl out;
  out.params.beta = ev.beta;
  out.params.sigma_e2 = ev.lambda1;
  out.params.sigma_s2 = ev.lambda1 * (rho - 1.0) / ps.pm;
  out.loglik = ev.profile_loglik;

  // Expected information: X' Sigma^{-1} X for beta, the standard
  // two-component block for the variances; the cross block is zero.
  const double l1 = out.params.sigma_e2;
  const double l2 = l1 * rho;
  const int n_coef = mats.n_coef();
  const Eigen::MatrixXd info_beta = (ps.xtx - (1.0 - l1 / l2) / ps.pm * ps.t0) / l1;
  Eigen::Matrix2d info_var;
  const double pm = ps.pm;
  info_var(0, 0) = 0.5 * ps.n_subjects * ((pm - 1.0) / (l1 * l1) + 1.0 / (l2 * l2));
  info_var(0, 1) = info_var(1, 0) = 0.5 * ps.n_subjects * pm / (l2 * l2);
  info_var(1, 1) = 0.5 * ps.n_subjects * pm * pm / (l2 * l2);

  out.variances = Eigen::VectorXd::Zero(n_coef + 2);
  out.variances.head(n_coef) = info_beta.llt().solve(Eigen::MatrixXd::Identity(n_coef, n_coef)).diagonal();
  const Eigen::Matrix2d cov_var = info_var.inverse();
  out.variances[n_coef] = cov_var(0, 0);
  out.variances[n_coef + 1] = cov_var(1, 1);
  return out;
}

Eigen::VectorXd mi_combine_variance(const std::vector<Eigen::VectorXd>& within,
                                    const std::vector<Eigen::VectorXd>& estimates, int m0) {
  if (within.empty() || within.size() != estimates.size())
    throw_invalid("mi_combine_variance: need matching within/estimate lists");
  if (m0 < 1) throw_invalid("mi_combine_variance: m0 must be >= 1");
  const long d = within.front().size();
  Eigen::VectorXd wbar = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (std::size_t j = 0; j < within.size(); ++j) {
    wbar += within[j];
    mean += estimates[j];
  }
  const double k = static_cast<double>(within.size());
  wbar /= k;
  mean /= k;
  Eigen::VectorXd between = Eigen::VectorXd::Zero(d);
  if (within.size() > 1) {
    for (std::size_t j = 0; j < estimates.size(); ++j)
      between += (estimates[j] - mean).cwiseProduct(estimates[j] - mean);
    between /= (k - 1.0);
  }
  return wbar + (1.0 + 1.0 / static_cast<double>(m0)) * between;
}

MiResult mi_standard_errors(const FitResult& fit, const Design& design, const DesignMatrices& mats,
                            const TrialData& data, const MiOptions& options) {
  options.validate();
  if (!fit.converged) throw_invalid("mi_standard_errors: fit did not converge; refusing to impute");
  if (fit.params.beta.size() != mats.n_coef())
    throw_invalid("mi_standard_errors: fit and design matrices disagree");
  const Params& hat = fit.params;

  std::vector<Eigen::VectorXd> estimates, withins;
  const long total_missing = data.total_missing();

  if (total_missing == 0) {
    // No imputation uncertainty: every imputed dataset is the data itself.
    std::vector<Eigen::VectorXd> y;
    for (int i = 0; i < design.sequences(); ++i) y.push_back(data.values(i));
    const CompleteDataMl ml = complete_data_ml(design, mats, y);
    MiResult out;
    out.within = ml.variances;
    out.between = Eigen::VectorXd::Zero(ml.variances.size());
    out.se = ml.variances.cwiseSqrt();
    out.imputations_total = options.imputations * options.repetitions;
    return out;
  }

  const Rng root(options.seed);
  const int pm = design.per_subject();
  for (int rep = 0; rep < options.repetitions; ++rep) {
    Rng rng = root.substream(static_cast<std::uint64_t>(rep) + 1);

    // Chain state: completed response vectors, missing slots to be filled.
    std::vector<Eigen::VectorXd> y;
    std::vector<Eigen::VectorXd> b(static_cast<std::size_t>(design.sequences()));
    for (int i = 0; i < design.sequences(); ++i) y.push_back(data.values(i));

    // Initial values from the marginal laws at the fitted parameters.
    const double sd_s = std::sqrt(hat.sigma_s2);
    const double sd_e = std::sqrt(hat.sigma_e2);
    for (int i = 0; i < design.sequences(); ++i) {
      auto& bi = b[static_cast<std::size_t>(i)];
      bi = Eigen::VectorXd(design.subjects(i));
      for (long q = 0; q < bi.size(); ++q) bi[q] = sd_s * rng.normal();
      const Eigen::VectorXd mu = mats.subject_block(i) * hat.beta;
      const auto miss = missing_indices(data, i);
      // Marginal of the missing block: per subject sigma_e2 I + sigma_s2 J.
      int u = 0;
      int current_subject = -1;
      double shared = 0.0;
      for (int k : miss) {
        const int q = k / pm;
        if (q != current_subject) {
          current_subject = q;
          shared = sd_s * rng.normal();
        }
        y[static_cast<std::size_t>(i)][k] = mu[k % pm] + shared + sd_e * rng.normal();
        ++u;
      }
      (void)u;
    }

    const int sweeps = options.burn_in + options.imputations;
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      for (int i = 0; i < design.sequences(); ++i) {
        auto& yi = y[static_cast<std::size_t>(i)];
        b[static_cast<std::size_t>(i)] = sample_b_given_y(hat, design, mats, i, yi, rng);
        const Eigen::VectorXd draw =
            sample_ymis_given_b(hat, design, mats, i, data, b[static_cast<std::size_t>(i)], rng);
        const auto miss = missing_indices(data, i);
        for (std::size_t u = 0; u < miss.size(); ++u) yi[miss[u]] = draw[static_cast<long>(u)];
      }
      if (sweep >= options.burn_in) {
        const CompleteDataMl ml = complete_data_ml(design, mats, y);
        Eigen::VectorXd point(ml.variances.size());
        point.head(ml.params.beta.size()) = ml.params.beta;
        point[ml.params.beta.size()] = ml.params.sigma_e2;
        point[ml.params.beta.size() + 1] = ml.params.sigma_s2;
        estimates.push_back(std::move(point));
        withins.push_back(ml.variances);
      }
    }
  }

  MiResult out;
  const Eigen::VectorXd total = mi_combine_variance(withins, estimates, options.repetitions);
  out.within = Eigen::VectorXd::Zero(total.size());
  for (const auto& w : withins) out.within += w;
  out.within /= static_cast<double>(withins.size());
  out.between = (total - out.within) / (1.0 + 1.0 / static_cast<double>(options.repetitions));
  if (!total.allFinite() || (total.array() < 0.0).any())
    throw_numeric("mi_standard_errors: degenerate combined variance");
  out.se = total.cwiseSqrt();
  out.imputations_total = static_cast<int>(estimates.size());
  return out;
}

TestResult lrt(const FitResult& full, const FitResult& reduced, int df) {
  if (df < 1) throw_invalid("lrt: df must be >= 1");
  double stat = 2.0 * (full.loglik - reduced.loglik);
  if (stat < -0.1)
    throw_numeric("lrt: statistic " + std::to_string(stat) +
                  " is negative beyond Monte Carlo tolerance; fits look non-nested or non-converged");
  if (stat < 0.0) stat = 0.0;
  TestResult out;
  out.statistic = stat;
  out.df = df;
  out.p_value = 1.0 - chi2_cdf(stat, df);
  out.full_loglik = full.loglik;
  out.reduced_loglik = reduced.loglik;
  return out;
}

TestResult lrt_q(const Design& design, const DesignMatrices& mats, const TrialData& data,
                 const FitResult& full, const FitResult& reduced, const McemOptions& opts) {
  const Rng root(opts.seed);
  const EStepSummary stats = estep(full.params, design, mats, data, opts.mc_polish,
                                   root.substream(static_cast<std::uint64_t>(opts.max_iter) + 2));
  const double q_full = q_value(stats, mats, full.params);
  Params embedded;
  embedded.beta = reduced.full_beta();
  embedded.sigma_e2 = reduced.params.sigma_e2;
  embedded.sigma_s2 = reduced.params.sigma_s2;
  const double q_reduced = q_value(stats, mats, embedded);
  const int df = static_cast<int>(full.params.beta.size() - reduced.params.beta.size());
  if (df < 1) throw_invalid("lrt_q: models are not nested");
  double stat = 2.0 * (q_full - q_reduced);
  if (stat < 0.0) stat = 0.0;
  TestResult out;
  out.statistic = stat;
  out.df = df;
  out.p_value = 1.0 - chi2_cdf(stat, df);
  out.full_loglik = full.loglik;
  out.reduced_loglik = reduced.loglik;
  return out;
}

FitReport fit_report(const FitResult& fit, const Design& design, const DesignMatrices& mats,
                     const TrialData& data) {
  FitReport out;
  out.k = static_cast<int>(fit.params.beta.size()) + 2;
  out.n_obs = data.total_observed();
  out.aic = -2.0 * fit.loglik + 2.0 * out.k;
  out.bic = -2.0 * fit.loglik + out.k * std::log(static_cast<double>(out.n_obs));

  double sse = 0.0;
  const int pm = design.per_subject();
  for (int i = 0; i < design.sequences(); ++i) {
    const Eigen::VectorXd mu = mats.subject_block(i) * fit.params.beta;
    const auto& obs = data.observed(i);
    const Eigen::VectorXd& y = data.values(i);
    for (int q = 0; q < design.subjects(i); ++q)
      for (int r = 0; r < pm; ++r) {
        const int k = q * pm + r;
        if (obs[static_cast<std::size_t>(k)]) {
          const double e = y[k] - mu[r];
          sse += e * e;
        }
      }
  }
  out.rmse = std::sqrt(sse / static_cast<double>(out.n_obs));
  return out;
}

std::vector<double> coefficient_pvalues(const Design& design, const DesignMatrices& mats,
                                        const TrialData& data, const FitResult& full,
                                        const McemOptions& opts, int threads) {
  const int n_coef = mats.n_coef();
  std::vector<double> pvals(static_cast<std::size_t>(n_coef), std::numeric_limits<double>::quiet_NaN());
  parallel_for(n_coef - 1, threads, [&](int j) {
    const int col = j + 1;  // intercept is never dropped
    Restriction r;
    r.zero_columns.push_back(col);
    McemOptions sub = opts;
    sub.seed = detail::mix64(opts.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(col)));
    const FitResult reduced = restricted_fit(design, mats, data, sub, r);
    pvals[static_cast<std::size_t>(col)] = lrt(full, reduced, 1).p_value;
  });
  return pvals;
}

}  // namespace mcx
