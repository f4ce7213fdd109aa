#include "mcx/conditional.hpp"

#include <cmath>

#include "mcx/error.hpp"

namespace mcx {

namespace {

void check_model(const Params& params, const DesignMatrices& mats, int seq) {
  if (params.beta.size() != mats.subject_block(seq).cols())
    throw_invalid("model: beta length does not match the design matrices");
  if (!(params.sigma_e2 > 0.0)) throw_invalid("model: sigma_e2 must be > 0");
  if (!(params.sigma_s2 >= 0.0)) throw_invalid("model: sigma_s2 must be >= 0");
}

}  // namespace

namespace detail {

SubjectLaw subject_law(const Params& params, int n_observed) {
  const double se = params.sigma_e2;
  const double ss = params.sigma_s2;
  const double denom = se + static_cast<double>(n_observed) * ss;
  return {ss / denom, ss * se / denom};
}

}  // namespace detail

PosteriorSummary random_effect_posterior(const Params& params, const Design& design,
                                         const DesignMatrices& mats, int seq,
                                         const Eigen::VectorXd& y_complete) {
  check_model(params, mats, seq);
  const int n = design.subjects(seq);
  const int pm = design.per_subject();
  if (y_complete.size() != static_cast<long>(n) * pm)
    throw_invalid("random_effect_posterior: y_complete has the wrong length");

  PosteriorSummary out;
  out.b0 = Eigen::VectorXd::Zero(n);
  if (params.sigma_s2 == 0.0) {
    out.phi = 0.0;
    out.degenerate = true;
    return out;
  }
  out.phi = params.sigma_s2 * params.sigma_e2 / (params.sigma_e2 + pm * params.sigma_s2);
  const Eigen::MatrixXd& block = mats.subject_block(seq);
  const Eigen::VectorXd mu = block * params.beta;
  const double scale = out.phi / params.sigma_e2;
  for (int q = 0; q < n; ++q) {
    const double rsum = (y_complete.segment(q * pm, pm) - mu).sum();
    out.b0[q] = scale * rsum;
  }
  return out;
}

std::vector<int> missing_indices(const TrialData& data, int seq) {
  std::vector<int> idx;
  const auto& obs = data.observed(seq);
  idx.reserve(obs.size());
  for (int k = 0; k < static_cast<int>(obs.size()); ++k)
    if (!obs[static_cast<std::size_t>(k)]) idx.push_back(k);
  return idx;
}

ConditionalNormal missing_conditional(const Params& params, const Design& design,
                                      const DesignMatrices& mats, int seq, const TrialData& data) {
  check_model(params, mats, seq);
  const int pm = design.per_subject();
  const int n = design.subjects(seq);
  const auto& obs = data.observed(seq);
  const Eigen::VectorXd& y = data.values(seq);
  const Eigen::MatrixXd& block = mats.subject_block(seq);
  const Eigen::VectorXd mu = block * params.beta;

  const int m_i = data.missing_count(seq);
  if (m_i < 1) throw_invalid("missing_conditional: sequence has no missing entries");

  ConditionalNormal out;
  out.mean = Eigen::VectorXd::Zero(m_i);
  out.cov = Eigen::MatrixXd::Zero(m_i, m_i);

  int offset = 0;
  for (int q = 0; q < n; ++q) {
    std::vector<int> miss;
    double resid_sum = 0.0;
    int n_obs = 0;
    for (int r = 0; r < pm; ++r) {
      const int k = q * pm + r;
      if (obs[static_cast<std::size_t>(k)]) {
        resid_sum += y[k] - mu[r];
        ++n_obs;
      } else {
        miss.push_back(r);
      }
    }
    const int a = static_cast<int>(miss.size());
    if (a == 0) continue;
    const auto law = detail::subject_law(params, n_obs);
    for (int u = 0; u < a; ++u) {
      out.mean[offset + u] = mu[miss[static_cast<std::size_t>(u)]] + law.w * resid_sum;
      for (int v = 0; v < a; ++v) out.cov(offset + u, offset + v) = law.phi_b;
      out.cov(offset + u, offset + u) += params.sigma_e2;
    }
    offset += a;
  }
  return out;
}

std::vector<Eigen::VectorXd> sample_missing(const ConditionalNormal& cond, Rng& rng, int count) {
  if (count < 1) throw_invalid("sample_missing: count must be >= 1");
  const long d = cond.mean.size();
  if (cond.cov.rows() != d || cond.cov.cols() != d)
    throw_invalid("sample_missing: mean/cov dimensions disagree");

  // Symmetric PSD square root with clipping of tiny negative eigenvalues.
  Eigen::MatrixXd sym = 0.5 * (cond.cov + cond.cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw_numeric("sample_missing: eigendecomposition failed");
  Eigen::VectorXd evals = es.eigenvalues();
  for (long k = 0; k < d; ++k) {
    if (evals[k] < -1e-10)
      throw_numeric("sample_missing: covariance is not PSD (eigenvalue " + std::to_string(evals[k]) + ")");
    if (evals[k] < 0.0) evals[k] = 0.0;
  }
  const Eigen::MatrixXd root =
      es.eigenvectors() * evals.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();

  std::vector<Eigen::VectorXd> draws;
  draws.reserve(static_cast<std::size_t>(count));
  Eigen::VectorXd z(d);
  for (int k = 0; k < count; ++k) {
    for (long j = 0; j < d; ++j) z[j] = rng.normal();
    draws.push_back(cond.mean + root * z);
  }
  return draws;
}

Eigen::VectorXd sample_b_given_y(const Params& params, const Design& design, const DesignMatrices& mats,
                                 int seq, const Eigen::VectorXd& y_complete, Rng& rng) {
  const PosteriorSummary post = random_effect_posterior(params, design, mats, seq, y_complete);
  if (post.degenerate) return post.b0;
  const double sd = std::sqrt(post.phi);
  Eigen::VectorXd b = post.b0;
  for (long q = 0; q < b.size(); ++q) b[q] += sd * rng.normal();
  return b;
}

Eigen::VectorXd sample_ymis_given_b(const Params& params, const Design& design, const DesignMatrices& mats,
                                    int seq, const TrialData& data, const Eigen::VectorXd& b, Rng& rng) {
  check_model(params, mats, seq);
  if (params.sigma_e2 < 1e-12) throw_invalid("sample_ymis_given_b: sigma_e2 below 1e-12 is degenerate");
  const int pm = design.per_subject();
  if (b.size() != design.subjects(seq)) throw_invalid("sample_ymis_given_b: b has the wrong length");
  const Eigen::VectorXd mu = mats.subject_block(seq) * params.beta;
  const auto miss = missing_indices(data, seq);
  const double sd = std::sqrt(params.sigma_e2);
  Eigen::VectorXd draw(static_cast<long>(miss.size()));
  for (std::size_t u = 0; u < miss.size(); ++u) {
    const int k = miss[u];
    const int q = k / pm;
    const int r = k % pm;
    draw[static_cast<long>(u)] = mu[r] + b[q] + sd * rng.normal();
  }
  return draw;
}

double observed_loglik(const Params& params, const Design& design, const DesignMatrices& mats,
                       const TrialData& data) {
  check_model(params, mats, 0);
  if (data.total_observed() == 0) throw_invalid("observed_loglik: data contain no observed entries");
  constexpr double log2pi = 1.8378770664093454836;

  double ll = 0.0;
  for (int i = 0; i < design.sequences(); ++i) {
    const int pm = design.per_subject();
    const int n = design.subjects(i);
    const auto& obs = data.observed(i);
    const Eigen::VectorXd& y = data.values(i);
    const Eigen::VectorXd mu = mats.subject_block(i) * params.beta;
    for (int q = 0; q < n; ++q) {
      Eigen::VectorXd resid(pm);
      int b = 0;
      for (int r = 0; r < pm; ++r) {
        const int k = q * pm + r;
        if (obs[static_cast<std::size_t>(k)]) resid[b++] = y[k] - mu[r];
      }
      if (b == 0) continue;
      Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(b, b, params.sigma_s2);
      cov.diagonal().array() += params.sigma_e2;
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success)
        throw_numeric("observed_loglik: observed covariance block is not positive definite");
      const Eigen::VectorXd alpha = llt.solve(resid.head(b));
      double logdet = 0.0;
      for (int r = 0; r < b; ++r) logdet += 2.0 * std::log(llt.matrixL()(r, r));
      ll += -0.5 * (b * log2pi + logdet + resid.head(b).dot(alpha));
    }
  }
  return ll;
}

}  // namespace mcx
