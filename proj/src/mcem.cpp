#include "mcx/mcem.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

#include "mcx/error.hpp"

namespace mcx {

namespace {

void check_model(const Params& params, const DesignMatrices& mats) {
  if (params.beta.size() != mats.n_coef()) throw_invalid("model: beta length does not match the design matrices");
  if (!(params.sigma_e2 > 0.0)) throw_invalid("model: sigma_e2 must be > 0");
  if (!(params.sigma_s2 >= 0.0)) throw_invalid("model: sigma_s2 must be >= 0");
}

double max_rel_change(const Params& a, const Params& b) {
  double rel = 0.0;
  for (long j = 0; j < a.beta.size(); ++j)
    rel = std::max(rel, std::fabs(b.beta[j] - a.beta[j]) / (std::fabs(a.beta[j]) + 1.0));
  rel = std::max(rel, std::fabs(b.sigma_e2 - a.sigma_e2) / (std::fabs(a.sigma_e2) + 1.0));
  rel = std::max(rel, std::fabs(b.sigma_s2 - a.sigma_s2) / (std::fabs(a.sigma_s2) + 1.0));
  return rel;
}

}  // namespace

void McemOptions::validate() const {
  if (mc_initial < 1 || mc_main < 1 || mc_polish < 1) throw_invalid("mcem options: sample counts must be >= 1");
  if (warmup_iters < 0) throw_invalid("mcem options: warmup_iters must be >= 0");
  if (max_iter < 1) throw_invalid("mcem options: max_iter must be >= 1");
  if (!(tol > 0.0)) throw_invalid("mcem options: tol must be > 0");
  if (tol_window < 1) throw_invalid("mcem options: tol_window must be >= 1");
  if (!(var_floor > 0.0)) throw_invalid("mcem options: var_floor must be > 0");
}

EStepSummary estep(const Params& params, const Design& design, const DesignMatrices& mats,
                   const TrialData& data, int c, const Rng& rng) {
  check_model(params, mats);
  if (c < 1) throw_invalid("estep: sample count must be >= 1");

  const double se = params.sigma_e2;
  const double ss = params.sigma_s2;
  const int pm = design.per_subject();
  const int n_coef = mats.n_coef();

  EStepSummary out;
  out.draws = c;
  out.phi = ss > 0.0 ? ss * se / (se + pm * ss) : 0.0;
  const double b0_scale = ss > 0.0 ? out.phi / se : 0.0;
  const double sd_e = std::sqrt(se);

  out.seq.resize(static_cast<std::size_t>(design.sequences()));
  for (int i = 0; i < design.sequences(); ++i) {
    const Eigen::MatrixXd& block = mats.subject_block(i);
    const int n = design.subjects(i);
    const Eigen::VectorXd mu = block * params.beta;
    const Eigen::VectorXd colsum = block.colwise().sum().transpose();

    SequenceStats& st = out.seq[static_cast<std::size_t>(i)];
    st.avg_xtw = Eigen::VectorXd::Zero(n_coef);
    st.avg_y = Eigen::VectorXd::Zero(static_cast<long>(pm) * n);
    st.avg_b0 = Eigen::VectorXd::Zero(n);
    st.tr_ztz_sigma0 = static_cast<double>(pm) * n * out.phi;
    st.tr_sigma0 = static_cast<double>(n) * out.phi;

    const auto& obs_mask = data.observed(i);
    const Eigen::VectorXd& y = data.values(i);

    Eigen::VectorXd xtv(n_coef);
    std::vector<int> miss;
    for (int q = 0; q < n; ++q) {
      miss.clear();
      double sum_yobs = 0.0, yty_obs = 0.0, sum_mu_obs = 0.0, sum_mu_miss = 0.0;
      Eigen::VectorXd xty_obs = Eigen::VectorXd::Zero(n_coef);
      for (int r = 0; r < pm; ++r) {
        const int k = q * pm + r;
        if (obs_mask[static_cast<std::size_t>(k)]) {
          sum_yobs += y[k];
          yty_obs += y[k] * y[k];
          sum_mu_obs += mu[r];
          xty_obs.noalias() += block.row(r).transpose() * y[k];
        } else {
          miss.push_back(r);
          sum_mu_miss += mu[r];
        }
      }
      const double rsum_obs = sum_yobs - sum_mu_obs;

      if (miss.empty()) {
        // Fully observed subject: the "samples" are all identical.
        const double b0 = b0_scale * rsum_obs;
        st.avg_wtw += yty_obs - 2.0 * b0 * sum_yobs + pm * b0 * b0;
        st.avg_xtw.noalias() += xty_obs - b0 * colsum;
        st.avg_btb += b0 * b0;
        st.avg_b0[q] = b0;
        st.avg_y.segment(static_cast<long>(q) * pm, pm) = y.segment(static_cast<long>(q) * pm, pm);
        continue;
      }

      const int n_obs = pm - static_cast<int>(miss.size());
      const auto law = detail::subject_law(params, n_obs);
      const double sd_shared = std::sqrt(law.phi_b);
      Rng rq = rng.substream(static_cast<std::uint64_t>(i) + 1, static_cast<std::uint64_t>(q) + 1);

      double acc_wtw = 0.0, acc_btb = 0.0, acc_b0 = 0.0;
      Eigen::VectorXd acc_xtw = Eigen::VectorXd::Zero(n_coef);
      Eigen::VectorXd acc_v = Eigen::VectorXd::Zero(static_cast<long>(miss.size()));

      for (int k = 0; k < c; ++k) {
        const double shared = sd_shared * rq.normal();
        double sum_v = 0.0, sum_v2 = 0.0;
        xtv.setZero();
        for (std::size_t u = 0; u < miss.size(); ++u) {
          const int r = miss[u];
          const double v = mu[r] + law.w * rsum_obs + sd_e * rq.normal() + shared;
          sum_v += v;
          sum_v2 += v * v;
          xtv.noalias() += block.row(r).transpose() * v;
          acc_v[static_cast<long>(u)] += v;
        }
        const double rsum = rsum_obs + (sum_v - sum_mu_miss);
        const double b0 = b0_scale * rsum;
        const double ysum = sum_yobs + sum_v;
        acc_wtw += (yty_obs + sum_v2) - 2.0 * b0 * ysum + pm * b0 * b0;
        acc_xtw.noalias() += xty_obs + xtv - b0 * colsum;
        acc_btb += b0 * b0;
        acc_b0 += b0;
      }
      const double inv_c = 1.0 / static_cast<double>(c);
      st.avg_wtw += acc_wtw * inv_c;
      st.avg_xtw.noalias() += acc_xtw * inv_c;
      st.avg_btb += acc_btb * inv_c;
      st.avg_b0[q] = acc_b0 * inv_c;
      for (int r = 0; r < pm; ++r) {
        const int k = q * pm + r;
        if (obs_mask[static_cast<std::size_t>(k)]) st.avg_y[k] = y[k];
      }
      for (std::size_t u = 0; u < miss.size(); ++u)
        st.avg_y[static_cast<long>(q) * pm + miss[u]] = acc_v[static_cast<long>(u)] * inv_c;
    }
  }
  return out;
}

Params mstep(const EStepSummary& stats, const DesignMatrices& mats, double var_floor) {
  const int n_coef = mats.n_coef();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_coef, n_coef);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_coef);
  for (int i = 0; i < mats.n_sequences(); ++i) {
    a += mats.xtx(i);
    rhs += stats.seq[static_cast<std::size_t>(i)].avg_xtw;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw_numeric("mstep: X'X factorization failed");
  Params next;
  next.beta = ldlt.solve(rhs);
  if ((a * next.beta - rhs).norm() > 1e-8 * (1.0 + rhs.norm()))
    throw_numeric("mstep: X'X is numerically singular; model is not identifiable");

  double rss = 0.0, n_entries = 0.0, bsum = 0.0, n_subjects = 0.0;
  for (int i = 0; i < mats.n_sequences(); ++i) {
    const auto& st = stats.seq[static_cast<std::size_t>(i)];
    const double nrows = static_cast<double>(mats.subject_block(i).rows()) * mats.subjects()[static_cast<std::size_t>(i)];
    rss += st.avg_wtw - 2.0 * next.beta.dot(st.avg_xtw) + next.beta.dot(mats.xtx(i) * next.beta) +
           st.tr_ztz_sigma0;
    n_entries += nrows;
    bsum += st.tr_sigma0 + st.avg_btb;
    n_subjects += static_cast<double>(mats.subjects()[static_cast<std::size_t>(i)]);
  }
  next.sigma_e2 = std::max(rss / n_entries, var_floor);
  next.sigma_s2 = std::max(bsum / n_subjects, var_floor);
  return next;
}

double q_value(const EStepSummary& stats, const DesignMatrices& mats, const Params& candidate) {
  check_model(candidate, mats);
  constexpr double log2pi = 1.8378770664093454836;
  if (!(candidate.sigma_s2 > 0.0)) return -std::numeric_limits<double>::infinity();
  double q = 0.0;
  for (int i = 0; i < mats.n_sequences(); ++i) {
    const auto& st = stats.seq[static_cast<std::size_t>(i)];
    const double n_i = static_cast<double>(mats.subjects()[static_cast<std::size_t>(i)]);
    const double rows = static_cast<double>(mats.subject_block(i).rows()) * n_i;
    const double quad = st.avg_wtw - 2.0 * candidate.beta.dot(st.avg_xtw) +
                        candidate.beta.dot(mats.xtx(i) * candidate.beta) + st.tr_ztz_sigma0;
    q += -0.5 * rows * (log2pi + std::log(candidate.sigma_e2)) - 0.5 * quad / candidate.sigma_e2;
    q += -0.5 * n_i * (log2pi + std::log(candidate.sigma_s2)) -
         0.5 * (st.tr_sigma0 + st.avg_btb) / candidate.sigma_s2;
  }
  return q;
}

Params init_params(const Design& design, const DesignMatrices& mats, const TrialData& data) {
  const int n_coef = mats.n_coef();
  const long n_obs = data.total_observed();
  if (n_obs < n_coef) throw_invalid("init: fewer observed entries than coefficients");

  Eigen::MatrixXd x_obs(n_obs, n_coef);
  Eigen::VectorXd y_obs(n_obs);
  long row = 0;
  for (int i = 0; i < design.sequences(); ++i) {
    const Eigen::MatrixXd& block = mats.subject_block(i);
    const int pm = design.per_subject();
    const auto& obs = data.observed(i);
    const Eigen::VectorXd& y = data.values(i);
    for (int q = 0; q < design.subjects(i); ++q)
      for (int r = 0; r < pm; ++r) {
        const int k = q * pm + r;
        if (obs[static_cast<std::size_t>(k)]) {
          x_obs.row(row) = block.row(r);
          y_obs[row] = y[k];
          ++row;
        }
      }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x_obs);
  qr.setThreshold(1e-10);
  if (qr.rank() < n_coef)
    throw_invalid("init: observed design is rank deficient; collect more data or drop a factor");
  Params start;
  start.beta = qr.solve(y_obs);

  // One-way ANOVA of the OLS residuals grouped by subject.
  double grand = 0.0;
  std::vector<double> gsum, gmean;
  std::vector<int> gsize;
  double ssw = 0.0;
  {
    std::vector<std::vector<double>> groups;
    long r2 = 0;
    for (int i = 0; i < design.sequences(); ++i) {
      const int pm = design.per_subject();
      const auto& obs = data.observed(i);
      for (int q = 0; q < design.subjects(i); ++q) {
        std::vector<double> g;
        for (int r = 0; r < pm; ++r) {
          const int k = q * pm + r;
          if (obs[static_cast<std::size_t>(k)]) {
            const double resid = y_obs[r2] - x_obs.row(r2).dot(start.beta);
            g.push_back(resid);
            ++r2;
          }
        }
        if (!g.empty()) groups.push_back(std::move(g));
      }
    }
    for (const auto& g : groups) {
      const double s = std::accumulate(g.begin(), g.end(), 0.0);
      gsum.push_back(s);
      gsize.push_back(static_cast<int>(g.size()));
      gmean.push_back(s / static_cast<double>(g.size()));
      grand += s;
      for (double e : g) ssw += (e - gmean.back()) * (e - gmean.back());
    }
  }
  const int n_groups = static_cast<int>(gsize.size());
  const double grand_mean = grand / static_cast<double>(n_obs);
  double ssb = 0.0, inv_size = 0.0;
  for (int g = 0; g < n_groups; ++g) {
    ssb += gsize[static_cast<std::size_t>(g)] * (gmean[static_cast<std::size_t>(g)] - grand_mean) *
           (gmean[static_cast<std::size_t>(g)] - grand_mean);
    inv_size += 1.0 / static_cast<double>(gsize[static_cast<std::size_t>(g)]);
  }
  const double msw = (n_obs > n_groups) ? ssw / static_cast<double>(n_obs - n_groups) : 0.0;
  const double msb = (n_groups > 1) ? ssb / static_cast<double>(n_groups - 1) : 0.0;
  const double harmonic = static_cast<double>(n_groups) / inv_size;
  start.sigma_e2 = std::max(msw, 1e-6);
  start.sigma_s2 = std::max((msb - msw) / harmonic, 1e-6);
  return start;
}

namespace {

FitResult fit_with_matrices(const Design& design, const DesignMatrices& mats, const TrialData& data,
                            const McemOptions& opts, Eigen::MatrixXd transform) {
  opts.validate();
  Params params = init_params(design, mats, data);
  Rng root(opts.seed);

  FitResult out;
  out.transform = std::move(transform);
  int window = 0;
  bool converged = false;
  int t = 1;
  for (; t <= opts.max_iter; ++t) {
    const EStepSummary stats = estep(params, design, mats, data, opts.samples_for(t), root.substream(static_cast<std::uint64_t>(t)));
    const Params next = mstep(stats, mats, opts.var_floor);
    const double rel = max_rel_change(params, next);
    params = next;
    out.loglik_trace.push_back(observed_loglik(params, design, mats, data));
    out.change_trace.push_back(rel);
    const bool coarse = opts.samples_for(t) < opts.mc_main;
    if (!coarse && rel < opts.tol) {
      if (++window >= opts.tol_window) {
        converged = true;
        break;
      }
    } else {
      window = 0;
    }
  }
  out.iterations = std::min(t, opts.max_iter);

  // One high-precision E/M update to polish the estimate.
  const EStepSummary stats =
      estep(params, design, mats, data, opts.mc_polish, root.substream(static_cast<std::uint64_t>(opts.max_iter) + 1));
  params = mstep(stats, mats, opts.var_floor);
  out.params = params;
  out.converged = converged;
  out.loglik = observed_loglik(params, design, mats, data);
  out.loglik_trace.push_back(out.loglik);
  return out;
}

}  // namespace

FitResult mcem_fit(const Design& design, const DesignMatrices& mats, const TrialData& data,
                   const McemOptions& opts) {
  return fit_with_matrices(design, mats, data, opts,
                           Eigen::MatrixXd::Identity(mats.n_coef(), mats.n_coef()));
}

FitResult mcem_fit(const Design& design, const TrialData& data, const McemOptions& opts) {
  return mcem_fit(design, build_design_matrices(design), data, opts);
}

Eigen::MatrixXd Restriction::transform(int n_coef) const {
  std::vector<int> parent(static_cast<std::size_t>(n_coef));
  for (int j = 0; j < n_coef; ++j) parent[static_cast<std::size_t>(j)] = j;
  std::function<int(int)> find = [&](int j) {
    while (parent[static_cast<std::size_t>(j)] != j) {
      parent[static_cast<std::size_t>(j)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(j)])];
      j = parent[static_cast<std::size_t>(j)];
    }
    return j;
  };

  for (const auto& [a, b] : equal_pairs) {
    if (a < 0 || a >= n_coef || b < 0 || b >= n_coef) throw_invalid("restriction: coefficient index out of range");
    if (a == 0 || b == 0) throw_invalid("restriction: the intercept cannot be merged");
    if (a == b) throw_invalid("restriction: a coefficient cannot be merged with itself");
    parent[static_cast<std::size_t>(find(a))] = find(b);
  }
  std::vector<bool> zeroed(static_cast<std::size_t>(n_coef), false);
  for (int j : zero_columns) {
    if (j < 0 || j >= n_coef) throw_invalid("restriction: coefficient index out of range");
    if (j == 0) throw_invalid("restriction: the intercept cannot be removed");
    zeroed[static_cast<std::size_t>(find(j))] = true;
  }

  // One output column per surviving merge group, ordered by smallest member.
  std::vector<int> group_min(static_cast<std::size_t>(n_coef), n_coef);
  for (int j = 0; j < n_coef; ++j) {
    const int g = find(j);
    group_min[static_cast<std::size_t>(g)] = std::min(group_min[static_cast<std::size_t>(g)], j);
  }
  std::vector<std::pair<int, int>> kept;  // (order key, group root)
  for (int j = 0; j < n_coef; ++j)
    if (find(j) == j && !zeroed[static_cast<std::size_t>(j)])
      kept.emplace_back(group_min[static_cast<std::size_t>(j)], j);
  std::sort(kept.begin(), kept.end());

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_coef, static_cast<long>(kept.size()));
  for (std::size_t col = 0; col < kept.size(); ++col)
    for (int j = 0; j < n_coef; ++j)
      if (find(j) == kept[col].second && !zeroed[static_cast<std::size_t>(find(j))]) a(j, static_cast<long>(col)) = 1.0;
  return a;
}

int Restriction::df(int n_coef) const { return n_coef - static_cast<int>(transform(n_coef).cols()); }

Restriction Restriction::parse(const std::string& text, const Design& design) {
  Restriction r;
  const int p = design.periods(), t = design.treatments(), m = design.responses();
  auto block_cols = [&](int offset, int count) {
    std::vector<int> cols;
    for (int j = 0; j < count; ++j) cols.push_back(offset + j);
    return cols;
  };
  if (text == "treatment") {
    if (t < 2) throw_invalid("restriction: design has no treatment indicator columns");
    r.zero_columns = block_cols(1 + (p - 1), t - 1);
  } else if (text == "period") {
    if (p < 2) throw_invalid("restriction: design has no period indicator columns");
    r.zero_columns = block_cols(1, p - 1);
  } else if (text == "response") {
    if (m < 2) throw_invalid("restriction: design has no response indicator columns");
    r.zero_columns = block_cols(1 + (p - 1) + (t - 1), m - 1);
  } else if (text.rfind("response:", 0) == 0) {
    const std::string body = text.substr(9);
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw_invalid("restriction: expected response:A=B");
    int va = 0, vb = 0;
    try {
      va = std::stoi(body.substr(0, eq));
      vb = std::stoi(body.substr(eq + 1));
    } catch (const std::exception&) {
      throw_invalid("restriction: expected response:A=B with integer variate labels");
    }
    if (va < 1 || va > m || vb < 1 || vb > m || va == vb)
      throw_invalid("restriction: variate labels must be distinct and in 1..m");
    const int offset = 1 + (p - 1) + (t - 1);
    // The last variate is the reference with effect 0, so equality with it
    // means the other effect is 0.
    if (va == m || vb == m) {
      r.zero_columns.push_back(offset + std::min(va, vb) - 1);
    } else {
      r.equal_pairs.emplace_back(offset + va - 1, offset + vb - 1);
    }
  } else if (text.rfind("cols:", 0) == 0) {
    std::string body = text.substr(5);
    std::size_t pos = 0;
    while (pos < body.size()) {
      auto comma = body.find(',', pos);
      if (comma == std::string::npos) comma = body.size();
      try {
        r.zero_columns.push_back(std::stoi(body.substr(pos, comma - pos)));
      } catch (const std::exception&) {
        throw_invalid("restriction: cols: expects a comma-separated list of column indices");
      }
      pos = comma + 1;
    }
    if (r.zero_columns.empty()) throw_invalid("restriction: cols: expects at least one column index");
  } else {
    throw_invalid("restriction: unknown specification '" + text + "'");
  }
  return r;
}

FitResult restricted_fit(const Design& design, const DesignMatrices& mats, const TrialData& data,
                         const McemOptions& opts, const Restriction& restriction) {
  if (restriction.empty()) return mcem_fit(design, mats, data, opts);
  const Eigen::MatrixXd a = restriction.transform(mats.n_coef());
  return fit_with_matrices(design, mats.transformed(a), data, opts, a);
}

FitResult restricted_fit(const Design& design, const TrialData& data, const McemOptions& opts,
                         const Restriction& restriction) {
  return restricted_fit(design, build_design_matrices(design), data, opts, restriction);
}

}  // namespace mcx
