#include "mcx/design.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "mcx/error.hpp"

namespace mcx {

Design::Design(int sequences, int periods, int treatments, int responses, std::vector<int> subjects,
               std::vector<int> assignment)
    : s_(sequences), p_(periods), t_(treatments), m_(responses), subjects_(std::move(subjects)),
      assignment_(std::move(assignment)) {
  if (s_ < 1 || p_ < 1 || t_ < 1 || m_ < 1) throw_invalid("design: s, p, t, m must all be >= 1");
  if (static_cast<int>(subjects_.size()) != s_) throw_invalid("design: need one subject count per sequence");
  for (int n : subjects_) {
    if (n < 1) throw_invalid("design: every sequence needs at least one subject");
  }
  if (static_cast<int>(assignment_.size()) != s_ * p_) throw_invalid("design: assignment map must cover all s*p cells");
  std::set<int> seen;
  for (int d : assignment_) {
    if (d < 0 || d >= t_) throw_invalid("design: assignment refers to a treatment outside 1..t");
    seen.insert(d);
  }
  if (static_cast<int>(seen.size()) != t_)
    throw_invalid("design: every treatment must appear in at least one (sequence, period) cell");
  total_subjects_ = std::accumulate(subjects_.begin(), subjects_.end(), 0);
}

long Design::total_len() const {
  long n = 0;
  for (int i = 0; i < s_; ++i) n += seq_len(i);
  return n;
}

std::vector<std::string> Design::coef_names() const {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(n_coef()));
  names.emplace_back("Intercept");
  for (int j = 1; j < p_; ++j) names.push_back("Period" + std::to_string(j));
  for (int k = 1; k < t_; ++k) names.push_back("Trt" + std::to_string(k));
  for (int l = 1; l < m_; ++l) names.push_back("Res" + std::to_string(l));
  return names;
}

Design Design::with_subjects(std::vector<int> subjects) const {
  return Design(s_, p_, t_, m_, std::move(subjects), assignment_);
}

void Params::validate(const Design& design) const {
  if (beta.size() != design.n_coef())
    throw_invalid("params: beta has length " + std::to_string(beta.size()) + ", design expects " +
                  std::to_string(design.n_coef()));
  if (!(sigma_e2 > 0.0)) throw_invalid("params: sigma_e2 must be > 0");
  if (!(sigma_s2 >= 0.0)) throw_invalid("params: sigma_s2 must be >= 0");
}

TrialData::TrialData(const Design& design, std::vector<Eigen::VectorXd> values,
                     std::vector<std::vector<std::uint8_t>> observed)
    : values_(std::move(values)), observed_(std::move(observed)) {
  if (static_cast<int>(values_.size()) != design.sequences() || observed_.size() != values_.size())
    throw_data("trial data: need one value vector and one mask per sequence");
  missing_.resize(values_.size());
  lengths_.resize(values_.size());
  for (int i = 0; i < design.sequences(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    const int len = design.seq_len(i);
    if (values_[si].size() != len || static_cast<int>(observed_[si].size()) != len)
      throw_data("trial data: sequence " + std::to_string(i + 1) + " must hold " + std::to_string(len) + " entries");
    int mis = 0;
    for (int k = 0; k < len; ++k) {
      if (observed_[si][static_cast<std::size_t>(k)]) {
        if (!std::isfinite(values_[si][k]))
          throw_data("trial data: observed entry " + std::to_string(k) + " in sequence " + std::to_string(i + 1) +
                     " is not finite");
      } else {
        ++mis;
        values_[si][k] = std::numeric_limits<double>::quiet_NaN();
      }
    }
    missing_[si] = mis;
    lengths_[si] = len;
  }
}

TrialData TrialData::complete(const Design& design, std::vector<Eigen::VectorXd> values) {
  std::vector<std::vector<std::uint8_t>> observed;
  observed.reserve(values.size());
  for (int i = 0; i < design.sequences(); ++i)
    observed.emplace_back(static_cast<std::size_t>(design.seq_len(i)), std::uint8_t{1});
  return TrialData(design, std::move(values), std::move(observed));
}

int TrialData::observed_count(int seq) const {
  const auto si = static_cast<std::size_t>(seq);
  return lengths_[si] - missing_[si];
}

long TrialData::total_missing() const { return std::accumulate(missing_.begin(), missing_.end(), 0L); }

long TrialData::total_observed() const {
  long n = 0;
  for (std::size_t i = 0; i < lengths_.size(); ++i) n += lengths_[i] - missing_[i];
  return n;
}

double TrialData::missing_fraction(int seq) const {
  const auto si = static_cast<std::size_t>(seq);
  return static_cast<double>(missing_[si]) / static_cast<double>(lengths_[si]);
}

double TrialData::missing_fraction() const {
  const long total = std::accumulate(lengths_.begin(), lengths_.end(), 0L);
  return static_cast<double>(total_missing()) / static_cast<double>(total);
}

namespace {

// Maps a column index to the factor block it belongs to, for error messages.
std::string column_block_name(const Design& design, int col) {
  if (col == 0) return "intercept";
  col -= 1;
  if (col < design.periods() - 1) return "period indicators";
  col -= design.periods() - 1;
  if (col < design.treatments() - 1) return "treatment indicators";
  return "response-variate indicators";
}

}  // namespace

void DesignMatrices::finalize(const std::string& context, const std::function<std::string(int)>& column_name) {
  // Rank of the stacked X equals the rank of the distinct subject blocks
  // stacked once per sequence (duplicated rows do not change rank).
  const int cols = static_cast<int>(blocks_.front().cols());
  Eigen::MatrixXd stack(static_cast<long>(blocks_.size()) * blocks_.front().rows(), cols);
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    stack.middleRows(static_cast<long>(i) * blocks_.front().rows(), blocks_.front().rows()) = blocks_[i];
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(stack);
  qr.setThreshold(1e-10);
  if (qr.rank() < cols) {
    // The columns the pivot never reached are the dependent ones.
    std::vector<bool> pivoted(static_cast<std::size_t>(cols), false);
    const auto& perm = qr.colsPermutation().indices();
    for (int r = 0; r < qr.rank(); ++r) pivoted[static_cast<std::size_t>(perm[r])] = true;
    std::set<std::string> names;
    for (int c = 0; c < cols; ++c)
      if (!pivoted[static_cast<std::size_t>(c)]) names.insert(column_name(c));
    std::string blocks;
    for (const auto& b : names) {
      if (!blocks.empty()) blocks += ", ";
      blocks += b;
    }
    throw_invalid(context + ": fixed effects are not identifiable (rank " + std::to_string(qr.rank()) + " of " +
                  std::to_string(cols) + "; dependent: " + blocks + ")");
  }
  xtx_.clear();
  xtx_.reserve(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    xtx_.push_back(static_cast<double>(subjects_[i]) * (blocks_[i].transpose() * blocks_[i]));
}

Eigen::MatrixXd DesignMatrices::sequence_x(int seq) const {
  const auto& block = blocks_[static_cast<std::size_t>(seq)];
  const int n = subjects_[static_cast<std::size_t>(seq)];
  Eigen::MatrixXd x(block.rows() * n, block.cols());
  for (int q = 0; q < n; ++q) x.middleRows(q * block.rows(), block.rows()) = block;
  return x;
}

Eigen::MatrixXd DesignMatrices::sequence_z(int seq) const {
  const long pm = blocks_[static_cast<std::size_t>(seq)].rows();
  const int n = subjects_[static_cast<std::size_t>(seq)];
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(pm * n, n);
  for (int q = 0; q < n; ++q) z.block(q * pm, q, pm, 1).setOnes();
  return z;
}

DesignMatrices DesignMatrices::transformed(const Eigen::MatrixXd& t) const {
  if (t.rows() != n_coef()) throw_invalid("design matrices: transform has wrong row count");
  DesignMatrices out;
  out.subjects_ = subjects_;
  out.blocks_.reserve(blocks_.size());
  for (const auto& b : blocks_) out.blocks_.push_back(b * t);
  out.finalize("restricted model", [](int c) { return "column " + std::to_string(c); });
  return out;
}

DesignMatrices build_design_matrices(const Design& design) {
  const int p = design.periods();
  const int t = design.treatments();
  const int m = design.responses();
  const int cols = design.n_coef();

  DesignMatrices out;
  out.subjects_ = design.subjects();
  out.blocks_.reserve(static_cast<std::size_t>(design.sequences()));
  for (int i = 0; i < design.sequences(); ++i) {
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(design.per_subject(), cols);
    for (int j = 0; j < p; ++j) {
      const int trt = design.treatment(i, j);
      for (int l = 0; l < m; ++l) {
        const int row = j * m + l;
        block(row, 0) = 1.0;
        if (j < p - 1) block(row, 1 + j) = 1.0;
        if (trt < t - 1) block(row, 1 + (p - 1) + trt) = 1.0;
        if (l < m - 1) block(row, 1 + (p - 1) + (t - 1) + l) = 1.0;
      }
    }
    out.blocks_.push_back(std::move(block));
  }

  out.finalize("design", [&design](int c) { return column_block_name(design, c); });
  return out;
}

Eigen::MatrixXd subject_covariance(const Params& params, int periods, int responses) {
  if (periods < 1 || responses < 1) throw_invalid("subject_covariance: periods and responses must be >= 1");
  if (!(params.sigma_e2 > 0.0)) throw_invalid("subject_covariance: sigma_e2 must be > 0");
  if (!(params.sigma_s2 >= 0.0)) throw_invalid("subject_covariance: sigma_s2 must be >= 0");
  const int pm = periods * responses;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(pm, pm, params.sigma_s2);
  sigma.diagonal().array() += params.sigma_e2;
  return sigma;
}

Eigen::MatrixXd marginal_covariance(const Params& params, const Design& design, int seq) {
  if (seq < 0 || seq >= design.sequences()) throw_invalid("marginal_covariance: sequence index out of range");
  const Eigen::MatrixXd block = subject_covariance(params, design.periods(), design.responses());
  const int n = design.subjects(seq);
  const int pm = design.per_subject();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(pm * n, pm * n);
  for (int q = 0; q < n; ++q) sigma.block(q * pm, q * pm, pm, pm) = block;
  return sigma;
}

}  // namespace mcx
