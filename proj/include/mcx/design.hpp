#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace mcx {

// Combinatorial layout of a multi-response crossover trial: s treatment
// sequences, p periods, t treatments, m response variates, n_i subjects per
// sequence, and the assignment map giving the treatment administered in each
// (sequence, period) cell.
//
// Immutable after construction.
class Design {
 public:
  // assignment is row-major s x p, entries are 0-based treatment indices.
  Design(int sequences, int periods, int treatments, int responses, std::vector<int> subjects,
         std::vector<int> assignment);

  int sequences() const { return s_; }
  int periods() const { return p_; }
  int treatments() const { return t_; }
  int responses() const { return m_; }
  int subjects(int seq) const { return subjects_[static_cast<std::size_t>(seq)]; }
  const std::vector<int>& subjects() const { return subjects_; }
  int total_subjects() const { return total_subjects_; }

  // Treatment (0-based) administered in period j of sequence i.
  int treatment(int seq, int period) const { return assignment_[static_cast<std::size_t>(seq * p_ + period)]; }

  // Observations per subject (p * m) and per sequence (p * m * n_i).
  int per_subject() const { return p_ * m_; }
  int seq_len(int seq) const { return per_subject() * subjects(seq); }
  long total_len() const;

  // Number of fixed-effect coefficients: p + t + m - 2.
  int n_coef() const { return p_ + t_ + m_ - 2; }

  // Flat entry index within a sequence: subject-major, then period, then
  // response variate. All modules share this ordering.
  int entry_index(int subject, int period, int response) const {
    return subject * per_subject() + period * m_ + response;
  }

  // Generic coefficient names: Intercept, Period1..Period{p-1},
  // Trt1..Trt{t-1}, Res1..Res{m-1}. The last level of each factor is the
  // reference and carries no column.
  std::vector<std::string> coef_names() const;

  // Design with the same layout but different per-sequence subject counts.
  Design with_subjects(std::vector<int> subjects) const;

 private:
  int s_, p_, t_, m_;
  std::vector<int> subjects_;
  std::vector<int> assignment_;
  int total_subjects_;
};

// Fixed effects in the order (intercept, period 1..p-1, treatment 1..t-1,
// response 1..m-1) plus the two variance components.
struct Params {
  Eigen::VectorXd beta;
  double sigma_e2 = 1.0;
  double sigma_s2 = 0.0;

  // Throws if beta length disagrees with the design or variances are out of
  // range (sigma_e2 must be > 0, sigma_s2 >= 0).
  void validate(const Design& design) const;
};

// Long-format responses for one trial, stored per sequence in entry_index
// order together with an observed/missing mask. Missing slots hold NaN so a
// computation that consults them poisons its result instead of silently
// using stale data.
class TrialData {
 public:
  TrialData(const Design& design, std::vector<Eigen::VectorXd> values,
            std::vector<std::vector<std::uint8_t>> observed);

  // Fully observed data.
  static TrialData complete(const Design& design, std::vector<Eigen::VectorXd> values);

  const Eigen::VectorXd& values(int seq) const { return values_[static_cast<std::size_t>(seq)]; }
  const std::vector<std::uint8_t>& observed(int seq) const { return observed_[static_cast<std::size_t>(seq)]; }
  bool is_observed(int seq, int idx) const { return observed_[static_cast<std::size_t>(seq)][static_cast<std::size_t>(idx)] != 0; }

  int missing_count(int seq) const { return missing_[static_cast<std::size_t>(seq)]; }
  int observed_count(int seq) const;
  long total_missing() const;
  long total_observed() const;
  double missing_fraction(int seq) const;
  double missing_fraction() const;

  int n_sequences() const { return static_cast<int>(values_.size()); }

 private:
  std::vector<Eigen::VectorXd> values_;
  std::vector<std::vector<std::uint8_t>> observed_;
  std::vector<int> missing_;
  std::vector<int> lengths_;
};

// Fixed- and random-effect design matrices. Within a sequence every subject
// shares the same pm x (p+t+m-2) fixed-effect block, so only the block is
// stored; stacked per-sequence matrices are materialized on demand.
class DesignMatrices {
 public:
  const Eigen::MatrixXd& subject_block(int seq) const { return blocks_[static_cast<std::size_t>(seq)]; }

  // Stacked X_i: (pm * n_i) x n_coef.
  Eigen::MatrixXd sequence_x(int seq) const;

  // Z_i = I_{n_i} (x) 1_pm: (pm * n_i) x n_i.
  Eigen::MatrixXd sequence_z(int seq) const;

  // X_i' X_i = n_i * block' block.
  const Eigen::MatrixXd& xtx(int seq) const { return xtx_[static_cast<std::size_t>(seq)]; }

  int n_coef() const { return static_cast<int>(blocks_.front().cols()); }
  int n_sequences() const { return static_cast<int>(blocks_.size()); }
  const std::vector<int>& subjects() const { return subjects_; }

  // Matrices for a model with columns transformed by `t` (n_coef x k).
  // Used by restricted fits; the rank of the transformed stack is rechecked.
  DesignMatrices transformed(const Eigen::MatrixXd& t) const;

  friend DesignMatrices build_design_matrices(const Design& design);

 private:
  DesignMatrices() = default;
  void finalize(const std::string& context, const std::function<std::string(int)>& column_name);

  std::vector<Eigen::MatrixXd> blocks_;
  std::vector<Eigen::MatrixXd> xtx_;
  std::vector<int> subjects_;
};

// Builds the per-sequence design matrices for a crossover layout. Column
// order: intercept, period indicators (periods 1..p-1), treatment indicators
// (treatments 1..t-1, set from the assignment map), response-variate
// indicators (variates 1..m-1). Throws an identifiability error naming the
// offending column block if the stacked X is rank deficient.
DesignMatrices build_design_matrices(const Design& design);

// Per-subject covariance sigma_s2 * J_pm + sigma_e2 * I_pm.
Eigen::MatrixXd subject_covariance(const Params& params, int periods, int responses);

// Marginal covariance of a whole sequence: block diagonal with n_i copies of
// subject_covariance (equals Z D Z' + sigma_e2 I).
Eigen::MatrixXd marginal_covariance(const Params& params, const Design& design, int seq);

}  // namespace mcx
