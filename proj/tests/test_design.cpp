#include <doctest.h>

#include <string>

#include "mcx/design.hpp"
#include "mcx/error.hpp"
#include "mcx/rng.hpp"
#include "oracles.hpp"

using namespace mcx;

namespace {

Design two_seq_design(int subjects = 50) {
  // Two sequences AB / BA, two periods, four response variates.
  return Design(2, 2, 2, 4, {subjects, subjects}, {0, 1, 1, 0});
}

Design case_design() {
  // Three sequences, three periods, three treatments, ten responses.
  // Sequence orders: (B,A,C), (C,B,A), (A,C,B) with A=placebo, B=10mg, C=25mg.
  return Design(3, 3, 3, 10, {6, 6, 5}, {1, 0, 2, 2, 1, 0, 0, 2, 1});
}

}  // namespace

TEST_CASE("design invariants") {
  CHECK_THROWS_AS(Design(0, 1, 1, 1, {}, {}), error);
  CHECK_THROWS_AS(Design(1, 1, 1, 1, {0}, {0}), error);            // subjects < 1
  CHECK_THROWS_AS(Design(1, 2, 2, 1, {3}, {0, 3}), error);         // treatment out of range
  CHECK_THROWS_AS(Design(1, 2, 2, 1, {3}, {0}), error);            // assignment not total
  CHECK_THROWS_AS(Design(1, 2, 3, 1, {3}, {0, 1}), error);         // treatment 3 never used
  const Design d = two_seq_design();
  CHECK(d.n_coef() == 6);
  CHECK(d.total_subjects() == 100);
  CHECK(d.per_subject() == 8);
}

TEST_CASE("design matrix shapes match the reference scenario") {
  const Design d = two_seq_design();
  const DesignMatrices mats = build_design_matrices(d);
  CHECK(mats.sequence_x(0).rows() == 400);
  CHECK(mats.sequence_x(0).cols() == 6);
  CHECK(mats.sequence_z(0).rows() == 400);
  CHECK(mats.sequence_z(0).cols() == 50);

  // degenerate single-cell design collapses to X = Z = [1]
  const Design tiny(1, 1, 1, 1, {1}, {0});
  const DesignMatrices tm = build_design_matrices(tiny);
  CHECK(tm.sequence_x(0).rows() == 1);
  CHECK(tm.sequence_x(0).cols() == 1);
  CHECK(tm.sequence_x(0)(0, 0) == 1.0);
  CHECK(tm.sequence_z(0)(0, 0) == 1.0);

  const Design cs = case_design();
  const DesignMatrices cm = build_design_matrices(cs);
  CHECK(cs.n_coef() == 14);
  CHECK(cm.sequence_x(0).rows() == 180);
  CHECK(cm.sequence_x(0).cols() == 14);
  CHECK(cm.sequence_z(0).rows() == 180);
  CHECK(cm.sequence_z(0).cols() == 6);
}

TEST_CASE("design matrix column structure") {
  const Design d = two_seq_design(3);
  const DesignMatrices mats = build_design_matrices(d);
  const Eigen::MatrixXd& b0 = mats.subject_block(0);  // sequence AB
  const int m = 4;
  for (int j = 0; j < 2; ++j) {
    for (int l = 0; l < m; ++l) {
      const int r = j * m + l;
      CHECK(b0(r, 0) == 1.0);                      // intercept
      CHECK(b0(r, 1) == (j == 0 ? 1.0 : 0.0));     // period 1 indicator
      // sequence AB: treatment 1 in period 1
      CHECK(b0(r, 2) == (j == 0 ? 1.0 : 0.0));
      for (int c = 0; c < 3; ++c) CHECK(b0(r, 3 + c) == (l == c ? 1.0 : 0.0));
    }
  }
  const Eigen::MatrixXd& b1 = mats.subject_block(1);  // sequence BA: treatment 1 in period 2
  CHECK(b1(0, 2) == 0.0);
  CHECK(b1(m, 2) == 1.0);

  // Z'Z = pm * I exactly.
  const Eigen::MatrixXd z = mats.sequence_z(1);
  CHECK((z.transpose() * z - 8.0 * Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);

  // Treatment-indicator column sums: m * (cells assigned that treatment) * n_i,
  // counted by brute force over the assignment map.
  for (int i = 0; i < d.sequences(); ++i) {
    int cells = 0;
    for (int j = 0; j < d.periods(); ++j)
      if (d.treatment(i, j) == 0) ++cells;
    const double colsum = mats.sequence_x(i).col(2).sum();
    CHECK(colsum == doctest::Approx(static_cast<double>(m * cells * d.subjects(i))));
  }
}

TEST_CASE("build_design_matrices is pure") {
  const Design d = case_design();
  const DesignMatrices a = build_design_matrices(d);
  const DesignMatrices b = build_design_matrices(d);
  for (int i = 0; i < d.sequences(); ++i) CHECK(a.subject_block(i) == b.subject_block(i));
}

TEST_CASE("rank deficiency is reported with the offending block") {
  // One sequence with two periods and two treatments: the treatment indicator
  // equals the period indicator, so neither is identifiable.
  const Design d(1, 2, 2, 1, {4}, {0, 1});
  CHECK_THROWS_WITH_AS(build_design_matrices(d),
                       doctest::Contains("not identifiable"), error);
  try {
    build_design_matrices(d);
  } catch (const error& e) {
    const std::string msg = e.what();
    const bool names_block = msg.find("treatment") != std::string::npos ||
                             msg.find("period") != std::string::npos;
    CHECK(names_block);
  }
}

TEST_CASE("subject covariance closed form") {
  Params p;
  p.beta = Eigen::VectorXd::Zero(6);
  p.sigma_e2 = 1.44;
  p.sigma_s2 = 0.49;
  const Eigen::MatrixXd sigma = subject_covariance(p, 2, 4);
  CHECK(sigma.rows() == 8);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c)
      CHECK(sigma(r, c) == doctest::Approx(r == c ? 1.93 : 0.49));

  // sigma_s2 = 0 reduces to sigma_e2 * I
  Params ind = p;
  ind.sigma_s2 = 0.0;
  const Eigen::MatrixXd diag = subject_covariance(ind, 2, 4);
  CHECK((diag - 1.44 * Eigen::MatrixXd::Identity(8, 8)).norm() == 0.0);

  // Eigenvalues are sigma_e2 (pm-1 times) and sigma_e2 + pm sigma_s2.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  CHECK(es.eigenvalues().minCoeff() == doctest::Approx(1.44).epsilon(1e-12));
  CHECK(es.eigenvalues().maxCoeff() == doctest::Approx(1.44 + 8 * 0.49).epsilon(1e-12));
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("marginal covariance equals dense Z D Z' + sigma_e2 I") {
  Params p;
  p.beta = Eigen::VectorXd::Zero(4);
  p.sigma_e2 = 0.7;
  p.sigma_s2 = 1.3;
  const Design d(1, 2, 1, 2, {3}, {0, 0});
  CHECK(d.n_coef() == 4 - 1);  // p + t + m - 2 = 3
  p.beta = Eigen::VectorXd::Zero(3);
  const Eigen::MatrixXd sigma = marginal_covariance(p, d, 0);
  CHECK(sigma.rows() == 12);

  const DesignMatrices mats = build_design_matrices(d);
  const Eigen::MatrixXd z = mats.sequence_z(0);
  const Eigen::MatrixXd dense =
      z * (p.sigma_s2 * Eigen::MatrixXd::Identity(3, 3)) * z.transpose() +
      p.sigma_e2 * Eigen::MatrixXd::Identity(12, 12);
  CHECK((sigma - dense).cwiseAbs().maxCoeff() < 1e-14);

  // n_i = 1: equals the subject covariance
  const Design single(1, 2, 1, 2, {1}, {0, 0});
  CHECK((marginal_covariance(p, single, 0) - subject_covariance(p, 2, 2)).norm() == 0.0);

  // independence across subjects at p = m = 1
  Params q;
  q.beta = Eigen::VectorXd::Zero(1);
  q.sigma_e2 = 1.0;
  q.sigma_s2 = 1.0;
  const Design pair(1, 1, 1, 1, {2}, {0});
  const Eigen::MatrixXd s2 = marginal_covariance(q, pair, 0);
  CHECK(s2(0, 0) == doctest::Approx(2.0));
  CHECK(s2(1, 1) == doctest::Approx(2.0));
  CHECK(s2(0, 1) == 0.0);
}

TEST_CASE("rank-one form matches dense per-subject covariance across random shapes") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 1 + static_cast<int>(rng.raw() % 4);
    const int m = 1 + static_cast<int>(rng.raw() % 5);
    Params par;
    par.beta = Eigen::VectorXd::Zero(1);
    par.sigma_e2 = 0.1 + 3.0 * rng.uniform();
    par.sigma_s2 = 3.0 * rng.uniform();
    const Eigen::MatrixXd sigma = subject_covariance(par, p, m);
    const int pm = p * m;
    const Eigen::MatrixXd dense = par.sigma_s2 * Eigen::MatrixXd::Ones(pm, pm) +
                                  par.sigma_e2 * Eigen::MatrixXd::Identity(pm, pm);
    CHECK((sigma - dense).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("trial data mask bookkeeping") {
  const Design d(1, 2, 1, 2, {2}, {0, 0});
  Eigen::VectorXd v(8);
  v << 1, 2, 3, 4, 5, 6, 7, 8;
  std::vector<std::uint8_t> mask{1, 0, 1, 1, 1, 1, 0, 1};
  TrialData data(d, {v}, {mask});
  CHECK(data.missing_count(0) == 2);
  CHECK(data.observed_count(0) == 6);
  CHECK(data.total_missing() == 2);
  CHECK(data.missing_fraction(0) == doctest::Approx(0.25));
  CHECK(std::isnan(data.values(0)[1]));  // masked entries are poisoned
  CHECK(data.values(0)[2] == 3.0);

  // observed non-finite entries are rejected
  Eigen::VectorXd bad = v;
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(TrialData(d, {bad}, {std::vector<std::uint8_t>(8, 1)}), error);
}
