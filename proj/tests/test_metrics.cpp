#include <cmath>

#include "doctest.h"
#include "icsysid/metrics.hpp"

using namespace icsysid;

TEST_CASE("per-state fit matches the normalized-error formula by hand") {
  Matrix measured(1, 3), estimated(1, 3);
  measured << 1, 2, 3;
  estimated << 1, 2, 4;
  // error norm 1; deviation norm sqrt(2) -> fit = 1 - 1/sqrt(2)
  const Vector fit = fit_per_state(measured, estimated);
  CHECK(fit(0) == doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)).epsilon(1e-15));

  // A perfect estimate scores exactly 1 on every state.
  Matrix two_states(2, 4);
  two_states << 1, 2, 3, 4, -1, 0, 1, 2;
  const Vector perfect = fit_per_state(two_states, two_states);
  CHECK(perfect(0) == 1.0);
  CHECK(perfect(1) == 1.0);
}

TEST_CASE("fit can be negative for estimates worse than the mean") {
  Matrix measured(1, 2), estimated(1, 2);
  measured << 0, 2;
  estimated << 10, -10;
  CHECK(fit_per_state(measured, estimated)(0) < 0.0);
}

TEST_CASE("constant measured series has no defined fit") {
  Matrix measured(1, 3), estimated(1, 3);
  measured << 5, 5, 5;
  estimated << 5, 5, 5;
  CHECK_THROWS_AS(fit_per_state(measured, estimated), std::domain_error);

  Matrix short_m(1, 1), short_e(1, 1);
  short_m << 1;
  short_e << 1;
  CHECK_THROWS_AS(fit_per_state(short_m, short_e), std::invalid_argument);
}

TEST_CASE("worker scoring concatenates rollouts before normalizing") {
  const LtiParams gt = builtin_ground_truth()[0];
  RngEngine rng = make_engine(41, Stream::rollout);
  std::vector<Rollout> rollouts = {generate_rollout(gt, 10, 0.05, 0.05, 0.02, rng),
                                   generate_rollout(gt, 10, 0.05, 0.05, 0.02, rng)};

  const FitRecord record = score_worker(gt, rollouts, FitMode::prediction);
  REQUIRE(record.per_state.size() == 3);
  CHECK(record.min_fit == record.per_state.minCoeff());

  // Manual concatenation must agree exactly.
  Matrix measured(3, 20), estimated(3, 20);
  measured << rollouts[0].states.rightCols(10), rollouts[1].states.rightCols(10);
  estimated << predict_rollout(gt, rollouts[0]), predict_rollout(gt, rollouts[1]);
  const Vector manual = fit_per_state(measured, estimated);
  CHECK((record.per_state - manual).cwiseAbs().maxCoeff() == 0.0);

  // The true model predicts well on its own noisy data.
  CHECK(record.min_fit > 0.5);
}

TEST_CASE("simulation fit uses the free-running trajectory") {
  const LtiParams gt = builtin_ground_truth()[3];
  RngEngine rng = make_engine(42, Stream::rollout);
  std::vector<Rollout> rollouts = {generate_rollout(gt, 30, 0.05, 0.05, 0.0, rng)};

  // Noiseless dynamics: simulation reproduces the data exactly.
  const FitRecord record = score_worker(gt, rollouts, FitMode::simulation);
  CHECK(record.min_fit == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(record.mode == FitMode::simulation);
}

TEST_CASE("cluster mean fit averages per ground-truth cluster in label order") {
  FitRecord r1, r2, r3;
  r1.per_state = Vector::Constant(2, 0.8);
  r2.per_state = Vector::Constant(2, 0.6);
  r3.per_state = Vector::Constant(2, 0.4);
  r1.min_fit = 0.8;
  r2.min_fit = 0.6;
  r3.min_fit = 0.4;

  const Matrix means = cluster_mean_fit({r1, r2, r3}, {1, 1, 2}, 2);
  REQUIRE(means.rows() == 2);
  REQUIRE(means.cols() == 2);
  CHECK(means(0, 0) == doctest::Approx(0.7));
  CHECK(means(1, 0) == doctest::Approx(0.4));

  const Vector fleet = fleet_mean_fit({r1, r2, r3});
  CHECK(fleet(0) == doctest::Approx(0.6));

  CHECK_THROWS_AS(cluster_mean_fit({r1, r2}, {1, 1}, 2), std::invalid_argument);  // cluster 2 empty
  CHECK_THROWS_AS(cluster_mean_fit({r1}, {3}, 2), std::invalid_argument);
}

TEST_CASE("misclassification counts workers in mixed clusters") {
  // gt labels (1,1,2), flags (1,2,2): the flag-2 group mixes labels 1 and 2,
  // so two of three workers count as misclassified.
  CHECK(misclassified_pct({1, 2, 2}, {1, 1, 2}) == doctest::Approx(200.0 / 3.0));

  // Pure groups: no misclassification regardless of group count.
  CHECK(misclassified_pct({4, 4, 9}, {1, 1, 2}) == 0.0);
  // A duplicated-but-pure split of one gt cluster is still clean.
  CHECK(misclassified_pct({0, 1, 2}, {1, 1, 2}) == 0.0);
  // Everything lumped together: everyone misclassified.
  CHECK(misclassified_pct({0, 0, 0}, {1, 1, 2}) == 100.0);
}

TEST_CASE("misclassification is invariant under flag relabeling") {
  const std::vector<int> gt = {1, 1, 2, 2, 3};
  const std::vector<int> flags = {0, 0, 1, 5, 5};
  const std::vector<int> renamed = {7, 7, 2, 0, 0};
  CHECK(misclassified_pct(flags, gt) == misclassified_pct(renamed, gt));
  // The flag-5 group mixes labels {2,3}; both of its members count: 2/5.
  CHECK(misclassified_pct(flags, gt) == doctest::Approx(40.0));
}

TEST_CASE("parameter errors and separations") {
  const Matrix gt0 = builtin_ground_truth()[0].theta();
  const Matrix gt1 = builtin_ground_truth()[1].theta();

  Matrix off = gt0;
  off(0, 0) += 3.0;
  off(0, 1) += 4.0;
  CHECK(param_error(off, gt0) == doctest::Approx(5.0));

  CHECK(best_match_error({gt1, off, gt0}, gt0) == 0.0);
  CHECK(best_match_error({gt1, off}, gt0) == doctest::Approx(std::min(param_error(gt1, gt0), 5.0)));
  CHECK_THROWS_AS(best_match_error({}, gt0), std::invalid_argument);

  std::vector<Matrix> thetas;
  for (const LtiParams& p : builtin_ground_truth()) thetas.push_back(p.theta());
  const double dmin_spec = delta_min(thetas, MatrixNorm2::spectral);
  const double dmin_frob = delta_min(thetas, MatrixNorm2::frobenius);
  CHECK(dmin_spec > 0.0);
  CHECK(dmin_frob >= dmin_spec);  // Frobenius dominates the spectral norm
  CHECK_THROWS_AS(delta_min({gt0}), std::invalid_argument);
}

TEST_CASE("matrix norms agree with hand values") {
  Matrix m(2, 2);
  m << 3, 0, 4, 0;  // rank one: spectral = frobenius = 5
  CHECK(matrix_norm2(m, MatrixNorm2::spectral) == doctest::Approx(5.0));
  CHECK(matrix_norm2(m, MatrixNorm2::frobenius) == doctest::Approx(5.0));

  Matrix d(2, 2);
  d << 1, 0, 0, -2;  // diagonal: spectral 2, frobenius sqrt(5)
  CHECK(matrix_norm2(d, MatrixNorm2::spectral) == doctest::Approx(2.0));
  CHECK(matrix_norm2(d, MatrixNorm2::frobenius) == doctest::Approx(std::sqrt(5.0)));

  Matrix n(2, 3);
  n << 1, -2, 3, -4, 5, -6;
  CHECK(matrix_norm1(n, MatrixNorm1::entrywise) == doctest::Approx(21.0));
  CHECK(matrix_norm1(n, MatrixNorm1::induced) == doctest::Approx(9.0));  // max column sum
}

TEST_CASE("unstable cluster share pools across repetitions") {
  Matrix stable(2, 3);
  stable << 0.1, 0.0, 1.0, 0.0, 0.1, 1.0;
  Matrix unstable(2, 3);
  unstable << 1.5, 0.0, 1.0, 0.0, 0.2, 1.0;

  // Rep 1 has 2 clusters (one unstable), rep 2 has 3 stable ones: 1/5 = 20%.
  const double pct = unstable_cluster_pct({{stable, unstable}, {stable, stable, stable}});
  CHECK(pct == doctest::Approx(20.0));

  // Marginally unstable (spectral radius exactly 1) counts as unstable.
  Matrix marginal(2, 3);
  marginal << 1.0, 0.0, 1.0, 0.0, 0.5, 1.0;
  CHECK(unstable_cluster_pct({{marginal}}) == 100.0);

  Matrix square(2, 2);
  square.setZero();
  CHECK_THROWS_AS(unstable_cluster_pct({{square}}), std::invalid_argument);
}
