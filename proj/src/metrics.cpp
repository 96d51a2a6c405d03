#include "icsysid/metrics.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace icsysid {

double matrix_norm2(const Matrix& m, MatrixNorm2 norm) {
  if (m.size() == 0) throw std::invalid_argument("matrix_norm2: empty matrix");
  if (norm == MatrixNorm2::frobenius) return m.norm();
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double matrix_norm1(const Matrix& m, MatrixNorm1 norm) {
  if (m.size() == 0) throw std::invalid_argument("matrix_norm1: empty matrix");
  if (norm == MatrixNorm1::entrywise) return m.cwiseAbs().sum();
  return m.cwiseAbs().colwise().sum().maxCoeff();
}

double param_error(const Matrix& estimated_theta, const Matrix& gt_theta) {
  if (estimated_theta.rows() != gt_theta.rows() || estimated_theta.cols() != gt_theta.cols())
    throw std::invalid_argument("param_error: shape mismatch");
  return (estimated_theta - gt_theta).norm();
}

double best_match_error(const std::vector<Matrix>& estimates, const Matrix& gt_theta) {
  if (estimates.empty()) throw std::invalid_argument("best_match_error: empty estimate list");
  double best = std::numeric_limits<double>::infinity();
  for (const Matrix& theta : estimates) best = std::min(best, param_error(theta, gt_theta));
  return best;
}

double delta_min(const std::vector<Matrix>& gt_thetas, MatrixNorm2 norm) {
  if (gt_thetas.size() < 2) throw std::invalid_argument("delta_min: need at least two models");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < gt_thetas.size(); ++i)
    for (std::size_t j = i + 1; j < gt_thetas.size(); ++j)
      best = std::min(best, matrix_norm2(gt_thetas[i] - gt_thetas[j], norm));
  return best;
}

Vector fit_per_state(const Matrix& measured, const Matrix& estimated) {
  if (measured.rows() != estimated.rows() || measured.cols() != estimated.cols())
    throw std::invalid_argument("fit_per_state: shape mismatch");
  if (measured.cols() < 2) throw std::invalid_argument("fit_per_state: series length must be >= 2");

  Vector fits(measured.rows());
  for (Eigen::Index n = 0; n < measured.rows(); ++n) {
    const double deviation = (measured.row(n).array() - measured.row(n).mean()).matrix().norm();
    if (deviation == 0.0)
      throw std::domain_error("fit_per_state: constant measured series has no defined fit");
    fits(n) = 1.0 - (measured.row(n) - estimated.row(n)).norm() / deviation;
  }
  return fits;
}

FitRecord score_worker(const LtiParams& params, const std::vector<Rollout>& rollouts,
                       FitMode mode) {
  if (rollouts.empty()) throw std::invalid_argument("score_worker: no rollouts");

  int total = 0;
  for (const Rollout& r : rollouts) total += r.steps();

  Matrix measured(params.state_dim(), total);
  Matrix estimated(params.state_dim(), total);
  int offset = 0;
  for (const Rollout& r : rollouts) {
    const int t = r.steps();
    measured.middleCols(offset, t) = r.states.rightCols(t);
    if (mode == FitMode::prediction) {
      estimated.middleCols(offset, t) = predict_rollout(params, r);
    } else {
      estimated.middleCols(offset, t) =
          simulate_rollout(params, r.states.col(0), r.inputs).states.rightCols(t);
    }
    offset += t;
  }

  FitRecord record;
  record.per_state = fit_per_state(measured, estimated);
  record.min_fit = record.per_state.minCoeff();
  record.mode = mode;
  return record;
}

Matrix cluster_mean_fit(const std::vector<FitRecord>& records, const std::vector<int>& gt_labels,
                        int gt_cluster_count) {
  if (records.size() != gt_labels.size())
    throw std::invalid_argument("cluster_mean_fit: records/labels length mismatch");
  if (records.empty()) throw std::invalid_argument("cluster_mean_fit: no workers");
  if (gt_cluster_count < 1) throw std::invalid_argument("cluster_mean_fit: bad cluster count");

  const Eigen::Index nx = records[0].per_state.size();
  Matrix sums = Matrix::Zero(gt_cluster_count, nx);
  std::vector<int> counts(gt_cluster_count, 0);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const int q = gt_labels[i];
    if (q < 1 || q > gt_cluster_count)
      throw std::invalid_argument("cluster_mean_fit: label out of range");
    sums.row(q - 1) += records[i].per_state.transpose();
    ++counts[q - 1];
  }
  for (int q = 0; q < gt_cluster_count; ++q) {
    if (counts[q] == 0) throw std::invalid_argument("cluster_mean_fit: empty ground-truth cluster");
    sums.row(q) /= counts[q];
  }
  return sums;
}

Vector fleet_mean_fit(const std::vector<FitRecord>& records) {
  if (records.empty()) throw std::invalid_argument("fleet_mean_fit: no workers");
  Vector mean = Vector::Zero(records[0].per_state.size());
  for (const FitRecord& r : records) mean += r.per_state;
  return mean / static_cast<double>(records.size());
}

double misclassified_pct(const std::vector<int>& flags, const std::vector<int>& gt_labels) {
  if (flags.size() != gt_labels.size())
    throw std::invalid_argument("misclassified_pct: flags/labels length mismatch");
  if (flags.empty()) throw std::invalid_argument("misclassified_pct: no workers");

  std::map<int, std::set<int>> labels_by_flag;
  for (std::size_t i = 0; i < flags.size(); ++i) labels_by_flag[flags[i]].insert(gt_labels[i]);

  int misclassified = 0;
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (labels_by_flag[flags[i]].size() > 1) ++misclassified;
  return 100.0 * misclassified / static_cast<double>(flags.size());
}

double unstable_cluster_pct(const std::vector<std::vector<Matrix>>& final_registries) {
  if (final_registries.empty())
    throw std::invalid_argument("unstable_cluster_pct: no repetitions");

  int total = 0;
  int unstable = 0;
  for (const std::vector<Matrix>& registry : final_registries) {
    for (const Matrix& theta : registry) {
      const Eigen::Index nx = theta.rows();
      if (theta.cols() <= nx)
        throw std::invalid_argument("unstable_cluster_pct: theta must be N_x x (N_x + N_u)");
      ++total;
      if (!stability_report(theta.leftCols(nx)).is_stable) ++unstable;
    }
  }
  if (total == 0) throw std::invalid_argument("unstable_cluster_pct: no clusters");
  return 100.0 * unstable / static_cast<double>(total);
}

}  // namespace icsysid
