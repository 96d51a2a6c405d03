#include "icsysid/clustering.hpp"

#include <cmath>
#include <stdexcept>

#include "icsysid/errors.hpp"
#include "icsysid/training.hpp"

namespace icsysid {

void CcThresholds::validate() const {
  if (!(eps_delta > 0) || !(eps_p > 0) || !(eps_s > 0) || !(eps_theta > 0))
    throw ConfigError("thresholds: eps_delta, eps_p, eps_s, eps_theta must all be > 0");
}

Matrix glorot_init(int nx, int nu, double scale, RngEngine& rng) {
  if (nx < 1 || nu < 1) throw std::invalid_argument("glorot_init: dimensions must be >= 1");
  if (!(scale > 0)) throw std::invalid_argument("glorot_init: scale must be > 0");

  const double bound = scale * std::sqrt(6.0 / (nx + nu));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix theta(nx, nx + nu);
  for (Eigen::Index c = 0; c < theta.cols(); ++c)
    for (Eigen::Index r = 0; r < theta.rows(); ++r) theta(r, c) = dist(rng);
  return theta;
}

Matrix scaled_glorot_init(int nx, int nu, RngEngine& rng) {
  return glorot_init(nx, nu, 0.1, rng);
}

std::vector<Matrix> warm_init(const std::vector<Matrix>& gt_thetas, double eta, RngEngine& rng,
                              MatrixNorm2 norm) {
  if (!(eta > 0) || !(eta < 0.5))
    throw std::invalid_argument("warm_init: eta must lie in (0, 1/2)");

  const double bound = (0.5 - eta) * delta_min(gt_thetas, norm);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> radius(0.0, 1.0);

  std::vector<Matrix> inits;
  inits.reserve(gt_thetas.size());
  for (const Matrix& gt : gt_thetas) {
    Matrix direction(gt.rows(), gt.cols());
    for (Eigen::Index c = 0; c < direction.cols(); ++c)
      for (Eigen::Index r = 0; r < direction.rows(); ++r) direction(r, c) = unit(rng);
    direction *= bound * radius(rng) / matrix_norm2(direction, norm);
    inits.push_back(gt + direction);
  }
  return inits;
}

int assign_identity(const RegressionView& view, const std::vector<Matrix>& cluster_params) {
  if (cluster_params.empty()) throw std::invalid_argument("assign_identity: empty registry");

  int best_index = 0;
  double best_loss = mse_loss(cluster_params[0], view);
  for (std::size_t j = 1; j < cluster_params.size(); ++j) {
    const double loss = mse_loss(cluster_params[j], view);
    if (loss < best_loss) {
      best_loss = loss;
      best_index = static_cast<int>(j);
    }
  }
  return best_index;
}

std::vector<Matrix> aggregate_clusters(const std::vector<Matrix>& worker_params,
                                       const std::vector<int>& flags,
                                       const std::vector<Matrix>& previous) {
  if (worker_params.size() != flags.size())
    throw std::invalid_argument("aggregate_clusters: params/flags length mismatch");
  if (previous.empty()) throw std::invalid_argument("aggregate_clusters: empty registry");

  const int k = static_cast<int>(previous.size());
  std::vector<Matrix> result = previous;
  std::vector<int> counts(k, 0);
  std::vector<Matrix> sums(k);

  for (std::size_t i = 0; i < worker_params.size(); ++i) {
    const int j = flags[i];
    if (j < 0 || j >= k) throw std::invalid_argument("aggregate_clusters: flag out of range");
    if (counts[j] == 0)
      sums[j] = worker_params[i];
    else
      sums[j] += worker_params[i];
    ++counts[j];
  }
  for (int j = 0; j < k; ++j)
    if (counts[j] > 0) result[j] = sums[j] / counts[j];
  return result;
}

namespace {

void check_cc_inputs(const std::vector<double>& prev_fit, const std::vector<double>& curr_fit,
                     int cluster_count, const std::vector<int>& flags) {
  if (prev_fit.size() != curr_fit.size() || curr_fit.size() != flags.size())
    throw std::invalid_argument("cluster step: fit/flag vectors must share length");
  if (flags.empty()) throw std::invalid_argument("cluster step: no workers");
  if (cluster_count < 1) throw std::invalid_argument("cluster step: cluster count must be >= 1");
  for (int f : flags)
    if (f < 0 || f >= cluster_count) throw std::invalid_argument("cluster step: flag out of range");
}

bool plateaued_poor(double prev, double curr, const CcThresholds& th) {
  return std::abs(curr - prev) < th.eps_delta && curr < th.eps_p;
}

}  // namespace

CcStepResult clustercraft_step(const std::vector<double>& prev_fit,
                               const std::vector<double>& curr_fit, int cluster_count,
                               const std::vector<int>& flags, const CcThresholds& thresholds,
                               int nx, int nu, RngEngine& rng) {
  thresholds.validate();
  check_cc_inputs(prev_fit, curr_fit, cluster_count, flags);

  CcStepResult result{cluster_count, flags, std::nullopt};
  bool triggered = false;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (plateaued_poor(prev_fit[i], curr_fit[i], thresholds)) {
      result.flags[i] = cluster_count;  // shared new label
      triggered = true;
    }
  }
  if (triggered) {
    result.cluster_count = cluster_count + 1;
    result.spawned = scaled_glorot_init(nx, nu, rng);
  }
  return result;
}

CcStepResult ecc_step(const std::vector<double>& prev_fit, const std::vector<double>& curr_fit,
                      int cluster_count, const std::vector<int>& flags,
                      const std::vector<Matrix>& worker_params, const CcThresholds& thresholds,
                      int nx, int nu, RngEngine& rng, MatrixNorm1 norm) {
  thresholds.validate();
  check_cc_inputs(prev_fit, curr_fit, cluster_count, flags);
  if (worker_params.size() != flags.size())
    throw std::invalid_argument("ecc_step: worker params/flags length mismatch");

  CcStepResult result{cluster_count, flags, std::nullopt};
  int first_trigger = -1;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (plateaued_poor(prev_fit[i], curr_fit[i], thresholds)) {
      first_trigger = static_cast<int>(i);
      break;
    }
  }
  if (first_trigger < 0) return result;

  // The triggering worker recruits across all clusters; its own distance is
  // zero, so it always moves itself.
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (matrix_norm1(worker_params[first_trigger] - worker_params[i], norm) < thresholds.eps_s)
      result.flags[i] = cluster_count;
  }
  result.cluster_count = cluster_count + 1;
  result.spawned = scaled_glorot_init(nx, nu, rng);
  return result;
}

MergeResult cluster_merge_map(const std::vector<Matrix>& cluster_params, double eps_theta,
                              MatrixNorm2 norm) {
  if (cluster_params.empty()) throw std::invalid_argument("cluster_merge: empty registry");
  if (!(eps_theta > 0)) throw std::invalid_argument("cluster_merge: eps_theta must be > 0");

  const int k = static_cast<int>(cluster_params.size());
  MergeResult result;
  result.remap.assign(k, -1);

  for (int pivot = 0; pivot < k; ++pivot) {
    if (result.remap[pivot] >= 0) continue;
    const int merged_index = static_cast<int>(result.params.size());
    Matrix sum = cluster_params[pivot];
    int count = 1;
    result.remap[pivot] = merged_index;
    for (int j = pivot + 1; j < k; ++j) {
      if (result.remap[j] >= 0) continue;
      if (matrix_norm2(cluster_params[pivot] - cluster_params[j], norm) < eps_theta) {
        sum += cluster_params[j];
        ++count;
        result.remap[j] = merged_index;
      }
    }
    result.params.push_back(sum / count);
  }
  return result;
}

std::vector<Matrix> cluster_merge(const std::vector<Matrix>& cluster_params, double eps_theta,
                                  MatrixNorm2 norm) {
  return cluster_merge_map(cluster_params, eps_theta, norm).params;
}

}  // namespace icsysid
