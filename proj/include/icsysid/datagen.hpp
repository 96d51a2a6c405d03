#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "icsysid/lti.hpp"
#include "icsysid/rng.hpp"
#include "icsysid/types.hpp"

namespace icsysid {

// Synthetic fleet description: gt_cluster_count ground-truth clusters whose
// sizes sum to the worker count; every worker gets rollouts_per_worker
// trajectories of `steps` steps.
struct DatasetSpec {
  int gt_cluster_count = 0;
  std::vector<int> cluster_sizes;
  int rollouts_per_worker = 0;
  int steps = 0;
  double sigma_x = 0.05;
  double sigma_u = 0.05;
  double sigma_w = 0.02;
  std::uint64_t master_seed = 1;
  double cc_fraction = 0.2;
  // When set, overrides the built-in ground-truth models.
  std::optional<std::vector<LtiParams>> custom_ground_truth;

  int worker_count() const;
  void validate() const;
};

struct GroundTruthCluster {
  int label = 0;  // 1-based
  LtiParams params;
  std::vector<int> member_worker_ids;  // 0-based, contiguous
};

// Per-worker data with the train / cluster-check (CC) partition applied.
struct WorkerDataset {
  int worker_id = 0;  // 0-based
  int gt_label = 0;   // 1-based
  std::vector<Rollout> train_rollouts;
  std::vector<Rollout> cc_rollouts;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<GroundTruthCluster> ground_truth;
  std::vector<WorkerDataset> workers;
};

// Regression arrangement of one or more rollouts: column s of phi stacks
// [x_s; u_s] and column s of x holds the one-step target x_{s+1}.
struct RegressionView {
  Matrix phi;  // (N_x + N_u) x S
  Matrix x;    // N_x x S

  int sample_count() const { return static_cast<int>(phi.cols()); }
};

// The five benchmark ground-truth models (N_x = 3, N_u = 2).
std::vector<LtiParams> builtin_ground_truth();

// Ground truth used by a spec: custom models when given, otherwise the first
// gt_cluster_count built-in models.
std::vector<LtiParams> select_ground_truth(const DatasetSpec& spec);

// Deterministic shuffled split at rollout granularity. CC share rounds to
// round(cc_fraction * N), clamped so both partitions stay non-empty.
std::pair<std::vector<Rollout>, std::vector<Rollout>> split_worker_data(
    const std::vector<Rollout>& rollouts, double cc_fraction, RngEngine& rng);

// Generates every worker's rollouts from its cluster's model and applies the
// train/CC split. Draws come from per-(worker, rollout) substreams of
// spec.master_seed, so construction may be parallelized over workers without
// affecting the result.
Dataset build_synthetic_dataset(const DatasetSpec& spec, const std::vector<LtiParams>& gt);

RegressionView make_regression_view(const std::vector<Rollout>& rollouts);

// Index batches over S samples: a shuffled permutation cut into consecutive
// chunks of size mbs; a final partial batch is kept.
std::vector<std::vector<int>> make_minibatches(int sample_count, int mbs, RngEngine& rng);

}  // namespace icsysid
