#pragma once

#include <optional>
#include <vector>

#include "icsysid/datagen.hpp"
#include "icsysid/metrics.hpp"
#include "icsysid/rng.hpp"
#include "icsysid/types.hpp"

namespace icsysid {

struct CcThresholds {
  double eps_delta = 0.0005;  // plateau: |min-fit change| below this
  double eps_p = 0.5;         // poor fit: min-fit below this
  double eps_s = 0.1;         // eCC grouping distance (1-norm)
  double eps_theta = 0.5;     // merge distance (2-norm)

  void validate() const;
};

// Uniform draw over [-scale*sqrt(6/(nx+nu)), scale*sqrt(6/(nx+nu))) for the
// full N_x x (N_x + N_u) parameter matrix. scale = 1 is the standard Glorot
// bound; the incremental method uses the 0.1-scaled variant.
Matrix glorot_init(int nx, int nu, double scale, RngEngine& rng);
Matrix scaled_glorot_init(int nx, int nu, RngEngine& rng);

// Ground-truth models perturbed by a random matrix of 2-norm strictly below
// (1/2 - eta) * delta_min. Requires 0 < eta < 1/2 and at least two models.
std::vector<Matrix> warm_init(const std::vector<Matrix>& gt_thetas, double eta, RngEngine& rng,
                              MatrixNorm2 norm = MatrixNorm2::spectral);

// Cluster identity estimate: index of the cluster model with the lowest MSE
// on the worker's data; ties keep the lowest index.
int assign_identity(const RegressionView& view, const std::vector<Matrix>& cluster_params);

// Per-cluster unweighted mean of member worker models. Flags refer to
// positions in `previous`; clusters without members keep their previous
// parameters unchanged.
std::vector<Matrix> aggregate_clusters(const std::vector<Matrix>& worker_params,
                                       const std::vector<int>& flags,
                                       const std::vector<Matrix>& previous);

struct CcStepResult {
  int cluster_count = 0;
  std::vector<int> flags;
  std::optional<Matrix> spawned;  // fresh init for the new cluster, if any

  bool changed() const { return spawned.has_value(); }
};

// ClusterCraft: every worker whose min-fit plateaued (|P_r - P_{r-1}| <
// eps_delta) at a poor level (P_r < eps_p) is reassigned to one shared new
// cluster; the cluster count grows by at most one per round.
CcStepResult clustercraft_step(const std::vector<double>& prev_fit,
                               const std::vector<double>& curr_fit, int cluster_count,
                               const std::vector<int>& flags, const CcThresholds& thresholds,
                               int nx, int nu, RngEngine& rng);

// Enhanced variant: the first triggering worker recruits every worker (from
// any cluster) whose freshly trained model lies within eps_s in 1-norm.
CcStepResult ecc_step(const std::vector<double>& prev_fit, const std::vector<double>& curr_fit,
                      int cluster_count, const std::vector<int>& flags,
                      const std::vector<Matrix>& worker_params, const CcThresholds& thresholds,
                      int nx, int nu, RngEngine& rng,
                      MatrixNorm1 norm = MatrixNorm1::entrywise);

struct MergeResult {
  std::vector<Matrix> params;
  std::vector<int> remap;  // original cluster index -> merged index
};

// ClusterMerge: a single greedy pass in index order. Each unmerged pivot
// absorbs all later clusters within eps_theta (2-norm) of it and the group is
// replaced by its unweighted mean. Groups are anchored to their pivot, so
// chains a-b-c with only adjacent pairs close merge as {a, b} + {c}.
MergeResult cluster_merge_map(const std::vector<Matrix>& cluster_params, double eps_theta,
                              MatrixNorm2 norm = MatrixNorm2::spectral);
std::vector<Matrix> cluster_merge(const std::vector<Matrix>& cluster_params, double eps_theta,
                                  MatrixNorm2 norm = MatrixNorm2::spectral);

}  // namespace icsysid
