#pragma once

#include <vector>

#include "icsysid/datagen.hpp"
#include "icsysid/lti.hpp"
#include "icsysid/types.hpp"

namespace icsysid {

enum class MatrixNorm2 {
  spectral,   // largest singular value
  frobenius,
};

enum class MatrixNorm1 {
  entrywise,  // sum of absolute values (Manhattan)
  induced,    // max column absolute sum
};

double matrix_norm2(const Matrix& m, MatrixNorm2 norm = MatrixNorm2::spectral);
double matrix_norm1(const Matrix& m, MatrixNorm1 norm = MatrixNorm1::entrywise);

// Frobenius distance between two parameter matrices of equal shape.
double param_error(const Matrix& estimated_theta, const Matrix& gt_theta);

// min_j ||theta_j - gt||_F over a non-empty list of estimates.
double best_match_error(const std::vector<Matrix>& estimates, const Matrix& gt_theta);

// Minimum pairwise separation of the ground-truth models.
double delta_min(const std::vector<Matrix>& gt_thetas, MatrixNorm2 norm = MatrixNorm2::spectral);

enum class FitMode {
  prediction,  // one-step-ahead, driven by measured states
  simulation,  // free-running from the measured initial state
};

// Normalized fit per state: 1 - ||x_n - x~_n|| / ||x_n - mean(x_n)||.
// Series must have equal length >= 2; a constant measured series has no
// defined fit and raises an error.
Vector fit_per_state(const Matrix& measured, const Matrix& estimated);

struct FitRecord {
  Vector per_state;  // N_x entries
  double min_fit;    // min over states
  FitMode mode = FitMode::prediction;
};

// Scores a model against a worker's rollouts: per-state series are
// concatenated across rollouts (window x_{2..T+1} each) before normalization.
FitRecord score_worker(const LtiParams& params, const std::vector<Rollout>& rollouts,
                       FitMode mode);

// Mean per-state fit per ground-truth cluster; rows follow labels 1..Q.
// Every label in 1..Q must have at least one worker.
Matrix cluster_mean_fit(const std::vector<FitRecord>& records, const std::vector<int>& gt_labels,
                        int gt_cluster_count);

// Mean per-state fit across the whole fleet.
Vector fleet_mean_fit(const std::vector<FitRecord>& records);

// Share (percent) of workers whose model cluster mixes ground-truth labels:
// a worker is misclassified iff it shares its flag with a worker of a
// different ground-truth cluster. Invariant under any relabeling of flags.
double misclassified_pct(const std::vector<int>& flags, const std::vector<int>& gt_labels);

// Share (percent) of final cluster models whose A block has spectral radius
// >= 1, pooled over repetitions.
double unstable_cluster_pct(const std::vector<std::vector<Matrix>>& final_registries);

}  // namespace icsysid
