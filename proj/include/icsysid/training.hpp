#pragma once

#include <array>
#include <vector>

#include "icsysid/datagen.hpp"
#include "icsysid/rng.hpp"
#include "icsysid/types.hpp"

namespace icsysid {

enum class AdamBiasCorrection {
  paper,    // constant denominators 1-beta1, 1-beta2
  powered,  // textbook denominators 1-beta1^t, 1-beta2^t
};

enum class AdamStatePolicy {
  reset,    // moments zeroed at every communication round
  persist,  // moments carried across rounds
};

struct TrainConfig {
  double alpha = 0.001;
  int mbs = 128;
  double mu = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int epochs_per_round = 1;
  double eps_l = 0.005;
  AdamBiasCorrection bias_correction = AdamBiasCorrection::paper;
  AdamStatePolicy state_policy = AdamStatePolicy::reset;

  void validate() const;
};

struct AdamState {
  Matrix m;
  Matrix v;
  long step = 0;

  static AdamState zeros(Eigen::Index rows, Eigen::Index cols);
};

// Fixed 10-round window of per-round losses for the early-stop rule.
class LossHistory {
 public:
  static constexpr int kWindow = 10;

  void push(double loss);
  double moving_average() const;  // mean of the stored (up to 10) losses
  bool full() const { return count_ >= kWindow; }
  int count() const { return count_; }

 private:
  std::array<double, kWindow> buffer_{};
  int count_ = 0;
  int next_ = 0;
};

// Mean squared one-step error, normalized by the sample count.
double mse_loss(const Matrix& theta, const RegressionView& view);
double mse_loss(const LtiParams& params, const RegressionView& view);

// mse_loss + mu * ||A||_F where A is the left N_x x N_x block of theta.
double regularized_loss(const Matrix& theta, const RegressionView& view, double mu);

// Gradient of the regularized loss. At ||A||_F = 0 the subgradient of the
// penalty is taken as zero.
Matrix loss_gradient(const Matrix& theta, const RegressionView& view, double mu);

// In-place Adam step on theta; state carries the uncorrected moments.
void adam_update(Matrix& theta, const Matrix& grad, AdamState& state, const TrainConfig& config);

// Full-batch least-squares step theta + alpha * (X - theta*Phi) * Phi^T
// (note: no 1/S normalization).
Matrix least_squares_update(const Matrix& theta, const RegressionView& view, double alpha);

// One local optimization pass: epochs_per_round sweeps of shuffled minibatch
// Adam steps. With the persist policy the caller-provided state is carried in
// and out; with reset a fresh zero state is used (and written back if given).
Matrix local_update(Matrix theta, const RegressionView& train, const TrainConfig& config,
                    RngEngine& rng, AdamState* state = nullptr);

// True when every worker's moving-average loss sits below eps_l. Callers
// arm this only after every history holds a full window.
bool early_stop_check(const std::vector<LossHistory>& histories, double eps_l);

}  // namespace icsysid
