#pragma once

#include "icsysid/rng.hpp"
#include "icsysid/types.hpp"

namespace icsysid {

// Discrete-time LTI model x_{t+1} = A x_t + B u_t (+ w_t during generation).
// theta = [A B] stacks both blocks column-wise: A is N_x x N_x, B is N_x x N_u.
struct LtiParams {
  Matrix a;
  Matrix b;

  LtiParams() = default;
  LtiParams(Matrix a_in, Matrix b_in);

  int state_dim() const { return static_cast<int>(a.rows()); }
  int input_dim() const { return static_cast<int>(b.cols()); }

  Matrix theta() const;
  static LtiParams from_theta(const Matrix& theta, int input_dim);
};

// One trajectory: states x_{1..T+1} (N_x x T+1) and inputs u_{1..T} (N_u x T).
struct Rollout {
  Matrix states;
  Matrix inputs;

  Rollout() = default;
  Rollout(Matrix states_in, Matrix inputs_in);

  int steps() const { return static_cast<int>(inputs.cols()); }
  int state_dim() const { return static_cast<int>(states.rows()); }
  int input_dim() const { return static_cast<int>(inputs.rows()); }
};

struct StabilityReport {
  Vector eigen_magnitudes;  // |lambda_i|, sorted descending
  double spectral_radius;   // eigen_magnitudes(0)
  bool is_stable;           // spectral_radius < 1, strict
};

StabilityReport stability_report(const Matrix& a);

// One-step-ahead estimates x~_{2..T+1} (N_x x T) driven by measured states.
Matrix predict_rollout(const LtiParams& params, const Rollout& rollout);

struct SimulationResult {
  Matrix states;        // x~_{1..T+1} including the given initial state
  bool model_unstable;  // spectral radius of A >= 1 (divergence-prone)
  bool overflowed;      // non-finite values appeared in the trajectory
  bool flagged() const { return model_unstable || overflowed; }
};

// Free-running simulation from x_initial under the given input sequence.
SimulationResult simulate_rollout(const LtiParams& params, const Vector& x_initial,
                                  const Matrix& inputs);

// Draws x_1 ~ N(0, sigma_x^2 I), u_t ~ N(0, sigma_u^2 I), w_t ~ N(0, sigma_w^2 I)
// and iterates the dynamics. Draw order (x_1, then u_t, w_t per step) is fixed
// and independent of the sigma values, so a zero sigma yields exact zeros
// without shifting the other streams.
Rollout generate_rollout(const LtiParams& params, int steps, double sigma_x,
                         double sigma_u, double sigma_w, RngEngine& rng);

}  // namespace icsysid
