#include "icsysid/lti.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <stdexcept>

#include "icsysid/errors.hpp"

namespace icsysid {

LtiParams::LtiParams(Matrix a_in, Matrix b_in) : a(std::move(a_in)), b(std::move(b_in)) {
  if (a.rows() == 0 || a.rows() != a.cols())
    throw std::invalid_argument("LtiParams: A must be square and non-empty");
  if (b.rows() != a.rows() || b.cols() == 0)
    throw std::invalid_argument("LtiParams: B must have N_x rows and at least one column");
  if (!a.allFinite() || !b.allFinite())
    throw std::invalid_argument("LtiParams: entries must be finite");
}

Matrix LtiParams::theta() const {
  Matrix t(a.rows(), a.cols() + b.cols());
  t << a, b;
  return t;
}

LtiParams LtiParams::from_theta(const Matrix& theta, int input_dim) {
  const Eigen::Index nx = theta.rows();
  if (input_dim <= 0 || theta.cols() != nx + input_dim)
    throw std::invalid_argument("LtiParams: theta must be N_x x (N_x + N_u)");
  return LtiParams(theta.leftCols(nx), theta.rightCols(input_dim));
}

Rollout::Rollout(Matrix states_in, Matrix inputs_in)
    : states(std::move(states_in)), inputs(std::move(inputs_in)) {
  if (inputs.cols() < 1) throw std::invalid_argument("Rollout: at least one step required");
  if (states.cols() != inputs.cols() + 1)
    throw std::invalid_argument("Rollout: states must hold T+1 columns for T inputs");
  if (states.rows() == 0 || inputs.rows() == 0)
    throw std::invalid_argument("Rollout: empty state or input dimension");
}

StabilityReport stability_report(const Matrix& a) {
  if (a.rows() == 0 || a.rows() != a.cols())
    throw std::invalid_argument("stability_report: matrix must be square and non-empty");
  if (!a.allFinite()) throw std::invalid_argument("stability_report: entries must be finite");

  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("stability_report: eigenvalue iteration failed");

  Vector mags = solver.eigenvalues().cwiseAbs();
  std::sort(mags.data(), mags.data() + mags.size(), std::greater<double>());

  StabilityReport report;
  report.eigen_magnitudes = std::move(mags);
  report.spectral_radius = report.eigen_magnitudes(0);
  report.is_stable = report.spectral_radius < 1.0;
  return report;
}

namespace {

void check_dims(const LtiParams& params, int state_dim, int input_dim, const char* where) {
  if (params.state_dim() != state_dim || params.input_dim() != input_dim)
    throw std::invalid_argument(std::string(where) + ": model/trajectory dimension mismatch");
}

}  // namespace

Matrix predict_rollout(const LtiParams& params, const Rollout& rollout) {
  check_dims(params, rollout.state_dim(), rollout.input_dim(), "predict_rollout");
  const int t = rollout.steps();
  return params.a * rollout.states.leftCols(t) + params.b * rollout.inputs;
}

SimulationResult simulate_rollout(const LtiParams& params, const Vector& x_initial,
                                  const Matrix& inputs) {
  if (inputs.cols() < 1) throw std::invalid_argument("simulate_rollout: empty input sequence");
  check_dims(params, static_cast<int>(x_initial.size()), static_cast<int>(inputs.rows()),
             "simulate_rollout");

  const int t = static_cast<int>(inputs.cols());
  SimulationResult result;
  result.states.resize(x_initial.size(), t + 1);
  result.states.col(0) = x_initial;
  for (int k = 0; k < t; ++k)
    result.states.col(k + 1) = params.a * result.states.col(k) + params.b * inputs.col(k);

  result.model_unstable = !stability_report(params.a).is_stable;
  result.overflowed = !result.states.allFinite();
  return result;
}

Rollout generate_rollout(const LtiParams& params, int steps, double sigma_x, double sigma_u,
                         double sigma_w, RngEngine& rng) {
  if (steps < 1) throw std::invalid_argument("generate_rollout: steps must be >= 1");
  if (sigma_x < 0 || sigma_u < 0 || sigma_w < 0)
    throw std::invalid_argument("generate_rollout: noise levels must be >= 0");

  const int nx = params.state_dim();
  const int nu = params.input_dim();
  Matrix states(nx, steps + 1);
  Matrix inputs(nu, steps);
  std::normal_distribution<double> unit(0.0, 1.0);

  for (int r = 0; r < nx; ++r) states(r, 0) = sigma_x * unit(rng);
  for (int k = 0; k < steps; ++k) {
    for (int r = 0; r < nu; ++r) inputs(r, k) = sigma_u * unit(rng);
    Vector noise(nx);
    for (int r = 0; r < nx; ++r) noise(r) = sigma_w * unit(rng);
    states.col(k + 1) = params.a * states.col(k) + params.b * inputs.col(k) + noise;
  }
  return Rollout(std::move(states), std::move(inputs));
}

}  // namespace icsysid
