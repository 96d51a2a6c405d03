#include "icsysid/training.hpp"

#include <cmath>
#include <stdexcept>

#include "icsysid/errors.hpp"

namespace icsysid {

namespace {

constexpr double kAdamEpsilon = 1e-6;

void check_view(const Matrix& theta, const RegressionView& view, const char* where) {
  if (view.sample_count() < 1)
    throw std::invalid_argument(std::string(where) + ": empty regression view");
  if (theta.rows() != view.x.rows() || theta.cols() != view.phi.rows())
    throw std::invalid_argument(std::string(where) + ": theta/view dimension mismatch");
}

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha > 0)) throw ConfigError("train: alpha must be > 0");
  if (mbs < 1) throw ConfigError("train: mbs must be >= 1");
  if (mu < 0) throw ConfigError("train: mu must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("train: beta1 must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("train: beta2 must lie in [0, 1)");
  if (epochs_per_round < 1) throw ConfigError("train: epochs_per_round must be >= 1");
  if (!(eps_l > 0)) throw ConfigError("train: eps_l must be > 0");
}

AdamState AdamState::zeros(Eigen::Index rows, Eigen::Index cols) {
  AdamState state;
  state.m = Matrix::Zero(rows, cols);
  state.v = Matrix::Zero(rows, cols);
  return state;
}

void LossHistory::push(double loss) {
  buffer_[next_] = loss;
  next_ = (next_ + 1) % kWindow;
  if (count_ < kWindow) ++count_;
}

double LossHistory::moving_average() const {
  if (count_ == 0) throw std::logic_error("LossHistory: no losses recorded");
  double sum = 0.0;
  for (int i = 0; i < count_; ++i) sum += buffer_[i];
  return sum / count_;
}

double mse_loss(const Matrix& theta, const RegressionView& view) {
  check_view(theta, view, "mse_loss");
  return (view.x - theta * view.phi).squaredNorm() / view.sample_count();
}

double mse_loss(const LtiParams& params, const RegressionView& view) {
  return mse_loss(params.theta(), view);
}

double regularized_loss(const Matrix& theta, const RegressionView& view, double mu) {
  if (mu < 0) throw std::invalid_argument("regularized_loss: mu must be >= 0");
  return mse_loss(theta, view) + mu * theta.leftCols(theta.rows()).norm();
}

Matrix loss_gradient(const Matrix& theta, const RegressionView& view, double mu) {
  check_view(theta, view, "loss_gradient");
  if (mu < 0) throw std::invalid_argument("loss_gradient: mu must be >= 0");

  Matrix grad = (2.0 / view.sample_count()) * ((theta * view.phi - view.x) * view.phi.transpose());
  const Eigen::Index nx = theta.rows();
  const double norm_a = theta.leftCols(nx).norm();
  if (mu > 0 && norm_a > 0) grad.leftCols(nx) += (mu / norm_a) * theta.leftCols(nx);
  return grad;
}

void adam_update(Matrix& theta, const Matrix& grad, AdamState& state, const TrainConfig& config) {
  if (grad.rows() != theta.rows() || grad.cols() != theta.cols())
    throw std::invalid_argument("adam_update: gradient shape mismatch");
  if (state.m.rows() != theta.rows() || state.m.cols() != theta.cols())
    throw std::invalid_argument("adam_update: state shape mismatch");

  state.step += 1;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * grad;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * grad.cwiseProduct(grad);

  double c1 = 1.0 - config.beta1;
  double c2 = 1.0 - config.beta2;
  if (config.bias_correction == AdamBiasCorrection::powered) {
    c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  }

  theta.array() -=
      config.alpha * (state.m.array() / c1) / ((state.v.array() / c2) + kAdamEpsilon).sqrt();
}

Matrix least_squares_update(const Matrix& theta, const RegressionView& view, double alpha) {
  check_view(theta, view, "least_squares_update");
  return theta + alpha * ((view.x - theta * view.phi) * view.phi.transpose());
}

Matrix local_update(Matrix theta, const RegressionView& train, const TrainConfig& config,
                    RngEngine& rng, AdamState* state) {
  config.validate();
  check_view(theta, train, "local_update");

  AdamState moments = (state && config.state_policy == AdamStatePolicy::persist)
                          ? *state
                          : AdamState::zeros(theta.rows(), theta.cols());

  const Eigen::Index dim = train.phi.rows();
  const Eigen::Index nx = train.x.rows();
  RegressionView batch;

  for (int epoch = 0; epoch < config.epochs_per_round; ++epoch) {
    for (const std::vector<int>& indices : make_minibatches(train.sample_count(), config.mbs, rng)) {
      const Eigen::Index len = static_cast<Eigen::Index>(indices.size());
      batch.phi.resize(dim, len);
      batch.x.resize(nx, len);
      for (Eigen::Index s = 0; s < len; ++s) {
        batch.phi.col(s) = train.phi.col(indices[s]);
        batch.x.col(s) = train.x.col(indices[s]);
      }
      adam_update(theta, loss_gradient(theta, batch, config.mu), moments, config);
    }
  }

  if (state) *state = moments;
  return theta;
}

bool early_stop_check(const std::vector<LossHistory>& histories, double eps_l) {
  if (histories.empty()) throw std::invalid_argument("early_stop_check: no workers");
  for (const LossHistory& h : histories) {
    if (h.count() == 0) throw std::invalid_argument("early_stop_check: worker without losses");
    if (!(h.moving_average() < eps_l)) return false;
  }
  return true;
}

}  // namespace icsysid
