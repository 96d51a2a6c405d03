#include "icsysid/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "icsysid/errors.hpp"

namespace icsysid {

int DatasetSpec::worker_count() const {
  return std::accumulate(cluster_sizes.begin(), cluster_sizes.end(), 0);
}

void DatasetSpec::validate() const {
  if (gt_cluster_count < 1) throw ConfigError("dataset: gt_cluster_count must be >= 1");
  if (static_cast<int>(cluster_sizes.size()) != gt_cluster_count)
    throw ConfigError("dataset: cluster_sizes length must equal gt_cluster_count");
  for (int s : cluster_sizes)
    if (s < 1) throw ConfigError("dataset: every cluster needs at least one worker");
  if (rollouts_per_worker < 1) throw ConfigError("dataset: rollouts_per_worker must be >= 1");
  if (steps < 1) throw ConfigError("dataset: steps must be >= 1");
  if (sigma_x < 0 || sigma_u < 0 || sigma_w < 0)
    throw ConfigError("dataset: noise levels must be >= 0");
  if (!(cc_fraction > 0.0) || !(cc_fraction < 1.0))
    throw ConfigError("dataset: cc_fraction must lie in (0, 1)");
  if (custom_ground_truth) {
    if (static_cast<int>(custom_ground_truth->size()) != gt_cluster_count)
      throw ConfigError("dataset: ground_truth length must equal gt_cluster_count");
    for (const LtiParams& p : *custom_ground_truth)
      if (p.state_dim() != (*custom_ground_truth)[0].state_dim() ||
          p.input_dim() != (*custom_ground_truth)[0].input_dim())
        throw ConfigError("dataset: ground-truth models must share dimensions");
  } else if (gt_cluster_count > 5) {
    throw ConfigError("dataset: only 5 built-in ground-truth models; supply ground_truth");
  }
}

std::vector<LtiParams> builtin_ground_truth() {
  std::vector<LtiParams> gt;
  gt.reserve(5);
  Matrix a(3, 3), b(3, 2);

  a << 0.5, 0.3, 0.1, 0.0, 0.2, 0.0, 0.1, 0.0, 0.3;
  b << 1.0, 0.5, 0.1, 1.0, 0.75, 1.5;
  gt.emplace_back(a, b);

  a << -0.3, 0.0, 0.0, 0.1, 0.4, 0.0, 0.2, 0.3, 0.5;
  b << 1.5, 0.1, 0.5, 2.5, 0.1, 1.5;
  gt.emplace_back(a, b);

  a << -0.1, 0.1, 0.1, 0.1, 0.15, 0.1, 0.1, 0.0, 0.2;
  b << 0.8, 0.1, 0.1, 1.5, 0.4, 0.8;
  gt.emplace_back(a, b);

  a << 0.7, 0.25, 0.0, 0.1, 0.7, 0.1, 0.0, 0.25, 0.7;
  b << 1.0, 0.5, 0.5, 2.5, 0.1, 0.8;
  gt.emplace_back(a, b);

  a << 0.5, 0.1, 0.0, 0.1, -0.2, -0.1, 0.0, -0.1, -0.3;
  b << 1.0, 0.4, 0.25, 1.5, 0.75, 0.1;
  gt.emplace_back(a, b);

  return gt;
}

std::vector<LtiParams> select_ground_truth(const DatasetSpec& spec) {
  spec.validate();
  if (spec.custom_ground_truth) return *spec.custom_ground_truth;
  std::vector<LtiParams> gt = builtin_ground_truth();
  gt.resize(spec.gt_cluster_count);
  return gt;
}

std::pair<std::vector<Rollout>, std::vector<Rollout>> split_worker_data(
    const std::vector<Rollout>& rollouts, double cc_fraction, RngEngine& rng) {
  const int n = static_cast<int>(rollouts.size());
  if (n < 2) throw std::invalid_argument("split_worker_data: need at least two rollouts");
  if (!(cc_fraction > 0.0) || !(cc_fraction < 1.0))
    throw std::invalid_argument("split_worker_data: cc_fraction must lie in (0, 1)");

  int n_cc = static_cast<int>(std::llround(cc_fraction * n));
  n_cc = std::clamp(n_cc, 1, n - 1);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::pair<std::vector<Rollout>, std::vector<Rollout>> parts;
  for (int i = 0; i < n; ++i)
    (i < n_cc ? parts.second : parts.first).push_back(rollouts[order[i]]);
  return parts;
}

Dataset build_synthetic_dataset(const DatasetSpec& spec, const std::vector<LtiParams>& gt) {
  spec.validate();
  if (static_cast<int>(gt.size()) != spec.gt_cluster_count)
    throw std::invalid_argument("build_synthetic_dataset: ground-truth count mismatch");

  Dataset ds;
  ds.spec = spec;
  ds.ground_truth.resize(gt.size());

  int worker_id = 0;
  for (int q = 0; q < spec.gt_cluster_count; ++q) {
    GroundTruthCluster& cluster = ds.ground_truth[q];
    cluster.label = q + 1;
    cluster.params = gt[q];
    for (int m = 0; m < spec.cluster_sizes[q]; ++m) cluster.member_worker_ids.push_back(worker_id++);
  }

  const int total = spec.worker_count();
  ds.workers.resize(total);
  for (int q = 0; q < spec.gt_cluster_count; ++q) {
    for (int id : ds.ground_truth[q].member_worker_ids) {
      WorkerDataset& w = ds.workers[id];
      w.worker_id = id;
      w.gt_label = q + 1;

      std::vector<Rollout> rollouts;
      rollouts.reserve(spec.rollouts_per_worker);
      for (int r = 0; r < spec.rollouts_per_worker; ++r) {
        RngEngine rng = make_engine(spec.master_seed, Stream::rollout,
                                    {static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(r)});
        rollouts.push_back(
            generate_rollout(gt[q], spec.steps, spec.sigma_x, spec.sigma_u, spec.sigma_w, rng));
      }

      if (spec.rollouts_per_worker >= 2) {
        RngEngine rng = make_engine(spec.master_seed, Stream::split, {static_cast<std::uint64_t>(id)});
        std::tie(w.train_rollouts, w.cc_rollouts) =
            split_worker_data(rollouts, spec.cc_fraction, rng);
      } else {
        w.train_rollouts = std::move(rollouts);
      }
    }
  }
  return ds;
}

RegressionView make_regression_view(const std::vector<Rollout>& rollouts) {
  if (rollouts.empty()) throw std::invalid_argument("make_regression_view: no rollouts");
  const int nx = rollouts[0].state_dim();
  const int nu = rollouts[0].input_dim();

  int total = 0;
  for (const Rollout& r : rollouts) {
    if (r.state_dim() != nx || r.input_dim() != nu)
      throw std::invalid_argument("make_regression_view: inconsistent rollout dimensions");
    total += r.steps();
  }

  RegressionView view;
  view.phi.resize(nx + nu, total);
  view.x.resize(nx, total);
  int offset = 0;
  for (const Rollout& r : rollouts) {
    const int t = r.steps();
    view.phi.block(0, offset, nx, t) = r.states.leftCols(t);
    view.phi.block(nx, offset, nu, t) = r.inputs;
    view.x.middleCols(offset, t) = r.states.rightCols(t);
    offset += t;
  }
  return view;
}

std::vector<std::vector<int>> make_minibatches(int sample_count, int mbs, RngEngine& rng) {
  if (sample_count < 1) throw std::invalid_argument("make_minibatches: empty sample set");
  if (mbs < 1) throw std::invalid_argument("make_minibatches: batch size must be >= 1");

  std::vector<int> order(sample_count);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<int>> batches;
  for (int start = 0; start < sample_count; start += mbs) {
    const int len = std::min(mbs, sample_count - start);
    batches.emplace_back(order.begin() + start, order.begin() + start + len);
  }
  return batches;
}

}  // namespace icsysid
