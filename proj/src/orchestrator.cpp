#include "icsysid/orchestrator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "icsysid/dataset_io.hpp"
#include "icsysid/errors.hpp"
#include "icsysid/parallel.hpp"

namespace icsysid {

namespace {

// Sufficient statistics of a regression view. The least-squares step and the
// MSE/fit evaluations are exact algebraic rewrites on these, which turns the
// per-round per-worker cost from O(S) into O(dim^2).
struct ViewStats {
  Matrix gram;   // Phi Phi^T
  Matrix cross;  // X Phi^T
  Vector xx;     // per-state ||x_n||^2
  Vector dev;    // per-state ||x_n - mean(x_n)||^2
  int samples = 0;
};

ViewStats make_view_stats(const RegressionView& view) {
  ViewStats stats;
  stats.gram = view.phi * view.phi.transpose();
  stats.cross = view.x * view.phi.transpose();
  stats.xx = view.x.rowwise().squaredNorm();
  stats.dev.resize(view.x.rows());
  for (Eigen::Index n = 0; n < view.x.rows(); ++n)
    stats.dev(n) = (view.x.row(n).array() - view.x.row(n).mean()).matrix().squaredNorm();
  stats.samples = view.sample_count();
  return stats;
}

Vector stats_residual_sq(const Matrix& theta, const ViewStats& stats) {
  Vector quad = (theta * stats.gram).cwiseProduct(theta).rowwise().sum();
  Vector lin = theta.cwiseProduct(stats.cross).rowwise().sum();
  return (stats.xx - 2.0 * lin + quad).cwiseMax(0.0);
}

double stats_mse(const Matrix& theta, const ViewStats& stats) {
  return stats_residual_sq(theta, stats).sum() / stats.samples;
}

double stats_min_fit(const Matrix& theta, const ViewStats& stats) {
  const Vector residual_sq = stats_residual_sq(theta, stats);
  double worst = std::numeric_limits<double>::infinity();
  for (Eigen::Index n = 0; n < residual_sq.size(); ++n)
    worst = std::min(worst, 1.0 - std::sqrt(residual_sq(n) / stats.dev(n)));
  return worst;
}

struct WorkerContext {
  RegressionView train_view;  // incremental: train partition; baseline: all data
  ViewStats train_stats;      // baseline identity/update statistics
  ViewStats cc_stats;         // per-round scoring on the cluster-check set
};

void validate_dataset_for_run(const Dataset& dataset) {
  if (dataset.workers.empty()) throw DataError("run: dataset has no workers");
  if (dataset.ground_truth.empty()) throw DataError("run: dataset has no ground-truth models");
  for (const WorkerDataset& w : dataset.workers) {
    if (w.train_rollouts.empty())
      throw DataError("run: worker " + std::to_string(w.worker_id + 1) + " has no train rollouts");
    if (w.cc_rollouts.empty())
      throw DataError("run: worker " + std::to_string(w.worker_id + 1) +
                      " has no cluster-check rollouts");
  }
}

std::vector<WorkerContext> build_contexts(const Dataset& dataset, bool baseline_stats) {
  std::vector<WorkerContext> contexts(dataset.workers.size());
  for (std::size_t i = 0; i < dataset.workers.size(); ++i) {
    const WorkerDataset& w = dataset.workers[i];
    WorkerContext& ctx = contexts[i];

    if (baseline_stats) {
      std::vector<Rollout> all = w.train_rollouts;
      all.insert(all.end(), w.cc_rollouts.begin(), w.cc_rollouts.end());
      ctx.train_view = make_regression_view(all);
      ctx.train_stats = make_view_stats(ctx.train_view);
    } else {
      ctx.train_view = make_regression_view(w.train_rollouts);
    }

    ctx.cc_stats = make_view_stats(make_regression_view(w.cc_rollouts));
    for (Eigen::Index n = 0; n < ctx.cc_stats.dev.size(); ++n)
      if (ctx.cc_stats.dev(n) == 0.0)
        throw DataError("run: worker " + std::to_string(w.worker_id + 1) +
                        " has a constant measured state; fit is undefined");
  }
  return contexts;
}

void append_round_log(std::vector<RoundLog>& logs, int round, int broadcast_k,
                      const std::vector<int>& broadcast_flags, std::vector<double> losses,
                      std::vector<double> fits, const std::vector<Matrix>& registry,
                      std::chrono::steady_clock::time_point started) {
  RoundLog log;
  log.round = round;
  log.cluster_count = broadcast_k;
  log.flags = broadcast_flags;
  log.losses = std::move(losses);
  log.min_fits = std::move(fits);
  log.cluster_params = registry;
  log.spectral_radii.reserve(registry.size());
  for (const Matrix& theta : registry)
    log.spectral_radii.push_back(stability_report(theta.leftCols(theta.rows())).spectral_radius);
  log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                          started)
                    .count();
  logs.push_back(std::move(log));
}

}  // namespace

RunResult run_ic_rounds(const RunConfig& config, const Dataset& dataset, std::uint64_t seed,
                        int threads) {
  config.thresholds.validate();
  config.train.validate();
  validate_dataset_for_run(dataset);

  const int m = static_cast<int>(dataset.workers.size());
  std::vector<WorkerContext> contexts = build_contexts(dataset, /*baseline_stats=*/false);
  const int nx = static_cast<int>(contexts[0].train_view.x.rows());
  const int nu = static_cast<int>(contexts[0].train_view.phi.rows()) - nx;

  RngEngine coordinator_rng = make_engine(seed, Stream::cluster_init);
  std::vector<Matrix> registry{scaled_glorot_init(nx, nu, coordinator_rng)};
  std::vector<int> flags(m, 0);
  std::vector<LossHistory> histories(m);
  std::vector<double> prev_fit(m, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> curr_fit(m, 0.0);
  std::vector<double> losses(m, 0.0);
  std::vector<Matrix> worker_params(m);
  std::vector<AdamState> moments;
  const bool persist = config.train.state_policy == AdamStatePolicy::persist;
  if (persist) moments.assign(m, AdamState::zeros(nx, nx + nu));

  RunResult result;
  for (int round = 0; round < config.r_max; ++round) {
    const auto started = std::chrono::steady_clock::now();
    const std::vector<int> broadcast_flags = flags;
    const int broadcast_k = static_cast<int>(registry.size());

    parallel_for(m, threads, [&](int i) {
      Matrix theta = registry[broadcast_flags[i]];
      RngEngine rng = make_engine(seed, Stream::minibatch,
                                  {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(round)});
      theta = local_update(std::move(theta), contexts[i].train_view, config.train, rng,
                           persist ? &moments[i] : nullptr);
      losses[i] = stats_mse(theta, contexts[i].cc_stats) +
                  config.train.mu * theta.leftCols(nx).norm();
      curr_fit[i] = stats_min_fit(theta, contexts[i].cc_stats);
      worker_params[i] = std::move(theta);
    });

    // Growth step (from round 1 on, once a previous fit exists); reassigned
    // workers keep contributing to their broadcast-time cluster below.
    CcStepResult step;
    bool grew = false;
    if (config.clustering != ClusteringMode::none && round >= 1) {
      step = config.clustering == ClusteringMode::cc
                 ? clustercraft_step(prev_fit, curr_fit, broadcast_k, flags, config.thresholds, nx,
                                     nu, coordinator_rng)
                 : ecc_step(prev_fit, curr_fit, broadcast_k, flags, worker_params,
                            config.thresholds, nx, nu, coordinator_rng, config.norm1);
      flags = step.flags;
      grew = step.changed();
    }

    registry = aggregate_clusters(worker_params, broadcast_flags, registry);
    if (grew) registry.push_back(*step.spawned);

    for (int i = 0; i < m; ++i) histories[i].push(losses[i]);
    append_round_log(result.logs, round, broadcast_k, broadcast_flags, losses, curr_fit, registry,
                     started);
    prev_fit = curr_fit;
    result.rounds_used = round + 1;

    bool window_ready = true;
    for (const LossHistory& h : histories) window_ready = window_ready && h.full();
    if (window_ready && early_stop_check(histories, config.train.eps_l)) break;
  }

  result.cluster_params = std::move(registry);
  result.flags = std::move(flags);
  return result;
}

RunResult run_c_rounds(const RunConfig& config, const Dataset& dataset, std::uint64_t seed,
                       int threads) {
  config.train.validate();
  validate_dataset_for_run(dataset);

  const int m = static_cast<int>(dataset.workers.size());
  std::vector<WorkerContext> contexts = build_contexts(dataset, /*baseline_stats=*/true);
  const int nx = static_cast<int>(contexts[0].train_view.x.rows());
  const int nu = static_cast<int>(contexts[0].train_view.phi.rows()) - nx;

  RngEngine coordinator_rng = make_engine(seed, Stream::cluster_init);
  std::vector<Matrix> registry;
  if (config.init == InitMode::warm) {
    if (config.k_init != static_cast<int>(dataset.ground_truth.size()))
      throw ConfigError("config: warm init requires k_init equal to the ground-truth cluster count");
    std::vector<Matrix> gt;
    gt.reserve(dataset.ground_truth.size());
    for (const GroundTruthCluster& cluster : dataset.ground_truth)
      gt.push_back(cluster.params.theta());
    RngEngine warm_rng = make_engine(seed, Stream::warm);
    registry = warm_init(gt, config.warm_eta, warm_rng, config.norm2);
  } else {
    const double scale = config.init == InitMode::glorot ? 1.0 : 0.1;
    registry.reserve(config.k_init);
    for (int j = 0; j < config.k_init; ++j)
      registry.push_back(glorot_init(nx, nu, scale, coordinator_rng));
  }

  std::vector<int> flags(m, 0);
  std::vector<double> losses(m, 0.0);
  std::vector<double> fits(m, 0.0);
  std::vector<Matrix> worker_params(m);

  RunResult result;
  for (int round = 0; round < config.r_max; ++round) {
    const auto started = std::chrono::steady_clock::now();
    const int k = static_cast<int>(registry.size());

    parallel_for(m, threads, [&](int i) {
      const WorkerContext& ctx = contexts[i];
      int best = 0;
      double best_loss = stats_mse(registry[0], ctx.train_stats);
      for (int j = 1; j < k; ++j) {
        const double loss = stats_mse(registry[j], ctx.train_stats);
        if (loss < best_loss) {
          best_loss = loss;
          best = j;
        }
      }
      flags[i] = best;
      worker_params[i] =
          registry[best] + config.train.alpha * (ctx.train_stats.cross -
                                                 registry[best] * ctx.train_stats.gram);
      losses[i] = stats_mse(worker_params[i], ctx.train_stats);
      fits[i] = stats_min_fit(worker_params[i], ctx.cc_stats);
    });

    registry = aggregate_clusters(worker_params, flags, registry);
    append_round_log(result.logs, round, k, flags, losses, fits, registry, started);
    result.rounds_used = round + 1;
  }

  result.cluster_params = std::move(registry);
  result.flags = std::move(flags);
  return result;
}

FinalModel finalize_run(const RunResult& result, bool apply_cm, double eps_theta,
                        MatrixNorm2 norm) {
  FinalModel final_model;
  if (!apply_cm) {
    final_model.cluster_params = result.cluster_params;
    final_model.flags = result.flags;
    return final_model;
  }
  MergeResult merged = cluster_merge_map(result.cluster_params, eps_theta, norm);
  final_model.cluster_params = std::move(merged.params);
  final_model.flags.reserve(result.flags.size());
  for (int f : result.flags) final_model.flags.push_back(merged.remap[f]);
  return final_model;
}

ExperimentSummary summarize_run(const Dataset& dataset, const FinalModel& final_model,
                                int rounds_used) {
  validate_dataset_for_run(dataset);
  if (final_model.flags.size() != dataset.workers.size())
    throw std::invalid_argument("summarize_run: flags/workers length mismatch");

  const int q_count = static_cast<int>(dataset.ground_truth.size());
  const int nu = dataset.ground_truth[0].params.input_dim();

  std::vector<FitRecord> prediction, simulation;
  std::vector<int> labels;
  prediction.reserve(dataset.workers.size());
  simulation.reserve(dataset.workers.size());
  for (std::size_t i = 0; i < dataset.workers.size(); ++i) {
    const WorkerDataset& w = dataset.workers[i];
    const LtiParams model =
        LtiParams::from_theta(final_model.cluster_params[final_model.flags[i]], nu);
    prediction.push_back(score_worker(model, w.cc_rollouts, FitMode::prediction));
    simulation.push_back(score_worker(model, w.cc_rollouts, FitMode::simulation));
    labels.push_back(w.gt_label);
  }

  ExperimentSummary summary;
  summary.fit_prediction = cluster_mean_fit(prediction, labels, q_count);
  summary.fit_simulation = cluster_mean_fit(simulation, labels, q_count);
  summary.fleet_fit_prediction = fleet_mean_fit(prediction);
  summary.fleet_fit_simulation = fleet_mean_fit(simulation);
  summary.mw_pct = misclassified_pct(final_model.flags, labels);
  summary.rounds_used = rounds_used;
  summary.final_cluster_count = final_model.cluster_count();

  summary.param_errors.reserve(q_count);
  for (const GroundTruthCluster& cluster : dataset.ground_truth)
    summary.param_errors.push_back(
        best_match_error(final_model.cluster_params, cluster.params.theta()));

  summary.total_clusters = final_model.cluster_count();
  for (const Matrix& theta : final_model.cluster_params)
    if (!stability_report(theta.leftCols(theta.rows())).is_stable) ++summary.unstable_clusters;

  summary.dataset_hash = dataset_fingerprint(dataset);
  return summary;
}

namespace {

SingleRun run_single(const RunConfig& config, const Dataset& dataset, std::uint64_t seed,
                     int threads, Method method) {
  if (config.method != method)
    throw std::invalid_argument("run: config method does not match the invoked driver");
  SingleRun run;
  run.rounds = method == Method::ic_sysid ? run_ic_rounds(config, dataset, seed, threads)
                                          : run_c_rounds(config, dataset, seed, threads);
  run.final_model =
      finalize_run(run.rounds, config.apply_cm, config.thresholds.eps_theta, config.norm2);
  run.summary = summarize_run(dataset, run.final_model, run.rounds.rounds_used);
  run.summary.seed = seed;
  return run;
}

}  // namespace

SingleRun run_ic_sysid(const RunConfig& config, const Dataset& dataset, std::uint64_t seed,
                       int threads) {
  return run_single(config, dataset, seed, threads, Method::ic_sysid);
}

SingleRun run_c_sysid(const RunConfig& config, const Dataset& dataset, std::uint64_t seed,
                      int threads) {
  return run_single(config, dataset, seed, threads, Method::c_sysid);
}

namespace {

double population_std(const std::vector<double>& values, double mean) {
  if (values.empty()) return 0.0;
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return std::sqrt(acc / values.size());
}

void aggregate_suite(SuiteResult& suite) {
  SuiteAggregate& agg = suite.aggregate;
  std::vector<const ExperimentSummary*> ok;
  for (const RepetitionReport& rep : suite.repetitions) {
    if (rep.failed)
      ++agg.failures;
    else
      ok.push_back(&rep.summary);
  }
  agg.succeeded = static_cast<int>(ok.size());
  if (ok.empty()) return;

  const Eigen::Index q = ok[0]->fit_prediction.rows();
  const Eigen::Index nx = ok[0]->fit_prediction.cols();

  auto matrix_moments = [&](auto pick, Matrix& mean, Matrix& stddev) {
    mean = Matrix::Zero(q, nx);
    for (const ExperimentSummary* s : ok) mean += pick(*s);
    mean /= static_cast<double>(ok.size());
    Matrix acc = Matrix::Zero(q, nx);
    for (const ExperimentSummary* s : ok) {
      Matrix d = pick(*s) - mean;
      acc += d.cwiseProduct(d);
    }
    stddev = (acc / static_cast<double>(ok.size())).cwiseSqrt();
  };
  matrix_moments([](const ExperimentSummary& s) { return s.fit_prediction; },
                 agg.fit_prediction_mean, agg.fit_prediction_std);
  matrix_moments([](const ExperimentSummary& s) { return s.fit_simulation; },
                 agg.fit_simulation_mean, agg.fit_simulation_std);

  agg.fleet_fit_prediction_mean = Vector::Zero(nx);
  agg.fleet_fit_simulation_mean = Vector::Zero(nx);
  for (const ExperimentSummary* s : ok) {
    agg.fleet_fit_prediction_mean += s->fleet_fit_prediction;
    agg.fleet_fit_simulation_mean += s->fleet_fit_simulation;
  }
  agg.fleet_fit_prediction_mean /= static_cast<double>(ok.size());
  agg.fleet_fit_simulation_mean /= static_cast<double>(ok.size());

  const std::size_t q_count = ok[0]->param_errors.size();
  agg.param_error_mean.assign(q_count, 0.0);
  agg.param_error_std.assign(q_count, 0.0);
  for (std::size_t j = 0; j < q_count; ++j) {
    std::vector<double> values;
    values.reserve(ok.size());
    for (const ExperimentSummary* s : ok) values.push_back(s->param_errors[j]);
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= values.size();
    agg.param_error_mean[j] = mean;
    agg.param_error_std[j] = population_std(values, mean);
  }

  auto scalar_moments = [&](auto pick, double& mean, double& stddev) {
    std::vector<double> values;
    values.reserve(ok.size());
    for (const ExperimentSummary* s : ok) values.push_back(pick(*s));
    mean = 0.0;
    for (double v : values) mean += v;
    mean /= values.size();
    stddev = population_std(values, mean);
  };
  scalar_moments([](const ExperimentSummary& s) { return double(s.rounds_used); },
                 agg.rounds_mean, agg.rounds_std);
  scalar_moments([](const ExperimentSummary& s) { return double(s.final_cluster_count); },
                 agg.k_r_mean, agg.k_r_std);
  scalar_moments([](const ExperimentSummary& s) { return s.mw_pct; }, agg.mw_pct_mean,
                 agg.mw_pct_std);

  std::map<int, int> k_counts;
  for (const ExperimentSummary* s : ok) ++k_counts[s->final_cluster_count];
  int best_count = -1;
  for (const auto& [k, count] : k_counts) {
    if (count > best_count) {
      best_count = count;
      agg.k_r_modal = k;
    }
  }

  long unstable = 0, total = 0;
  for (const ExperimentSummary* s : ok) {
    unstable += s->unstable_clusters;
    total += s->total_clusters;
  }
  agg.uc_pct = total > 0 ? 100.0 * unstable / static_cast<double>(total) : 0.0;
}

}  // namespace

SuiteResult run_suite(const RunConfig& config, int threads, bool verbose,
                      const RepetitionSink& sink) {
  config.validate();

  SuiteResult suite;
  suite.config = config;

  std::optional<Dataset> imported;
  if (config.dataset_path) imported = import_dataset(*config.dataset_path);

  for (int k = 0; k < config.repetitions; ++k) {
    RepetitionReport report;
    report.repetition = k;
    report.seed = config.master_seed + static_cast<std::uint64_t>(k);
    try {
      Dataset built;
      const Dataset* dataset = nullptr;
      if (imported) {
        dataset = &*imported;
      } else {
        DatasetSpec spec = *config.dataset;
        spec.master_seed += static_cast<std::uint64_t>(k);
        built = build_synthetic_dataset(spec, select_ground_truth(spec));
        dataset = &built;
      }

      SingleRun run = config.method == Method::ic_sysid
                          ? run_ic_sysid(config, *dataset, report.seed, threads)
                          : run_c_sysid(config, *dataset, report.seed, threads);
      report.summary = run.summary;
      if (verbose)
        std::fprintf(stderr, "[rep %d/%d] seed=%llu rounds=%d k_r=%d mw=%.1f%%\n", k + 1,
                     config.repetitions, static_cast<unsigned long long>(report.seed),
                     report.summary.rounds_used, report.summary.final_cluster_count,
                     report.summary.mw_pct);
      if (sink) sink(k, *dataset, run);
    } catch (const std::exception& e) {
      report.failed = true;
      report.error = e.what();
      if (verbose) std::fprintf(stderr, "[rep %d/%d] failed: %s\n", k + 1, config.repetitions,
                                e.what());
    }
    suite.repetitions.push_back(std::move(report));
  }

  aggregate_suite(suite);
  return suite;
}

}  // namespace icsysid
