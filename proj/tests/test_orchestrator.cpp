#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "icsysid/dataset_io.hpp"
#include "icsysid/errors.hpp"
#include "icsysid/orchestrator.hpp"
#include "icsysid/report.hpp"

using namespace icsysid;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

DatasetSpec tiny_spec(int clusters, int workers_per_cluster, int rollouts, int steps,
                      std::uint64_t seed) {
  DatasetSpec spec;
  spec.gt_cluster_count = clusters;
  spec.cluster_sizes.assign(clusters, workers_per_cluster);
  spec.rollouts_per_worker = rollouts;
  spec.steps = steps;
  spec.sigma_w = 0.01;
  spec.master_seed = seed;
  return spec;
}

Dataset tiny_dataset(int clusters, int workers_per_cluster, int rollouts, int steps,
                     std::uint64_t seed) {
  const DatasetSpec spec = tiny_spec(clusters, workers_per_cluster, rollouts, steps, seed);
  return build_synthetic_dataset(spec, select_ground_truth(spec));
}

RunConfig fast_ic_config() {
  RunConfig config;
  config.method = Method::ic_sysid;
  config.clustering = ClusteringMode::cc;
  config.r_max = 200;
  config.train.alpha = 0.01;
  config.train.mbs = 64;
  return config;
}

}  // namespace

TEST_CASE("a homogeneous fleet converges, keeps one cluster and stops early") {
  // Strong excitation and low process noise make the absolute stop threshold
  // correspond to a tight model, so the post-stop assertions have margin.
  DatasetSpec spec = tiny_spec(1, 3, 10, 20, 5);
  spec.sigma_x = spec.sigma_u = 0.1;
  spec.sigma_w = 0.005;
  const Dataset dataset = build_synthetic_dataset(spec, select_ground_truth(spec));

  RunConfig config = fast_ic_config();
  config.r_max = 300;
  config.train.eps_l = 0.0015;

  const SingleRun run = run_ic_sysid(config, dataset, 42);
  CHECK(run.rounds.rounds_used >= 10);  // the stop rule needs a full loss window
  CHECK(run.rounds.rounds_used < config.r_max);
  CHECK(run.final_model.cluster_count() == 1);
  CHECK(run.summary.mw_pct == 0.0);
  CHECK(run.summary.final_cluster_count == 1);
  CHECK(run.summary.unstable_clusters == 0);
  CHECK(run.summary.param_errors[0] < 0.5);

  const RoundLog& last = run.rounds.logs.back();
  for (double fit : last.min_fits) CHECK(fit > 0.6);
  for (double loss : last.losses) CHECK(loss < config.train.eps_l);
}

TEST_CASE("the baseline driver equals a direct replay of its update rule") {
  const Dataset dataset = tiny_dataset(2, 2, 6, 10, 9);

  RunConfig config;
  config.method = Method::c_sysid;
  config.clustering = ClusteringMode::none;
  config.k_init = 2;
  config.init = InitMode::glorot;
  config.r_max = 3;

  const std::uint64_t seed = 77;
  const RunResult result = run_c_rounds(config, dataset, seed);
  REQUIRE(result.rounds_used == 3);  // the baseline never stops early
  REQUIRE(result.logs.size() == 3);

  // Replay with the reference formulas on full regression views.
  std::vector<RegressionView> full_views;
  std::vector<RegressionView> cc_views;
  for (const WorkerDataset& w : dataset.workers) {
    std::vector<Rollout> all = w.train_rollouts;
    all.insert(all.end(), w.cc_rollouts.begin(), w.cc_rollouts.end());
    full_views.push_back(make_regression_view(all));
    cc_views.push_back(make_regression_view(w.cc_rollouts));
  }

  RngEngine coordinator = make_engine(seed, Stream::cluster_init);
  std::vector<Matrix> registry;
  for (int j = 0; j < config.k_init; ++j) registry.push_back(glorot_init(3, 2, 1.0, coordinator));

  const int m = static_cast<int>(dataset.workers.size());
  std::vector<int> flags(m, 0);
  std::vector<Matrix> worker_params(m);
  for (int round = 0; round < 3; ++round) {
    for (int i = 0; i < m; ++i) {
      flags[i] = assign_identity(full_views[i], registry);
      worker_params[i] = least_squares_update(registry[flags[i]], full_views[i],
                                              config.train.alpha);

      CHECK(result.logs[round].flags[i] == flags[i]);
      CHECK(result.logs[round].losses[i] ==
            doctest::Approx(mse_loss(worker_params[i], full_views[i])).epsilon(1e-9));
      const LtiParams as_params = LtiParams::from_theta(worker_params[i], 2);
      const FitRecord record =
          score_worker(as_params, dataset.workers[i].cc_rollouts, FitMode::prediction);
      CHECK(result.logs[round].min_fits[i] == doctest::Approx(record.min_fit).epsilon(1e-9));
    }
    registry = aggregate_clusters(worker_params, flags, registry);
    for (int j = 0; j < config.k_init; ++j)
      CHECK((result.logs[round].cluster_params[j] - registry[j]).cwiseAbs().maxCoeff() < 1e-9);
  }
  for (int j = 0; j < config.k_init; ++j)
    CHECK((result.cluster_params[j] - registry[j]).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(result.flags == flags);
}

TEST_CASE("growth happens before aggregation and spawns stay fresh for one round") {
  const Dataset dataset = tiny_dataset(1, 2, 6, 10, 13);

  // A huge plateau tolerance makes every sub-eps_p worker trigger each round,
  // so the registry must grow by exactly one cluster per round.
  RunConfig config = fast_ic_config();
  config.train.alpha = 0.001;
  config.train.eps_l = 1e-12;
  config.thresholds.eps_delta = 100.0;
  config.r_max = 5;

  const RunResult result = run_ic_rounds(config, dataset, 3);
  REQUIRE(result.rounds_used == 5);
  REQUIRE(result.logs.size() == 5);

  CHECK(result.logs[0].cluster_count == 1);
  CHECK(static_cast<int>(result.logs[0].cluster_params.size()) == 1);

  const double fresh_bound = 0.1 * std::sqrt(6.0 / 5.0) + 1e-12;
  for (int r = 1; r < 5; ++r) {
    const RoundLog& log = result.logs[r];
    // Broadcast-time count and flags: the spawn of round r is visible in the
    // registry snapshot (one extra entry) but not yet in count/flags.
    CHECK(log.cluster_count == r);
    CHECK(static_cast<int>(log.cluster_params.size()) == r + 1);
    for (int f : log.flags) CHECK(f == r - 1);
    // The newly spawned model was not trained this round.
    CHECK(log.cluster_params.back().cwiseAbs().maxCoeff() < fresh_bound);
  }

  CHECK(static_cast<int>(result.cluster_params.size()) == 5);
  for (int f : result.flags) CHECK(f == 4);
}

TEST_CASE("finalize remaps worker flags through the merge") {
  const Matrix gt0 = builtin_ground_truth()[0].theta();
  const Matrix gt1 = builtin_ground_truth()[1].theta();
  Matrix near0 = gt0;
  near0(0, 0) += 0.01;

  RunResult result;
  result.cluster_params = {gt0, near0, gt1};
  result.flags = {0, 1, 2, 1};
  result.rounds_used = 7;

  const FinalModel merged = finalize_run(result, /*apply_cm=*/true, 0.5);
  REQUIRE(merged.cluster_count() == 2);
  CHECK(merged.flags == std::vector<int>{0, 0, 1, 0});
  CHECK(merged.cluster_params[0](0, 0) == doctest::Approx(gt0(0, 0) + 0.005));

  const FinalModel untouched = finalize_run(result, /*apply_cm=*/false, 0.5);
  CHECK(untouched.cluster_count() == 3);
  CHECK(untouched.flags == result.flags);
}

TEST_CASE("summary of exact models scores a perfect prediction fit") {
  DatasetSpec spec = tiny_spec(2, 2, 5, 12, 21);
  spec.sigma_w = 0.0;  // noiseless dynamics
  const Dataset dataset = build_synthetic_dataset(spec, select_ground_truth(spec));

  FinalModel final_model;
  final_model.cluster_params = {builtin_ground_truth()[0].theta(),
                                builtin_ground_truth()[1].theta()};
  final_model.flags = {0, 0, 1, 1};

  const ExperimentSummary summary = summarize_run(dataset, final_model, 33);
  CHECK(summary.rounds_used == 33);
  CHECK(summary.mw_pct == 0.0);
  CHECK(summary.final_cluster_count == 2);
  CHECK(summary.param_errors[0] == 0.0);
  CHECK(summary.param_errors[1] == 0.0);
  CHECK(summary.unstable_clusters == 0);
  CHECK(summary.total_clusters == 2);
  CHECK(summary.dataset_hash == dataset_fingerprint(dataset));
  CHECK((summary.fit_prediction.array() - 1.0).abs().maxCoeff() < 1e-9);
  CHECK((summary.fit_simulation.array() - 1.0).abs().maxCoeff() < 1e-9);
  CHECK((summary.fleet_fit_prediction.array() - 1.0).abs().maxCoeff() < 1e-9);

  FinalModel short_flags = final_model;
  short_flags.flags = {0, 0, 1};
  CHECK_THROWS_AS(summarize_run(dataset, short_flags, 1), std::invalid_argument);
}

TEST_CASE("config json round-trips and rejects unknown keys at every level") {
  json j{{"method", "ic_sysid"},
         {"clustering", "ecc"},
         {"r_max", 50},
         {"repetitions", 2},
         {"master_seed", 9},
         {"train", {{"alpha", 0.002}, {"adam_state", "persist"}}},
         {"thresholds", {{"eps_s", 0.2}}},
         {"dataset",
          {{"gt_cluster_count", 1},
           {"cluster_sizes", {2}},
           {"rollouts_per_worker", 4},
           {"steps", 6}}}};

  const RunConfig config = run_config_from_json(j);
  CHECK(config.clustering == ClusteringMode::ecc);
  CHECK(config.train.alpha == 0.002);
  CHECK(config.train.state_policy == AdamStatePolicy::persist);
  CHECK(config.thresholds.eps_s == 0.2);
  CHECK(config.r_max == 50);
  REQUIRE(config.dataset.has_value());
  CHECK(config.dataset->rollouts_per_worker == 4);

  const json echoed = run_config_to_json(config);
  CHECK(run_config_to_json(run_config_from_json(echoed)).dump() == echoed.dump());

  auto with = [&](const char* pointer, json value) {
    json bad = j;
    bad[json::json_pointer(pointer)] = std::move(value);
    return bad;
  };
  CHECK_THROWS_AS(run_config_from_json(with("/typo", 1)), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(with("/train/typo", 1)), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(with("/thresholds/typo", 1)), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(with("/dataset/typo", 1)), ConfigError);

  json no_method = j;
  no_method.erase("method");
  CHECK_THROWS_AS(run_config_from_json(no_method), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(with("/method", "sysid")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(with("/clustering", 3)), ConfigError);
}

TEST_CASE("config validation enforces the per-method structure") {
  json base{{"method", "ic_sysid"},
            {"dataset",
             {{"gt_cluster_count", 1},
              {"cluster_sizes", {2}},
              {"rollouts_per_worker", 4},
              {"steps", 6}}}};

  auto with = [&](const char* key, json value) {
    json j = base;
    j[key] = std::move(value);
    return j;
  };
  CHECK_NOTHROW(run_config_from_json(base));
  CHECK_THROWS_AS(run_config_from_json(with("k_init", 2)), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(with("init", "warm")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(with("init", "glorot")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(with("warm_eta", 0.5)), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(with("repetitions", 0)), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(with("r_max", 0)), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(with("dataset_path", "somewhere")), ConfigError);

  json baseline = with("method", "c_sysid");
  CHECK_THROWS_AS(run_config_from_json(baseline), ConfigError);  // clustering defaults to cc
  baseline["clustering"] = "none";
  baseline["init"] = "warm";
  baseline["k_init"] = 5;
  CHECK_NOTHROW(run_config_from_json(baseline));

  json pathless = base;
  pathless.erase("dataset");
  CHECK_THROWS_AS(run_config_from_json(pathless), ConfigError);
}

TEST_CASE("runs are bit-stable across thread counts and re-execution") {
  const Dataset dataset = tiny_dataset(1, 4, 6, 10, 31);
  RunConfig config = fast_ic_config();
  config.r_max = 12;
  config.train.eps_l = 1e-12;  // never stops: fixed 12 rounds

  const RunResult sequential = run_ic_rounds(config, dataset, 8, /*threads=*/1);
  const RunResult threaded = run_ic_rounds(config, dataset, 8, /*threads=*/3);
  const RunResult again = run_ic_rounds(config, dataset, 8, /*threads=*/1);

  REQUIRE(sequential.cluster_params.size() == threaded.cluster_params.size());
  for (std::size_t j = 0; j < sequential.cluster_params.size(); ++j) {
    CHECK(sequential.cluster_params[j] == threaded.cluster_params[j]);
    CHECK(sequential.cluster_params[j] == again.cluster_params[j]);
  }
  CHECK(sequential.flags == threaded.flags);
  REQUIRE(sequential.logs.size() == threaded.logs.size());
  for (std::size_t r = 0; r < sequential.logs.size(); ++r) {
    json a = round_log_to_json(0, sequential.logs[r]);
    json b = round_log_to_json(0, threaded.logs[r]);
    a.erase("wall_ms");
    b.erase("wall_ms");
    CHECK(a.dump() == b.dump());
  }
}

TEST_CASE("suites are reproducible end to end") {
  RunConfig config = fast_ic_config();
  config.r_max = 15;
  config.repetitions = 2;
  config.dataset = tiny_spec(1, 2, 6, 10, 7);
  config.master_seed = 4;

  const SuiteResult a = run_suite(config);
  const SuiteResult b = run_suite(config);
  CHECK(summary_to_json(a).dump() == summary_to_json(b).dump());
  CHECK(summary_to_csv(a) == summary_to_csv(b));
}

TEST_CASE("repetitions shift both training seed and synthetic data") {
  RunConfig config;
  config.method = Method::c_sysid;
  config.clustering = ClusteringMode::none;
  config.k_init = 1;
  config.r_max = 2;
  config.repetitions = 3;
  config.master_seed = 100;
  config.dataset = tiny_spec(1, 2, 5, 8, 50);

  const SuiteResult suite = run_suite(config);
  REQUIRE(suite.repetitions.size() == 3);
  CHECK(suite.aggregate.failures == 0);
  CHECK(suite.aggregate.succeeded == 3);

  for (int k = 0; k < 3; ++k) {
    CHECK(suite.repetitions[k].seed == 100 + static_cast<std::uint64_t>(k));
    CHECK(suite.repetitions[k].summary.rounds_used == 2);
  }
  CHECK(suite.repetitions[0].summary.dataset_hash != suite.repetitions[1].summary.dataset_hash);
  CHECK(suite.repetitions[1].summary.dataset_hash != suite.repetitions[2].summary.dataset_hash);

  // Aggregate moments match a direct computation over the repetitions.
  double mw_mean = 0.0;
  for (const RepetitionReport& rep : suite.repetitions) mw_mean += rep.summary.mw_pct;
  mw_mean /= 3.0;
  CHECK(suite.aggregate.mw_pct_mean == doctest::Approx(mw_mean));
  CHECK(suite.aggregate.rounds_mean == doctest::Approx(2.0));
  CHECK(suite.aggregate.k_r_mean == doctest::Approx(1.0));
  CHECK(suite.aggregate.k_r_modal == 1);
  CHECK(suite.aggregate.uc_pct >= 0.0);
}

TEST_CASE("an imported dataset stays fixed across repetitions") {
  const Dataset dataset = tiny_dataset(1, 2, 5, 8, 60);
  const fs::path dir = fs::temp_directory_path() / "icsysid_test_suite_import";
  fs::remove_all(dir);
  export_dataset(dataset, dir);

  RunConfig config;
  config.method = Method::c_sysid;
  config.clustering = ClusteringMode::none;
  config.k_init = 1;
  config.r_max = 2;
  config.repetitions = 2;
  config.dataset_path = dir.string();

  const SuiteResult suite = run_suite(config);
  REQUIRE(suite.aggregate.succeeded == 2);
  CHECK(suite.repetitions[0].summary.dataset_hash == suite.repetitions[1].summary.dataset_hash);
  CHECK(suite.repetitions[0].summary.dataset_hash == dataset_fingerprint(dataset));
  // Training still differs by repetition seed.
  CHECK(suite.repetitions[0].seed != suite.repetitions[1].seed);
  fs::remove_all(dir);
}

TEST_CASE("a repetition failure is recorded without sinking the suite") {
  RunConfig config = fast_ic_config();
  config.repetitions = 2;
  config.dataset = tiny_spec(1, 2, 1, 8, 70);  // one rollout: no cluster-check partition

  const SuiteResult suite = run_suite(config);
  REQUIRE(suite.repetitions.size() == 2);
  CHECK(suite.aggregate.failures == 2);
  CHECK(suite.aggregate.succeeded == 0);
  CHECK(suite.repetitions[0].failed);
  CHECK_FALSE(suite.repetitions[0].error.empty());

  const json j = summary_to_json(suite);
  CHECK(j["repetitions"][0]["failed"] == true);
  CHECK(j["repetitions"][0].contains("error"));
  CHECK_FALSE(j["aggregate"].contains("fit_prediction_mean"));
}

TEST_CASE("driver preconditions") {
  const Dataset two_clusters = tiny_dataset(2, 1, 4, 6, 80);

  RunConfig warm;
  warm.method = Method::c_sysid;
  warm.clustering = ClusteringMode::none;
  warm.init = InitMode::warm;
  warm.k_init = 1;  // must equal the ground-truth count (2)
  warm.r_max = 1;
  CHECK_THROWS_AS(run_c_rounds(warm, two_clusters, 1), ConfigError);
  warm.k_init = 2;
  CHECK_NOTHROW(run_c_rounds(warm, two_clusters, 1));

  RunConfig ic = fast_ic_config();
  CHECK_THROWS_AS(run_c_sysid(ic, two_clusters, 1), std::invalid_argument);
  RunConfig baseline = warm;
  CHECK_THROWS_AS(run_ic_sysid(baseline, two_clusters, 1), std::invalid_argument);
}
