#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "doctest.h"
#include "icsysid/datagen.hpp"
#include "icsysid/dataset_io.hpp"
#include "icsysid/errors.hpp"
#include "oracles.hpp"

using namespace icsysid;
namespace fs = std::filesystem;

namespace {

DatasetSpec benchmark_spec() {
  DatasetSpec spec;
  spec.gt_cluster_count = 5;
  spec.cluster_sizes = {10, 24, 16, 28, 22};
  spec.rollouts_per_worker = 100;
  spec.steps = 50;
  spec.master_seed = 11;
  return spec;
}

fs::path temp_dir(const char* slug) {
  const fs::path dir = fs::temp_directory_path() / slug;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("built-in ground truth has five stable benchmark models") {
  const auto gt = builtin_ground_truth();
  REQUIRE(gt.size() == 5);
  for (const LtiParams& p : gt) {
    CHECK(p.state_dim() == 3);
    CHECK(p.input_dim() == 2);
    CHECK(stability_report(p.a).is_stable);
  }
  CHECK(gt[0].a.norm() == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(gt[3].a(0, 1) == 0.25);
  CHECK(gt[4].b(2, 1) == 0.1);
}

TEST_CASE("spec validation catches inconsistent fleets") {
  DatasetSpec spec = benchmark_spec();
  CHECK_NOTHROW(spec.validate());

  spec.cluster_sizes = {10, 24};
  CHECK_THROWS_AS(spec.validate(), ConfigError);

  spec = benchmark_spec();
  spec.gt_cluster_count = 6;
  spec.cluster_sizes = {1, 1, 1, 1, 1, 1};
  CHECK_THROWS_AS(spec.validate(), ConfigError);  // only 5 built-in models

  spec = benchmark_spec();
  spec.cc_fraction = 1.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);

  spec = benchmark_spec();
  spec.sigma_w = -0.01;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("workers map to ground-truth clusters contiguously") {
  DatasetSpec spec = benchmark_spec();
  spec.rollouts_per_worker = 2;
  spec.steps = 3;
  const Dataset ds = build_synthetic_dataset(spec, select_ground_truth(spec));

  REQUIRE(static_cast<int>(ds.workers.size()) == 100);
  CHECK(ds.workers[0].gt_label == 1);
  CHECK(ds.workers[9].gt_label == 1);
  CHECK(ds.workers[10].gt_label == 2);
  CHECK(ds.workers[33].gt_label == 2);
  CHECK(ds.workers[34].gt_label == 3);
  CHECK(ds.workers[99].gt_label == 5);

  int expected_id = 0;
  for (const GroundTruthCluster& cluster : ds.ground_truth)
    for (int id : cluster.member_worker_ids) CHECK(id == expected_id++);
  CHECK(expected_id == 100);
}

TEST_CASE("train/cc split holds out a fifth of the rollouts") {
  DatasetSpec spec = benchmark_spec();
  spec.rollouts_per_worker = 100;
  spec.steps = 2;
  const Dataset ds = build_synthetic_dataset(spec, select_ground_truth(spec));
  for (const WorkerDataset& w : ds.workers) {
    CHECK(w.cc_rollouts.size() == 20);
    CHECK(w.train_rollouts.size() == 80);
  }
}

TEST_CASE("split keeps both partitions non-empty at small counts") {
  std::vector<Rollout> rollouts;
  const LtiParams gt = builtin_ground_truth()[0];
  RngEngine gen = make_engine(3, Stream::rollout);
  for (int i = 0; i < 2; ++i) rollouts.push_back(generate_rollout(gt, 4, 0.05, 0.05, 0.02, gen));

  RngEngine rng = make_engine(3, Stream::split);
  const auto [train, cc] = split_worker_data(rollouts, 0.2, rng);
  CHECK(train.size() == 1);
  CHECK(cc.size() == 1);

  RngEngine rng2 = make_engine(3, Stream::split);
  std::vector<Rollout> one(rollouts.begin(), rollouts.begin() + 1);
  CHECK_THROWS_AS(split_worker_data(one, 0.2, rng2), std::invalid_argument);
}

TEST_CASE("split is a permutation of the inputs") {
  std::vector<Rollout> rollouts;
  const LtiParams gt = builtin_ground_truth()[1];
  RngEngine gen = make_engine(8, Stream::rollout);
  for (int i = 0; i < 10; ++i) rollouts.push_back(generate_rollout(gt, 3, 0.05, 0.05, 0.02, gen));

  RngEngine rng = make_engine(8, Stream::split);
  const auto [train, cc] = split_worker_data(rollouts, 0.3, rng);
  CHECK(cc.size() == 3);
  CHECK(train.size() == 7);

  std::multiset<double> before, after;
  for (const Rollout& r : rollouts) before.insert(r.states(0, 0));
  for (const Rollout& r : train) after.insert(r.states(0, 0));
  for (const Rollout& r : cc) after.insert(r.states(0, 0));
  CHECK(before == after);
}

TEST_CASE("single-rollout workers keep everything in train") {
  DatasetSpec spec = benchmark_spec();
  spec.gt_cluster_count = 1;
  spec.cluster_sizes = {3};
  spec.rollouts_per_worker = 1;
  spec.steps = 5;
  const Dataset ds = build_synthetic_dataset(spec, select_ground_truth(spec));
  for (const WorkerDataset& w : ds.workers) {
    CHECK(w.train_rollouts.size() == 1);
    CHECK(w.cc_rollouts.empty());
  }
}

TEST_CASE("dataset construction is deterministic and seed-sensitive") {
  DatasetSpec spec = benchmark_spec();
  spec.gt_cluster_count = 2;
  spec.cluster_sizes = {2, 3};
  spec.rollouts_per_worker = 4;
  spec.steps = 6;

  const Dataset a = build_synthetic_dataset(spec, select_ground_truth(spec));
  const Dataset b = build_synthetic_dataset(spec, select_ground_truth(spec));
  CHECK(dataset_fingerprint(a) == dataset_fingerprint(b));

  spec.master_seed = 12;
  const Dataset c = build_synthetic_dataset(spec, select_ground_truth(spec));
  CHECK(dataset_fingerprint(a) != dataset_fingerprint(c));
}

TEST_CASE("regression view stacks states over inputs with one-step targets") {
  const LtiParams gt = builtin_ground_truth()[2];
  RngEngine gen = make_engine(5, Stream::rollout);
  std::vector<Rollout> rollouts = {generate_rollout(gt, 4, 0.05, 0.05, 0.02, gen),
                                   generate_rollout(gt, 7, 0.05, 0.05, 0.02, gen)};

  const RegressionView view = make_regression_view(rollouts);
  REQUIRE(view.sample_count() == 11);
  REQUIRE(view.phi.rows() == 5);
  REQUIRE(view.x.rows() == 3);

  // The first rollout contributes columns 0..3, so sample 4 is the second
  // rollout's first transition.
  CHECK(view.phi.col(4).head(3) == rollouts[1].states.col(0));
  CHECK(view.phi.col(4).tail(2) == rollouts[1].inputs.col(0));
  CHECK(view.x.col(4) == rollouts[1].states.col(1));
  // Sample 3 is the first rollout's last transition.
  CHECK(view.phi.col(3).head(3) == rollouts[0].states.col(3));
  CHECK(view.x.col(3) == rollouts[0].states.col(4));
}

TEST_CASE("minibatches cover every sample exactly once") {
  RngEngine rng = make_engine(2, Stream::minibatch, {0, 0});
  const auto batches = make_minibatches(5000, 128, rng);
  REQUIRE(batches.size() == 40);  // 39 full batches + remainder of 8
  for (std::size_t i = 0; i + 1 < batches.size(); ++i) CHECK(batches[i].size() == 128);
  CHECK(batches.back().size() == 8);

  std::vector<char> seen(5000, 0);
  for (const auto& batch : batches)
    for (int idx : batch) {
      REQUIRE(idx >= 0);
      REQUIRE(idx < 5000);
      CHECK(seen[idx] == 0);
      seen[idx] = 1;
    }
  CHECK(std::count(seen.begin(), seen.end(), 1) == 5000);
}

TEST_CASE("minibatch order is shuffled, not sequential") {
  RngEngine rng = make_engine(2, Stream::minibatch, {1, 0});
  const auto batches = make_minibatches(256, 128, rng);
  std::vector<int> flat;
  for (const auto& b : batches) flat.insert(flat.end(), b.begin(), b.end());
  std::vector<int> sequential(256);
  std::iota(sequential.begin(), sequential.end(), 0);
  CHECK(flat != sequential);
}

TEST_CASE("export/import round-trips the dataset bit-exactly") {
  DatasetSpec spec = benchmark_spec();
  spec.gt_cluster_count = 3;
  spec.cluster_sizes = {2, 1, 2};
  spec.rollouts_per_worker = 5;
  spec.steps = 8;
  const Dataset original = build_synthetic_dataset(spec, select_ground_truth(spec));

  const fs::path dir = temp_dir("icsysid_test_roundtrip");
  export_dataset(original, dir);
  const Dataset loaded = import_dataset(dir);

  CHECK(dataset_fingerprint(loaded) == dataset_fingerprint(original));
  REQUIRE(loaded.workers.size() == original.workers.size());
  for (std::size_t i = 0; i < loaded.workers.size(); ++i) {
    CHECK(loaded.workers[i].gt_label == original.workers[i].gt_label);
    REQUIRE(loaded.workers[i].train_rollouts.size() == original.workers[i].train_rollouts.size());
    for (std::size_t r = 0; r < loaded.workers[i].train_rollouts.size(); ++r)
      CHECK(loaded.workers[i].train_rollouts[r].states ==
            original.workers[i].train_rollouts[r].states);
  }
  fs::remove_all(dir);
}

TEST_CASE("on-disk worker ids and labels are 1-based") {
  DatasetSpec spec = benchmark_spec();
  spec.gt_cluster_count = 2;
  spec.cluster_sizes = {1, 1};
  spec.rollouts_per_worker = 2;
  spec.steps = 3;
  const Dataset ds = build_synthetic_dataset(spec, select_ground_truth(spec));

  const fs::path dir = temp_dir("icsysid_test_onebased");
  export_dataset(ds, dir);
  const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  CHECK(manifest["workers"][0]["id"] == 1);
  CHECK(manifest["workers"][1]["id"] == 2);
  CHECK(manifest["workers"][1]["gt_label"] == 2);
  CHECK(manifest["ground_truth"][0]["label"] == 1);
  CHECK(manifest["ground_truth"][0]["workers"][0] == 1);
  CHECK(fs::exists(dir / "worker_0001"));
  CHECK(fs::exists(dir / "worker_0002"));
  fs::remove_all(dir);
}

TEST_CASE("import rejects corrupted layouts") {
  DatasetSpec spec = benchmark_spec();
  spec.gt_cluster_count = 1;
  spec.cluster_sizes = {2};
  spec.rollouts_per_worker = 3;
  spec.steps = 4;
  const Dataset ds = build_synthetic_dataset(spec, select_ground_truth(spec));

  const fs::path dir = temp_dir("icsysid_test_corrupt");

  SUBCASE("missing manifest") { CHECK_THROWS_AS(import_dataset(dir), DataError); }

  SUBCASE("bad format tag") {
    export_dataset(ds, dir);
    auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    manifest["format"] = "something-else";
    write_text_file(dir / "manifest.json", manifest.dump());
    CHECK_THROWS_AS(import_dataset(dir), DataError);
  }

  SUBCASE("missing rollout file") {
    export_dataset(ds, dir);
    fs::remove(dir / "worker_0001" / "train_000.csv");
    CHECK_THROWS_AS(import_dataset(dir), DataError);
  }

  SUBCASE("mangled csv cell") {
    export_dataset(ds, dir);
    std::string text = read_text_file(dir / "worker_0001" / "cc_000.csv");
    const auto pos = text.find_last_of("0123456789");
    text[pos] = 'x';
    write_text_file(dir / "worker_0001" / "cc_000.csv", text);
    CHECK_THROWS_AS(import_dataset(dir), DataError);
  }

  SUBCASE("unknown spec key") {
    export_dataset(ds, dir);
    auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    manifest["spec"]["surprise"] = 1;
    write_text_file(dir / "manifest.json", manifest.dump());
    CHECK_THROWS_AS(import_dataset(dir), ConfigError);
  }

  fs::remove_all(dir);
}

TEST_CASE("spec JSON round-trips including custom ground truth") {
  DatasetSpec spec = benchmark_spec();
  spec.gt_cluster_count = 2;
  spec.cluster_sizes = {1, 2};
  spec.rollouts_per_worker = 2;
  spec.steps = 3;
  const auto gt = builtin_ground_truth();
  spec.custom_ground_truth = std::vector<LtiParams>{gt[0], gt[4]};

  const DatasetSpec back = dataset_spec_from_json(dataset_spec_to_json(spec), "test");
  CHECK(back.gt_cluster_count == 2);
  CHECK(back.cluster_sizes == spec.cluster_sizes);
  REQUIRE(back.custom_ground_truth.has_value());
  CHECK((*back.custom_ground_truth)[1].a == gt[4].a);
  CHECK((*back.custom_ground_truth)[1].b == gt[4].b);
}
