#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "icsysid/clustering.hpp"
#include "icsysid/datagen.hpp"
#include "icsysid/metrics.hpp"
#include "icsysid/training.hpp"
#include "json.hpp"

namespace icsysid {

enum class Method { c_sysid, ic_sysid };
enum class ClusteringMode { none, cc, ecc };
enum class InitMode { glorot, glorot_scaled, warm };

struct RunConfig {
  Method method = Method::ic_sysid;
  ClusteringMode clustering = ClusteringMode::cc;
  bool apply_cm = false;
  int k_init = 1;  // forced to 1 for the incremental method
  InitMode init = InitMode::glorot_scaled;
  double warm_eta = 0.25;
  int r_max = 1000;
  int repetitions = 1;
  CcThresholds thresholds;
  TrainConfig train;
  std::optional<DatasetSpec> dataset;       // exactly one of dataset /
  std::optional<std::string> dataset_path;  // dataset_path must be set
  std::uint64_t master_seed = 1;
  MatrixNorm2 norm2 = MatrixNorm2::spectral;
  MatrixNorm1 norm1 = MatrixNorm1::entrywise;

  void validate() const;
};

// Strict JSON parse: unknown keys (at any level) are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);

// Per-round trace. cluster_count and flags are the broadcast-time values;
// cluster_params snapshots the registry after aggregation (and spawn).
struct RoundLog {
  int round = 0;  // 0-based
  int cluster_count = 0;
  std::vector<int> flags;
  std::vector<double> losses;
  std::vector<double> min_fits;
  std::vector<double> spectral_radii;
  std::vector<Matrix> cluster_params;
  double wall_ms = 0.0;
};

struct RunResult {
  std::vector<Matrix> cluster_params;  // registry at stop, before any merge
  std::vector<int> flags;              // latest assignment, 0-based
  int rounds_used = 0;
  std::vector<RoundLog> logs;
};

struct FinalModel {
  std::vector<Matrix> cluster_params;
  std::vector<int> flags;

  int cluster_count() const { return static_cast<int>(cluster_params.size()); }
};

struct ExperimentSummary {
  Matrix fit_prediction;  // gt clusters x states, mean per-state fit
  Matrix fit_simulation;
  Vector fleet_fit_prediction;
  Vector fleet_fit_simulation;
  std::vector<double> param_errors;  // best-match error per gt cluster
  int rounds_used = 0;
  int final_cluster_count = 0;
  double mw_pct = 0.0;
  int unstable_clusters = 0;
  int total_clusters = 0;
  std::uint64_t dataset_hash = 0;
  std::uint64_t seed = 0;
};

// Incremental driver: single seed cluster, local Adam passes, optional
// ClusterCraft/eCC growth, aggregation over broadcast-time flags, early stop
// on the 10-round loss window.
RunResult run_ic_rounds(const RunConfig& config, const Dataset& dataset, std::uint64_t seed,
                        int threads = 1);

// Baseline driver: k_init clusters, per-round identity re-estimation and one
// full-batch least-squares step per worker; always runs r_max rounds.
RunResult run_c_rounds(const RunConfig& config, const Dataset& dataset, std::uint64_t seed,
                       int threads = 1);

FinalModel finalize_run(const RunResult& result, bool apply_cm, double eps_theta,
                        MatrixNorm2 norm = MatrixNorm2::spectral);

ExperimentSummary summarize_run(const Dataset& dataset, const FinalModel& final_model,
                                int rounds_used);

struct SingleRun {
  RunResult rounds;
  FinalModel final_model;
  ExperimentSummary summary;
};

SingleRun run_ic_sysid(const RunConfig& config, const Dataset& dataset, std::uint64_t seed,
                       int threads = 1);
SingleRun run_c_sysid(const RunConfig& config, const Dataset& dataset, std::uint64_t seed,
                      int threads = 1);

struct RepetitionReport {
  int repetition = 0;  // 0-based
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  ExperimentSummary summary;  // valid only when !failed
};

struct SuiteAggregate {
  Matrix fit_prediction_mean, fit_prediction_std;
  Matrix fit_simulation_mean, fit_simulation_std;
  Vector fleet_fit_prediction_mean, fleet_fit_simulation_mean;
  std::vector<double> param_error_mean, param_error_std;
  double rounds_mean = 0, rounds_std = 0;
  double k_r_mean = 0, k_r_std = 0;
  int k_r_modal = 0;
  double mw_pct_mean = 0, mw_pct_std = 0;
  double uc_pct = 0;  // pooled over repetitions
  int failures = 0;
  int succeeded = 0;
};

struct SuiteResult {
  RunConfig config;
  std::vector<RepetitionReport> repetitions;
  SuiteAggregate aggregate;
};

using RepetitionSink =
    std::function<void(int repetition, const Dataset& dataset, const SingleRun& run)>;

// Runs config.repetitions repetitions. Repetition k trains with seed
// master_seed + k; synthetic data regenerates with dataset seed + k, while a
// dataset_path dataset stays fixed. A failing repetition is recorded and the
// suite continues; aggregates cover the successful ones (population std).
SuiteResult run_suite(const RunConfig& config, int threads = 1, bool verbose = false,
                      const RepetitionSink& sink = {});

}  // namespace icsysid
