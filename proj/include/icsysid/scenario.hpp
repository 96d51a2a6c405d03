#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "icsysid/orchestrator.hpp"

namespace icsysid {

// One graded expectation on a suite-level metric. `op` is one of
// lt | le | gt | ge | eq | within ("within" compares |actual - value| against
// tolerance). Every expectation must say where its numbers come from.
struct Expectation {
  std::string metric;
  std::string op;
  double value = 0.0;
  double tolerance = 0.0;
  std::string provenance;
};

struct ReproductionScenario {
  std::string name;
  RunConfig config;
  std::vector<Expectation> expectations;
};

ReproductionScenario scenario_from_json(const nlohmann::json& j);
ReproductionScenario load_scenario_file(const std::filesystem::path& path);

// Metric keys: rounds_mean, k_r_mean, k_r_modal, mw_pct_mean, mw_pct_std,
// uc_pct, failures, param_error_max, param_error.q<i>, fit_pred.q<i>.n<j>,
// fit_sim.q<i>.n<j>, fleet_fit_pred.n<j>, fleet_fit_sim.n<j>.
double resolve_metric(const SuiteResult& suite, const std::string& key);

struct ExpectationOutcome {
  Expectation expectation;
  double actual = 0.0;
  bool passed = false;
};

struct CheckReport {
  std::string scenario;
  bool all_passed = false;
  std::vector<ExpectationOutcome> outcomes;
};

CheckReport check_scenario(const ReproductionScenario& scenario, int threads = 1,
                           bool verbose = false);

nlohmann::json check_report_to_json(const CheckReport& report);

}  // namespace icsysid
