#include "icsysid/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>

#include "icsysid/dataset_io.hpp"
#include "icsysid/errors.hpp"

namespace icsysid {

using nlohmann::json;

ReproductionScenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("scenario: expected a JSON object");

  ReproductionScenario scenario;
  bool have_config = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "name") {
      scenario.name = value.get<std::string>();
    } else if (key == "config") {
      scenario.config = run_config_from_json(value);
      have_config = true;
    } else if (key == "expectations") {
      if (!value.is_array() || value.empty())
        throw ConfigError("scenario: expectations must be a non-empty array");
      for (const json& entry : value) {
        Expectation e;
        for (const auto& [ekey, evalue] : entry.items()) {
          if (ekey == "metric")
            e.metric = evalue.get<std::string>();
          else if (ekey == "op")
            e.op = evalue.get<std::string>();
          else if (ekey == "value")
            e.value = evalue.get<double>();
          else if (ekey == "tolerance")
            e.tolerance = evalue.get<double>();
          else if (ekey == "provenance")
            e.provenance = evalue.get<std::string>();
          else
            throw ConfigError("scenario: unknown expectation key '" + ekey + "'");
        }
        if (e.metric.empty()) throw ConfigError("scenario: expectation without a metric");
        if (e.op != "lt" && e.op != "le" && e.op != "gt" && e.op != "ge" && e.op != "eq" &&
            e.op != "within")
          throw ConfigError("scenario: unknown op '" + e.op + "' for metric " + e.metric);
        if (e.op == "within" && !(e.tolerance >= 0))
          throw ConfigError("scenario: 'within' needs a tolerance >= 0 for metric " + e.metric);
        if (e.provenance.empty())
          throw ConfigError("scenario: expectation on '" + e.metric +
                            "' is missing its provenance");
        scenario.expectations.push_back(std::move(e));
      }
    } else {
      throw ConfigError("scenario: unknown key '" + key + "'");
    }
  }
  if (scenario.name.empty()) throw ConfigError("scenario: 'name' is required");
  if (!have_config) throw ConfigError("scenario: 'config' is required");
  if (scenario.expectations.empty()) throw ConfigError("scenario: 'expectations' is required");
  return scenario;
}

ReproductionScenario load_scenario_file(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

namespace {

// Parses "<prefix>.q<i>" / "<prefix>.q<i>.n<j>" style indices, 1-based.
bool take_index(const std::string& text, std::size_t& pos, char marker, int& out) {
  if (pos >= text.size() || text[pos] != '.') return false;
  std::size_t cursor = pos + 1;
  if (cursor >= text.size() || text[cursor] != marker) return false;
  ++cursor;
  std::size_t digits = 0;
  int value = 0;
  while (cursor + digits < text.size() && std::isdigit(text[cursor + digits])) {
    value = value * 10 + (text[cursor + digits] - '0');
    ++digits;
  }
  if (digits == 0) return false;
  pos = cursor + digits;
  out = value;
  return true;
}

double matrix_metric(const Matrix& m, int q, int n, const std::string& key) {
  if (q < 1 || q > m.rows() || n < 1 || n > m.cols())
    throw ConfigError("scenario: index out of range in metric '" + key + "'");
  return m(q - 1, n - 1);
}

}  // namespace

double resolve_metric(const SuiteResult& suite, const std::string& key) {
  const SuiteAggregate& agg = suite.aggregate;
  if (key == "rounds_mean") return agg.rounds_mean;
  if (key == "rounds_std") return agg.rounds_std;
  if (key == "k_r_mean") return agg.k_r_mean;
  if (key == "k_r_std") return agg.k_r_std;
  if (key == "k_r_modal") return agg.k_r_modal;
  if (key == "mw_pct_mean") return agg.mw_pct_mean;
  if (key == "mw_pct_std") return agg.mw_pct_std;
  if (key == "uc_pct") return agg.uc_pct;
  if (key == "failures") return agg.failures;
  if (key == "succeeded") return agg.succeeded;

  if (agg.succeeded == 0)
    throw ConfigError("scenario: metric '" + key + "' is undefined (no successful repetitions)");

  if (key == "param_error_max") {
    if (agg.param_error_mean.empty()) throw ConfigError("scenario: no param errors recorded");
    return *std::max_element(agg.param_error_mean.begin(), agg.param_error_mean.end());
  }

  int q = 0, n = 0;
  std::size_t pos;
  auto starts_with = [&](const char* prefix) {
    const std::size_t len = std::strlen(prefix);
    if (key.compare(0, len, prefix) == 0) {
      pos = len;
      return true;
    }
    return false;
  };

  if (starts_with("param_error") && take_index(key, pos, 'q', q) && pos == key.size()) {
    if (q < 1 || q > static_cast<int>(agg.param_error_mean.size()))
      throw ConfigError("scenario: index out of range in metric '" + key + "'");
    return agg.param_error_mean[q - 1];
  }
  if (starts_with("fit_pred") && take_index(key, pos, 'q', q) && take_index(key, pos, 'n', n) &&
      pos == key.size())
    return matrix_metric(agg.fit_prediction_mean, q, n, key);
  if (starts_with("fit_sim") && take_index(key, pos, 'q', q) && take_index(key, pos, 'n', n) &&
      pos == key.size())
    return matrix_metric(agg.fit_simulation_mean, q, n, key);
  if (starts_with("fleet_fit_pred") && take_index(key, pos, 'n', n) && pos == key.size()) {
    if (n < 1 || n > agg.fleet_fit_prediction_mean.size())
      throw ConfigError("scenario: index out of range in metric '" + key + "'");
    return agg.fleet_fit_prediction_mean(n - 1);
  }
  if (starts_with("fleet_fit_sim") && take_index(key, pos, 'n', n) && pos == key.size()) {
    if (n < 1 || n > agg.fleet_fit_simulation_mean.size())
      throw ConfigError("scenario: index out of range in metric '" + key + "'");
    return agg.fleet_fit_simulation_mean(n - 1);
  }

  throw ConfigError("scenario: unknown metric '" + key + "'");
}

CheckReport check_scenario(const ReproductionScenario& scenario, int threads, bool verbose) {
  CheckReport report;
  report.scenario = scenario.name;

  const SuiteResult suite = run_suite(scenario.config, threads, verbose);

  report.all_passed = true;
  for (const Expectation& expectation : scenario.expectations) {
    ExpectationOutcome outcome;
    outcome.expectation = expectation;
    outcome.actual = resolve_metric(suite, expectation.metric);

    const double a = outcome.actual;
    const double v = expectation.value;
    if (expectation.op == "lt")
      outcome.passed = a < v;
    else if (expectation.op == "le")
      outcome.passed = a <= v;
    else if (expectation.op == "gt")
      outcome.passed = a > v;
    else if (expectation.op == "ge")
      outcome.passed = a >= v;
    else if (expectation.op == "eq")
      outcome.passed = a == v;
    else
      outcome.passed = std::abs(a - v) <= expectation.tolerance;

    report.all_passed = report.all_passed && outcome.passed;
    report.outcomes.push_back(std::move(outcome));
  }
  return report;
}

json check_report_to_json(const CheckReport& report) {
  json outcomes = json::array();
  for (const ExpectationOutcome& outcome : report.outcomes) {
    outcomes.push_back(json{{"metric", outcome.expectation.metric},
                            {"op", outcome.expectation.op},
                            {"value", outcome.expectation.value},
                            {"tolerance", outcome.expectation.tolerance},
                            {"provenance", outcome.expectation.provenance},
                            {"actual", outcome.actual},
                            {"delta", outcome.actual - outcome.expectation.value},
                            {"passed", outcome.passed}});
  }
  return json{{"scenario", report.scenario},
              {"all_passed", report.all_passed},
              {"expectations", std::move(outcomes)}};
}

}  // namespace icsysid
