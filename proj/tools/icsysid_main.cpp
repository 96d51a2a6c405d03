#include <cstdio>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "icsysid/dataset_io.hpp"
#include "icsysid/errors.hpp"
#include "icsysid/orchestrator.hpp"
#include "icsysid/report.hpp"
#include "icsysid/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCheckFailed = 4;

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(icsysid::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw icsysid::ConfigError(path.string() + ": " + e.what());
  }
}

int run_generate(const std::string& spec_file, const std::string& out_dir) {
  const icsysid::DatasetSpec spec =
      icsysid::dataset_spec_from_json(parse_json_file(spec_file), spec_file);
  const icsysid::Dataset dataset =
      icsysid::build_synthetic_dataset(spec, icsysid::select_ground_truth(spec));
  icsysid::export_dataset(dataset, out_dir);
  std::printf("generated %zu workers x %d rollouts -> %s\n", dataset.workers.size(),
              spec.rollouts_per_worker, out_dir.c_str());
  return kExitOk;
}

int run_run(const std::string& config_file, const std::string& out_dir, int threads) {
  const icsysid::RunConfig config = icsysid::run_config_from_json(parse_json_file(config_file));
  icsysid::SuiteOutputWriter writer(out_dir);
  const icsysid::SuiteResult suite =
      icsysid::run_suite(config, threads, /*verbose=*/true, writer.sink());
  writer.finish(suite);
  std::printf("wrote summary.json, summary.csv, rounds.jsonl, clusters_final.json -> %s\n",
              out_dir.c_str());
  if (suite.aggregate.failures > 0)
    std::fprintf(stderr, "warning: %d repetition(s) failed\n", suite.aggregate.failures);
  return kExitOk;
}

int run_report(const std::vector<std::string>& runs, const std::string& format,
               const std::string& out_file) {
  std::vector<fs::path> dirs(runs.begin(), runs.end());
  const std::string rendered = icsysid::render_report(dirs, format);
  if (out_file.empty())
    std::fputs(rendered.c_str(), stdout);
  else
    icsysid::write_text_file(out_file, rendered);
  return kExitOk;
}

int run_check(const std::string& scenario_name, const std::string& scenario_dir,
              const std::string& out_file, int threads) {
  std::vector<fs::path> files;
  if (scenario_name == "all") {
    if (!fs::is_directory(scenario_dir))
      throw icsysid::DataError("check: no scenario directory at " + scenario_dir);
    for (const auto& entry : fs::directory_iterator(scenario_dir))
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw icsysid::DataError("check: no scenarios in " + scenario_dir);
  } else {
    fs::path candidate = fs::path(scenario_dir) / (scenario_name + ".json");
    if (!fs::exists(candidate) && fs::exists(scenario_name)) candidate = scenario_name;
    if (!fs::exists(candidate))
      throw icsysid::DataError("check: scenario '" + scenario_name + "' not found in " +
                               scenario_dir);
    files.push_back(candidate);
  }

  json reports = json::array();
  bool all_passed = true;
  for (const fs::path& file : files) {
    const icsysid::ReproductionScenario scenario = icsysid::load_scenario_file(file);
    std::printf("checking %s ...\n", scenario.name.c_str());
    std::fflush(stdout);
    const icsysid::CheckReport report =
        icsysid::check_scenario(scenario, threads, /*verbose=*/true);
    for (const icsysid::ExpectationOutcome& outcome : report.outcomes) {
      std::printf("  [%s] %s %s %.17g", outcome.passed ? "PASS" : "FAIL",
                  outcome.expectation.metric.c_str(), outcome.expectation.op.c_str(),
                  outcome.expectation.value);
      if (outcome.expectation.op == "within")
        std::printf(" (tol %.17g)", outcome.expectation.tolerance);
      std::printf("  actual %.17g  delta %.3g\n", outcome.actual,
                  outcome.actual - outcome.expectation.value);
    }
    std::printf("%s: %s\n", report.scenario.c_str(), report.all_passed ? "PASS" : "FAIL");
    all_passed = all_passed && report.all_passed;
    reports.push_back(icsysid::check_report_to_json(report));
  }

  if (!out_file.empty())
    icsysid::write_text_file(out_file, json{{"reports", reports}, {"all_passed", all_passed}}
                                               .dump(2) +
                                           "\n");
  return all_passed ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated LTI system-identification lab"};
  app.require_subcommand(1);
  const int default_threads =
      std::max(1u, std::thread::hardware_concurrency());

  std::string spec_file, gen_out;
  CLI::App* generate = app.add_subcommand("generate", "build and export a synthetic dataset");
  generate->add_option("--spec", spec_file, "dataset spec JSON file")->required();
  generate->add_option("--out", gen_out, "output dataset directory")->required();

  std::string config_file, run_out;
  int run_threads = default_threads;
  CLI::App* run = app.add_subcommand("run", "run an experiment suite from a config file");
  run->add_option("--config", config_file, "run config JSON file")->required();
  run->add_option("--out", run_out, "output directory")->required();
  run->add_option("--threads", run_threads, "worker pool size");

  std::vector<std::string> report_runs;
  std::string report_format = "md", report_out;
  CLI::App* report = app.add_subcommand("report", "tabulate one or more run directories");
  report->add_option("--runs", report_runs, "run output directories")->required()->expected(-1);
  report->add_option("--format", report_format, "csv | json | md");
  report->add_option("--out", report_out, "write to file instead of stdout");

  std::string check_name, check_dir = "scenarios", check_out;
  int check_threads = default_threads;
  CLI::App* check = app.add_subcommand("check", "run bundled reproduction scenarios");
  check->add_option("--scenario", check_name, "scenario name or 'all'")->required();
  check->add_option("--dir", check_dir, "scenario directory");
  check->add_option("--out", check_out, "write a JSON check report");
  check->add_option("--threads", check_threads, "worker pool size");

  try {
    app.parse(argc, argv);
    if (*generate) return run_generate(spec_file, gen_out);
    if (*run) return run_run(config_file, run_out, run_threads);
    if (*report) return run_report(report_runs, report_format, report_out);
    return run_check(check_name, check_dir, check_out, check_threads);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const icsysid::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
}
