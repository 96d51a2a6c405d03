#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "icsysid/orchestrator.hpp"

namespace icsysid {

nlohmann::json round_log_to_json(int repetition, const RoundLog& log);
nlohmann::json summary_to_json(const SuiteResult& suite);
std::string summary_to_csv(const SuiteResult& suite);

// Streams rounds.jsonl while the suite runs and writes summary.json,
// summary.csv and clusters_final.json on finish(). Serialized ids (worker,
// repetition, round, flags, labels) are 1-based; doubles keep 17 significant
// digits. Timing appears only in rounds.jsonl.
class SuiteOutputWriter {
 public:
  explicit SuiteOutputWriter(std::filesystem::path dir);

  RepetitionSink sink();
  void finish(const SuiteResult& suite);

 private:
  std::filesystem::path dir_;
  std::ofstream rounds_;
  nlohmann::json clusters_ = nlohmann::json::array();
};

// Side-by-side rendering of previously written run directories.
// Formats: "md", "csv", "json".
std::string render_report(const std::vector<std::filesystem::path>& run_dirs,
                          const std::string& format);

}  // namespace icsysid
