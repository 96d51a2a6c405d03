#include "icsysid/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "icsysid/dataset_io.hpp"
#include "icsysid/errors.hpp"

namespace icsysid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hash_hex(std::uint64_t value) {
  char buffer[20];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

json theta_to_json(const Matrix& theta) {
  const Eigen::Index nx = theta.rows();
  return json{{"a", matrix_to_json(theta.leftCols(nx))},
              {"b", matrix_to_json(theta.rightCols(theta.cols() - nx))}};
}

json vector_to_json(const Vector& v) {
  json array = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) array.push_back(v(i));
  return array;
}

}  // namespace

json round_log_to_json(int repetition, const RoundLog& log) {
  json flags = json::array();
  for (int f : log.flags) flags.push_back(f + 1);
  json clusters = json::array();
  for (const Matrix& theta : log.cluster_params) clusters.push_back(theta_to_json(theta));
  return json{{"rep", repetition + 1},
              {"round", log.round + 1},
              {"k", log.cluster_count},
              {"flags", std::move(flags)},
              {"loss", log.losses},
              {"min_fit", log.min_fits},
              {"spectral_radius", log.spectral_radii},
              {"clusters", std::move(clusters)},
              {"wall_ms", log.wall_ms}};
}

json summary_to_json(const SuiteResult& suite) {
  json reps = json::array();
  for (const RepetitionReport& rep : suite.repetitions) {
    json entry{{"repetition", rep.repetition + 1},
               {"seed", rep.seed},
               {"failed", rep.failed}};
    if (rep.failed) {
      entry["error"] = rep.error;
    } else {
      const ExperimentSummary& s = rep.summary;
      entry["dataset_hash"] = hash_hex(s.dataset_hash);
      entry["rounds"] = s.rounds_used;
      entry["k_r"] = s.final_cluster_count;
      entry["mw_pct"] = s.mw_pct;
      entry["unstable_clusters"] = s.unstable_clusters;
      entry["total_clusters"] = s.total_clusters;
      entry["param_error"] = s.param_errors;
      entry["fit_prediction"] = matrix_to_json(s.fit_prediction);
      entry["fit_simulation"] = matrix_to_json(s.fit_simulation);
      entry["fleet_fit_prediction"] = vector_to_json(s.fleet_fit_prediction);
      entry["fleet_fit_simulation"] = vector_to_json(s.fleet_fit_simulation);
    }
    reps.push_back(std::move(entry));
  }

  const SuiteAggregate& agg = suite.aggregate;
  json aggregate{{"failures", agg.failures},
                 {"succeeded", agg.succeeded},
                 {"rounds_mean", agg.rounds_mean},
                 {"rounds_std", agg.rounds_std},
                 {"k_r_mean", agg.k_r_mean},
                 {"k_r_std", agg.k_r_std},
                 {"k_r_modal", agg.k_r_modal},
                 {"mw_pct_mean", agg.mw_pct_mean},
                 {"mw_pct_std", agg.mw_pct_std},
                 {"uc_pct", agg.uc_pct}};
  if (agg.succeeded > 0) {
    aggregate["param_error_mean"] = agg.param_error_mean;
    aggregate["param_error_std"] = agg.param_error_std;
    aggregate["fit_prediction_mean"] = matrix_to_json(agg.fit_prediction_mean);
    aggregate["fit_prediction_std"] = matrix_to_json(agg.fit_prediction_std);
    aggregate["fit_simulation_mean"] = matrix_to_json(agg.fit_simulation_mean);
    aggregate["fit_simulation_std"] = matrix_to_json(agg.fit_simulation_std);
    aggregate["fleet_fit_prediction_mean"] = vector_to_json(agg.fleet_fit_prediction_mean);
    aggregate["fleet_fit_simulation_mean"] = vector_to_json(agg.fleet_fit_simulation_mean);
  }

  return json{{"config", run_config_to_json(suite.config)},
              {"repetitions", std::move(reps)},
              {"aggregate", std::move(aggregate)}};
}

std::string summary_to_csv(const SuiteResult& suite) {
  std::ostringstream out;
  out << "repetition,metric,value\n";
  for (const RepetitionReport& rep : suite.repetitions) {
    const int id = rep.repetition + 1;
    if (rep.failed) {
      out << id << ",failed,1\n";
      continue;
    }
    const ExperimentSummary& s = rep.summary;
    out << id << ",failed,0\n";
    out << id << ",rounds," << s.rounds_used << '\n';
    out << id << ",k_r," << s.final_cluster_count << '\n';
    out << id << ",mw_pct," << format_double(s.mw_pct) << '\n';
    out << id << ",unstable_clusters," << s.unstable_clusters << '\n';
    out << id << ",total_clusters," << s.total_clusters << '\n';
    for (std::size_t q = 0; q < s.param_errors.size(); ++q)
      out << id << ",param_error.q" << q + 1 << ',' << format_double(s.param_errors[q]) << '\n';
    for (Eigen::Index q = 0; q < s.fit_prediction.rows(); ++q)
      for (Eigen::Index n = 0; n < s.fit_prediction.cols(); ++n) {
        out << id << ",fit_pred.q" << q + 1 << ".n" << n + 1 << ','
            << format_double(s.fit_prediction(q, n)) << '\n';
        out << id << ",fit_sim.q" << q + 1 << ".n" << n + 1 << ','
            << format_double(s.fit_simulation(q, n)) << '\n';
      }
    for (Eigen::Index n = 0; n < s.fleet_fit_prediction.size(); ++n) {
      out << id << ",fleet_fit_pred.n" << n + 1 << ','
          << format_double(s.fleet_fit_prediction(n)) << '\n';
      out << id << ",fleet_fit_sim.n" << n + 1 << ','
          << format_double(s.fleet_fit_simulation(n)) << '\n';
    }
  }
  return out.str();
}

SuiteOutputWriter::SuiteOutputWriter(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  rounds_.open(dir_ / "rounds.jsonl", std::ios::binary | std::ios::trunc);
  if (!rounds_) throw DataError("cannot write " + (dir_ / "rounds.jsonl").string());
}

RepetitionSink SuiteOutputWriter::sink() {
  return [this](int repetition, const Dataset&, const SingleRun& run) {
    for (const RoundLog& log : run.rounds.logs)
      rounds_ << round_log_to_json(repetition, log).dump() << '\n';
    rounds_.flush();

    json flags = json::array();
    for (int f : run.final_model.flags) flags.push_back(f + 1);
    json clusters = json::array();
    for (const Matrix& theta : run.final_model.cluster_params)
      clusters.push_back(theta_to_json(theta));
    clusters_.push_back(json{{"repetition", repetition + 1},
                             {"seed", run.summary.seed},
                             {"k_r", run.final_model.cluster_count()},
                             {"flags", std::move(flags)},
                             {"clusters", std::move(clusters)}});
  };
}

void SuiteOutputWriter::finish(const SuiteResult& suite) {
  write_text_file(dir_ / "summary.json", summary_to_json(suite).dump(2) + "\n");
  write_text_file(dir_ / "summary.csv", summary_to_csv(suite));
  write_text_file(dir_ / "clusters_final.json",
                  json{{"repetitions", clusters_}}.dump(2) + "\n");
}

namespace {

struct LoadedRun {
  std::string label;
  json aggregate;
  json config;
};

std::string run_label(const json& config) {
  std::string label = config.value("method", "?");
  if (label == "ic_sysid") {
    label += "/" + config.value("clustering", "?");
    if (config.value("apply_cm", false)) label += "+cm";
  } else {
    label += "/" + config.value("init", "?");
    label += " k=" + std::to_string(config.value("k_init", 0));
  }
  return label;
}

std::string mean_std_cell(const json& aggregate, const char* mean_key, const char* std_key,
                          int precision = 3) {
  if (!aggregate.contains(mean_key)) return "";
  char buffer[64];
  const double mean = aggregate[mean_key].is_number() ? aggregate[mean_key].get<double>() : NAN;
  const double stddev =
      std_key && aggregate.contains(std_key) && aggregate[std_key].is_number()
          ? aggregate[std_key].get<double>()
          : NAN;
  if (std::isnan(stddev))
    std::snprintf(buffer, sizeof(buffer), "%.*f", precision, mean);
  else
    std::snprintf(buffer, sizeof(buffer), "%.*f ± %.*f", precision, mean, precision, stddev);
  return buffer;
}

std::string indexed_cell(const json& aggregate, const char* mean_key, const char* std_key,
                         std::initializer_list<int> index) {
  if (!aggregate.contains(mean_key)) return "";
  json mean = aggregate[mean_key];
  json stddev = std_key && aggregate.contains(std_key) ? aggregate[std_key] : json();
  for (int i : index) {
    if (!mean.is_array() || i >= static_cast<int>(mean.size())) return "";
    mean = mean[i];
    if (stddev.is_array() && i < static_cast<int>(stddev.size())) stddev = stddev[i];
  }
  if (!mean.is_number()) return "null";
  char buffer[64];
  if (stddev.is_number())
    std::snprintf(buffer, sizeof(buffer), "%.3f ± %.3f", mean.get<double>(),
                  stddev.get<double>());
  else
    std::snprintf(buffer, sizeof(buffer), "%.3f", mean.get<double>());
  return buffer;
}

}  // namespace

std::string render_report(const std::vector<fs::path>& run_dirs, const std::string& format) {
  if (run_dirs.empty()) throw ConfigError("report: at least one run directory is required");

  std::vector<LoadedRun> runs;
  for (const fs::path& dir : run_dirs) {
    json summary;
    try {
      summary = json::parse(read_text_file(dir / "summary.json"));
    } catch (const json::parse_error& e) {
      throw DataError((dir / "summary.json").string() + ": " + e.what());
    }
    LoadedRun run;
    run.config = summary.value("config", json::object());
    run.aggregate = summary.value("aggregate", json::object());
    run.label = run_label(run.config);
    runs.push_back(std::move(run));
  }

  if (format == "json") {
    json out = json::array();
    for (const LoadedRun& run : runs)
      out.push_back(json{{"label", run.label}, {"config", run.config}, {"aggregate", run.aggregate}});
    return out.dump(2) + "\n";
  }

  // Shared row set across runs: cluster/state fits first, then the scalars.
  int q_max = 0, n_max = 0;
  for (const LoadedRun& run : runs) {
    if (run.aggregate.contains("fit_prediction_mean")) {
      const json& m = run.aggregate["fit_prediction_mean"];
      q_max = std::max(q_max, static_cast<int>(m.size()));
      if (!m.empty()) n_max = std::max(n_max, static_cast<int>(m[0].size()));
    }
  }

  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  auto add_row = [&](const std::string& name, auto cell_of) {
    std::vector<std::string> cells;
    for (const LoadedRun& run : runs) cells.push_back(cell_of(run));
    rows.emplace_back(name, std::move(cells));
  };

  for (int q = 0; q < q_max; ++q)
    for (int n = 0; n < n_max; ++n) {
      const std::string suffix = "q" + std::to_string(q + 1) + ".n" + std::to_string(n + 1);
      add_row("fit_pred." + suffix, [&](const LoadedRun& run) {
        return indexed_cell(run.aggregate, "fit_prediction_mean", "fit_prediction_std", {q, n});
      });
    }
  for (int q = 0; q < q_max; ++q)
    for (int n = 0; n < n_max; ++n) {
      const std::string suffix = "q" + std::to_string(q + 1) + ".n" + std::to_string(n + 1);
      add_row("fit_sim." + suffix, [&](const LoadedRun& run) {
        return indexed_cell(run.aggregate, "fit_simulation_mean", "fit_simulation_std", {q, n});
      });
    }
  for (int q = 0; q < q_max; ++q) {
    add_row("param_error.q" + std::to_string(q + 1), [&](const LoadedRun& run) {
      return indexed_cell(run.aggregate, "param_error_mean", "param_error_std", {q});
    });
  }
  add_row("rounds", [&](const LoadedRun& run) {
    return mean_std_cell(run.aggregate, "rounds_mean", "rounds_std", 1);
  });
  add_row("k_r", [&](const LoadedRun& run) {
    return mean_std_cell(run.aggregate, "k_r_mean", "k_r_std", 1);
  });
  add_row("k_r_modal", [&](const LoadedRun& run) {
    return mean_std_cell(run.aggregate, "k_r_modal", nullptr, 0);
  });
  add_row("mw_pct", [&](const LoadedRun& run) {
    return mean_std_cell(run.aggregate, "mw_pct_mean", "mw_pct_std", 1);
  });
  add_row("uc_pct", [&](const LoadedRun& run) {
    return mean_std_cell(run.aggregate, "uc_pct", nullptr, 1);
  });
  add_row("failures", [&](const LoadedRun& run) {
    return mean_std_cell(run.aggregate, "failures", nullptr, 0);
  });

  std::ostringstream out;
  if (format == "md") {
    out << "| metric |";
    for (const LoadedRun& run : runs) out << ' ' << run.label << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < runs.size(); ++i) out << "---|";
    out << '\n';
    for (const auto& [name, cells] : rows) {
      out << "| " << name << " |";
      for (const std::string& cell : cells) out << ' ' << (cell.empty() ? "-" : cell) << " |";
      out << '\n';
    }
  } else if (format == "csv") {
    out << "metric";
    for (const LoadedRun& run : runs) out << ',' << run.label;
    out << '\n';
    for (const auto& [name, cells] : rows) {
      out << name;
      for (const std::string& cell : cells) out << ',' << '"' << cell << '"';
      out << '\n';
    }
  } else {
    throw ConfigError("report: unknown format '" + format + "' (use csv, json or md)");
  }
  return out.str();
}

}  // namespace icsysid
