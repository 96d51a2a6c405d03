#include "icsysid/dataset_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "icsysid/errors.hpp"

namespace icsysid {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty())
    throw DataError(where + ": expected a non-empty array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != cols)
      throw DataError(where + ": ragged matrix rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw DataError(where + ": non-numeric matrix entry");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

nlohmann::json dataset_spec_to_json(const DatasetSpec& spec) {
  json j{{"gt_cluster_count", spec.gt_cluster_count},
         {"cluster_sizes", spec.cluster_sizes},
         {"rollouts_per_worker", spec.rollouts_per_worker},
         {"steps", spec.steps},
         {"sigma_x", spec.sigma_x},
         {"sigma_u", spec.sigma_u},
         {"sigma_w", spec.sigma_w},
         {"master_seed", spec.master_seed},
         {"cc_fraction", spec.cc_fraction}};
  if (spec.custom_ground_truth) {
    json gt = json::array();
    for (const LtiParams& p : *spec.custom_ground_truth)
      gt.push_back(json{{"a", matrix_to_json(p.a)}, {"b", matrix_to_json(p.b)}});
    j["ground_truth"] = std::move(gt);
  }
  return j;
}

DatasetSpec dataset_spec_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": dataset spec must be a JSON object");
  DatasetSpec spec;
  for (const auto& [key, value] : j.items()) {
    if (key == "gt_cluster_count") {
      spec.gt_cluster_count = value.get<int>();
    } else if (key == "cluster_sizes") {
      spec.cluster_sizes = value.get<std::vector<int>>();
    } else if (key == "rollouts_per_worker") {
      spec.rollouts_per_worker = value.get<int>();
    } else if (key == "steps") {
      spec.steps = value.get<int>();
    } else if (key == "sigma_x") {
      spec.sigma_x = value.get<double>();
    } else if (key == "sigma_u") {
      spec.sigma_u = value.get<double>();
    } else if (key == "sigma_w") {
      spec.sigma_w = value.get<double>();
    } else if (key == "master_seed") {
      spec.master_seed = value.get<std::uint64_t>();
    } else if (key == "cc_fraction") {
      spec.cc_fraction = value.get<double>();
    } else if (key == "ground_truth") {
      std::vector<LtiParams> gt;
      for (std::size_t q = 0; q < value.size(); ++q) {
        const json& entry = value[q];
        if (!entry.is_object() || !entry.contains("a") || !entry.contains("b"))
          throw ConfigError(where + ": ground_truth entries need 'a' and 'b'");
        gt.emplace_back(matrix_from_json(entry["a"], where + ".ground_truth.a"),
                        matrix_from_json(entry["b"], where + ".ground_truth.b"));
      }
      spec.custom_ground_truth = std::move(gt);
    } else {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

namespace {

void write_matrix_block(std::ostringstream& out, const char* name, const Matrix& m) {
  out << name << ',' << m.rows() << ',' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

Matrix read_matrix_block(std::istream& in, const char* name, const fs::path& file) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(file.string() + ": missing '" + name + "' block");
  std::istringstream header(line);
  std::string label, rows_text, cols_text;
  if (!std::getline(header, label, ',') || !std::getline(header, rows_text, ',') ||
      !std::getline(header, cols_text) || label != name)
    throw DataError(file.string() + ": malformed '" + std::string(name) + "' header");

  const long rows = std::strtol(rows_text.c_str(), nullptr, 10);
  const long cols = std::strtol(cols_text.c_str(), nullptr, 10);
  if (rows < 1 || cols < 1) throw DataError(file.string() + ": bad matrix shape");

  Matrix m(rows, cols);
  for (long r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw DataError(file.string() + ": truncated matrix block");
    const char* cursor = line.c_str();
    for (long c = 0; c < cols; ++c) {
      char* end = nullptr;
      m(r, c) = std::strtod(cursor, &end);
      if (end == cursor) throw DataError(file.string() + ": non-numeric cell");
      cursor = end;
      if (c + 1 < cols) {
        if (*cursor != ',') throw DataError(file.string() + ": expected ',' between cells");
        ++cursor;
      }
    }
    if (*cursor != '\0') throw DataError(file.string() + ": trailing characters in row");
  }
  return m;
}

std::string rollout_to_csv(const Rollout& rollout) {
  std::ostringstream out;
  write_matrix_block(out, "states", rollout.states);
  write_matrix_block(out, "inputs", rollout.inputs);
  return out.str();
}

Rollout rollout_from_csv(const fs::path& file) {
  std::istringstream in(read_text_file(file));
  Matrix states = read_matrix_block(in, "states", file);
  Matrix inputs = read_matrix_block(in, "inputs", file);
  try {
    return Rollout(std::move(states), std::move(inputs));
  } catch (const std::invalid_argument& e) {
    throw DataError(file.string() + ": " + e.what());
  }
}

std::string worker_dir_name(int worker_id_1based) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "worker_%04d", worker_id_1based);
  return buffer;
}

std::string rollout_file_name(const char* part, int index) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%s_%03d.csv", part, index);
  return buffer;
}

}  // namespace

void export_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);

  json manifest;
  manifest["format"] = "icsysid-dataset-v1";
  manifest["spec"] = dataset_spec_to_json(dataset.spec);

  json gt = json::array();
  for (const GroundTruthCluster& cluster : dataset.ground_truth) {
    json workers = json::array();
    for (int id : cluster.member_worker_ids) workers.push_back(id + 1);
    gt.push_back(json{{"label", cluster.label},
                      {"a", matrix_to_json(cluster.params.a)},
                      {"b", matrix_to_json(cluster.params.b)},
                      {"workers", std::move(workers)}});
  }
  manifest["ground_truth"] = std::move(gt);

  json workers = json::array();
  for (const WorkerDataset& w : dataset.workers) {
    const std::string subdir = worker_dir_name(w.worker_id + 1);
    fs::create_directories(dir / subdir);

    json train_files = json::array();
    for (std::size_t r = 0; r < w.train_rollouts.size(); ++r) {
      const std::string rel = subdir + "/" + rollout_file_name("train", static_cast<int>(r));
      write_text_file(dir / rel, rollout_to_csv(w.train_rollouts[r]));
      train_files.push_back(rel);
    }
    json cc_files = json::array();
    for (std::size_t r = 0; r < w.cc_rollouts.size(); ++r) {
      const std::string rel = subdir + "/" + rollout_file_name("cc", static_cast<int>(r));
      write_text_file(dir / rel, rollout_to_csv(w.cc_rollouts[r]));
      cc_files.push_back(rel);
    }
    workers.push_back(json{{"id", w.worker_id + 1},
                           {"gt_label", w.gt_label},
                           {"train", std::move(train_files)},
                           {"cc", std::move(cc_files)}});
  }
  manifest["workers"] = std::move(workers);

  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset import_dataset(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text_file(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  }
  if (!manifest.is_object() || manifest.value("format", "") != "icsysid-dataset-v1")
    throw DataError("manifest.json: unsupported or missing format tag");

  Dataset ds;
  ds.spec = dataset_spec_from_json(manifest.at("spec"), "manifest.spec");

  for (const json& entry : manifest.at("ground_truth")) {
    GroundTruthCluster cluster;
    cluster.label = entry.at("label").get<int>();
    cluster.params = LtiParams(matrix_from_json(entry.at("a"), "manifest ground_truth.a"),
                               matrix_from_json(entry.at("b"), "manifest ground_truth.b"));
    for (const json& id : entry.at("workers")) cluster.member_worker_ids.push_back(id.get<int>() - 1);
    ds.ground_truth.push_back(std::move(cluster));
  }
  if (static_cast<int>(ds.ground_truth.size()) != ds.spec.gt_cluster_count)
    throw DataError("manifest.json: ground_truth count disagrees with spec");

  const int total = ds.spec.worker_count();
  const json& workers = manifest.at("workers");
  if (static_cast<int>(workers.size()) != total)
    throw DataError("manifest.json: worker count disagrees with spec");

  ds.workers.resize(total);
  for (const json& entry : workers) {
    const int id = entry.at("id").get<int>() - 1;
    if (id < 0 || id >= total) throw DataError("manifest.json: worker id out of range");
    WorkerDataset& w = ds.workers[id];
    w.worker_id = id;
    w.gt_label = entry.at("gt_label").get<int>();
    if (w.gt_label < 1 || w.gt_label > ds.spec.gt_cluster_count)
      throw DataError("manifest.json: gt_label out of range");
    for (const json& rel : entry.at("train"))
      w.train_rollouts.push_back(rollout_from_csv(dir / rel.get<std::string>()));
    for (const json& rel : entry.at("cc"))
      w.cc_rollouts.push_back(rollout_from_csv(dir / rel.get<std::string>()));

    const int count = static_cast<int>(w.train_rollouts.size() + w.cc_rollouts.size());
    if (count != ds.spec.rollouts_per_worker)
      throw DataError("manifest.json: rollout count disagrees with spec for worker " +
                      std::to_string(id + 1));
    if (w.train_rollouts.empty())
      throw DataError("manifest.json: worker " + std::to_string(id + 1) + " has no train rollouts");
    for (const Rollout& r : w.train_rollouts)
      if (r.steps() != ds.spec.steps) throw DataError("manifest.json: rollout horizon mismatch");
    for (const Rollout& r : w.cc_rollouts)
      if (r.steps() != ds.spec.steps) throw DataError("manifest.json: rollout horizon mismatch");
  }
  return ds;
}

namespace {

struct Fnv1a {
  std::uint64_t hash = 0xcbf29ce484222325ull;

  void bytes(const void* data, std::size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      hash ^= p[i];
      hash *= 0x100000001b3ull;
    }
  }
  void value(double d) { bytes(&d, sizeof(d)); }
  void value(int i) { bytes(&i, sizeof(i)); }
  void matrix(const Matrix& m) {
    value(static_cast<int>(m.rows()));
    value(static_cast<int>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) value(m(r, c));
  }
};

}  // namespace

std::uint64_t dataset_fingerprint(const Dataset& dataset) {
  Fnv1a h;
  const std::string spec_text = dataset_spec_to_json(dataset.spec).dump();
  h.bytes(spec_text.data(), spec_text.size());
  for (const GroundTruthCluster& cluster : dataset.ground_truth) {
    h.value(cluster.label);
    h.matrix(cluster.params.a);
    h.matrix(cluster.params.b);
  }
  for (const WorkerDataset& w : dataset.workers) {
    h.value(w.worker_id);
    h.value(w.gt_label);
    for (const Rollout& r : w.train_rollouts) {
      h.matrix(r.states);
      h.matrix(r.inputs);
    }
    for (const Rollout& r : w.cc_rollouts) {
      h.matrix(r.states);
      h.matrix(r.inputs);
    }
  }
  return h.hash;
}

}  // namespace icsysid
