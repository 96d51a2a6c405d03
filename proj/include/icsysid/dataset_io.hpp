#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "icsysid/datagen.hpp"
#include "json.hpp"

namespace icsysid {

// Matrices serialize as row-major arrays of arrays; doubles keep full
// round-trip precision (17 significant digits).
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& where);

nlohmann::json dataset_spec_to_json(const DatasetSpec& spec);
// Strict parse: unknown keys are rejected.
DatasetSpec dataset_spec_from_json(const nlohmann::json& j, const std::string& where);

// Directory layout: manifest.json plus one CSV per rollout under
// worker_<id>/ subdirectories. Worker ids and labels are 1-based on disk.
void export_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset import_dataset(const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// FNV-1a over the full dataset content (spec, ground truth, every sample),
// identical for built and re-imported datasets.
std::uint64_t dataset_fingerprint(const Dataset& dataset);

std::string format_double(double value);  // %.17g

}  // namespace icsysid
