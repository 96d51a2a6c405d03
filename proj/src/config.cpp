#include <string>

#include "icsysid/dataset_io.hpp"
#include "icsysid/errors.hpp"
#include "icsysid/orchestrator.hpp"

namespace icsysid {

using nlohmann::json;

namespace {

template <typename T>
T parse_enum(const json& value, const char* key,
             std::initializer_list<std::pair<const char*, T>> table) {
  if (!value.is_string()) throw ConfigError(std::string(key) + ": expected a string");
  const std::string text = value.get<std::string>();
  for (const auto& [name, result] : table)
    if (text == name) return result;
  throw ConfigError(std::string(key) + ": unknown value '" + text + "'");
}

const char* enum_name(Method m) { return m == Method::c_sysid ? "c_sysid" : "ic_sysid"; }

const char* enum_name(ClusteringMode c) {
  switch (c) {
    case ClusteringMode::none: return "none";
    case ClusteringMode::cc: return "cc";
    default: return "ecc";
  }
}

const char* enum_name(InitMode i) {
  switch (i) {
    case InitMode::glorot: return "glorot";
    case InitMode::glorot_scaled: return "glorot_scaled";
    default: return "warm";
  }
}

void parse_thresholds(const json& j, CcThresholds& out) {
  if (!j.is_object()) throw ConfigError("thresholds: expected an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "eps_delta")
      out.eps_delta = value.get<double>();
    else if (key == "eps_p")
      out.eps_p = value.get<double>();
    else if (key == "eps_s")
      out.eps_s = value.get<double>();
    else if (key == "eps_theta")
      out.eps_theta = value.get<double>();
    else
      throw ConfigError("thresholds: unknown key '" + key + "'");
  }
}

void parse_train(const json& j, TrainConfig& out) {
  if (!j.is_object()) throw ConfigError("train: expected an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "alpha")
      out.alpha = value.get<double>();
    else if (key == "mbs")
      out.mbs = value.get<int>();
    else if (key == "mu")
      out.mu = value.get<double>();
    else if (key == "beta1")
      out.beta1 = value.get<double>();
    else if (key == "beta2")
      out.beta2 = value.get<double>();
    else if (key == "epochs_per_round")
      out.epochs_per_round = value.get<int>();
    else if (key == "eps_l")
      out.eps_l = value.get<double>();
    else if (key == "adam_bias_correction")
      out.bias_correction =
          parse_enum(value, "train.adam_bias_correction",
                     {std::pair{"paper", AdamBiasCorrection::paper},
                      std::pair{"powered", AdamBiasCorrection::powered}});
    else if (key == "adam_state")
      out.state_policy = parse_enum(value, "train.adam_state",
                                    {std::pair{"reset", AdamStatePolicy::reset},
                                     std::pair{"persist", AdamStatePolicy::persist}});
    else
      throw ConfigError("train: unknown key '" + key + "'");
  }
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  if (!j.contains("method")) throw ConfigError("config: 'method' is required");

  RunConfig config;
  for (const auto& [key, value] : j.items()) {
    if (key == "method")
      config.method = parse_enum(value, "method",
                                 {std::pair{"c_sysid", Method::c_sysid},
                                  std::pair{"ic_sysid", Method::ic_sysid}});
    else if (key == "clustering")
      config.clustering = parse_enum(value, "clustering",
                                     {std::pair{"none", ClusteringMode::none},
                                      std::pair{"cc", ClusteringMode::cc},
                                      std::pair{"ecc", ClusteringMode::ecc}});
    else if (key == "apply_cm")
      config.apply_cm = value.get<bool>();
    else if (key == "k_init")
      config.k_init = value.get<int>();
    else if (key == "init")
      config.init = parse_enum(value, "init",
                               {std::pair{"glorot", InitMode::glorot},
                                std::pair{"glorot_scaled", InitMode::glorot_scaled},
                                std::pair{"warm", InitMode::warm}});
    else if (key == "warm_eta")
      config.warm_eta = value.get<double>();
    else if (key == "r_max")
      config.r_max = value.get<int>();
    else if (key == "repetitions")
      config.repetitions = value.get<int>();
    else if (key == "thresholds")
      parse_thresholds(value, config.thresholds);
    else if (key == "train")
      parse_train(value, config.train);
    else if (key == "dataset")
      config.dataset = dataset_spec_from_json(value, "config.dataset");
    else if (key == "dataset_path")
      config.dataset_path = value.get<std::string>();
    else if (key == "master_seed")
      config.master_seed = value.get<std::uint64_t>();
    else if (key == "norm2")
      config.norm2 = parse_enum(value, "norm2",
                                {std::pair{"spectral", MatrixNorm2::spectral},
                                 std::pair{"frobenius", MatrixNorm2::frobenius}});
    else if (key == "norm1")
      config.norm1 = parse_enum(value, "norm1",
                                {std::pair{"entrywise", MatrixNorm1::entrywise},
                                 std::pair{"induced", MatrixNorm1::induced}});
    else
      throw ConfigError("config: unknown key '" + key + "'");
  }
  config.validate();
  return config;
}

nlohmann::json run_config_to_json(const RunConfig& config) {
  json j{{"method", enum_name(config.method)},
         {"clustering", enum_name(config.clustering)},
         {"apply_cm", config.apply_cm},
         {"k_init", config.k_init},
         {"init", enum_name(config.init)},
         {"warm_eta", config.warm_eta},
         {"r_max", config.r_max},
         {"repetitions", config.repetitions},
         {"master_seed", config.master_seed},
         {"norm2", config.norm2 == MatrixNorm2::spectral ? "spectral" : "frobenius"},
         {"norm1", config.norm1 == MatrixNorm1::entrywise ? "entrywise" : "induced"},
         {"thresholds",
          json{{"eps_delta", config.thresholds.eps_delta},
               {"eps_p", config.thresholds.eps_p},
               {"eps_s", config.thresholds.eps_s},
               {"eps_theta", config.thresholds.eps_theta}}},
         {"train",
          json{{"alpha", config.train.alpha},
               {"mbs", config.train.mbs},
               {"mu", config.train.mu},
               {"beta1", config.train.beta1},
               {"beta2", config.train.beta2},
               {"epochs_per_round", config.train.epochs_per_round},
               {"eps_l", config.train.eps_l},
               {"adam_bias_correction",
                config.train.bias_correction == AdamBiasCorrection::paper ? "paper" : "powered"},
               {"adam_state",
                config.train.state_policy == AdamStatePolicy::reset ? "reset" : "persist"}}}};
  if (config.dataset) j["dataset"] = dataset_spec_to_json(*config.dataset);
  if (config.dataset_path) j["dataset_path"] = *config.dataset_path;
  return j;
}

void RunConfig::validate() const {
  thresholds.validate();
  train.validate();
  if (r_max < 1) throw ConfigError("config: r_max must be >= 1");
  if (repetitions < 1) throw ConfigError("config: repetitions must be >= 1");
  if (!(warm_eta > 0) || !(warm_eta < 0.5))
    throw ConfigError("config: warm_eta must lie in (0, 1/2)");
  if (dataset.has_value() == dataset_path.has_value())
    throw ConfigError("config: exactly one of 'dataset' and 'dataset_path' is required");
  if (dataset) dataset->validate();

  if (method == Method::ic_sysid) {
    if (k_init != 1)
      throw ConfigError("config: the incremental method starts from a single cluster (k_init = 1)");
    if (init != InitMode::glorot_scaled)
      throw ConfigError("config: the incremental method prescribes init = glorot_scaled");
  } else {
    if (clustering != ClusteringMode::none)
      throw ConfigError("config: the baseline method has no clustering step; use clustering = none");
    if (k_init < 1) throw ConfigError("config: k_init must be >= 1");
  }
}

}  // namespace icsysid
