#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "clinsynth/errors.hpp"
#include "clinsynth/io.hpp"

// Exported configuration for an external neural trainer. Pretraining itself
// happens outside this tool; these files carry the fixed hyperparameters a
// downstream run must use, plus a reference to the corpus manifest it
// should train on.

namespace clinsynth {

enum class TrainerKind { causal, masked };

inline const char* to_string(TrainerKind k) {
  return k == TrainerKind::causal ? "causal" : "masked";
}

inline TrainerKind trainer_kind_from_string(std::string_view s) {
  if (s == "causal") return TrainerKind::causal;
  if (s == "masked") return TrainerKind::masked;
  throw ConfigError("unknown trainer kind '" + std::string(s) +
                    "' (expected causal or masked)");
}

struct TrainerConfig {
  TrainerKind kind = TrainerKind::causal;
  int batch_sequences = 512;
  int sequence_length = 128;
  int epochs = 5;
  double learning_rate = 5e-5;
  double warmup_fraction = 0.10;
  std::optional<double> mlm_probability;  // masked kind only
  std::string corpus_manifest;

  bool operator==(const TrainerConfig&) const = default;
};

inline TrainerConfig make_trainer_config(TrainerKind kind,
                                         std::string corpus_manifest) {
  TrainerConfig c;
  c.kind = kind;
  if (kind == TrainerKind::masked) c.mlm_probability = 0.15;
  c.corpus_manifest = std::move(corpus_manifest);
  return c;
}

inline nlohmann::json trainer_config_to_json(const TrainerConfig& c) {
  nlohmann::json j;
  j["kind"] = to_string(c.kind);
  j["batch_sequences"] = c.batch_sequences;
  j["sequence_length"] = c.sequence_length;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["warmup_fraction"] = c.warmup_fraction;
  if (c.mlm_probability) j["mlm_probability"] = *c.mlm_probability;
  j["corpus_manifest"] = c.corpus_manifest;
  return j;
}

inline TrainerConfig trainer_config_from_json(const nlohmann::json& j) {
  TrainerConfig c;
  c.kind = trainer_kind_from_string(j.at("kind").get<std::string>());
  c.batch_sequences = j.at("batch_sequences").get<int>();
  c.sequence_length = j.at("sequence_length").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.warmup_fraction = j.at("warmup_fraction").get<double>();
  if (j.contains("mlm_probability")) {
    c.mlm_probability = j.at("mlm_probability").get<double>();
  }
  c.corpus_manifest = j.at("corpus_manifest").get<std::string>();
  return c;
}

inline void export_trainer_config(TrainerKind kind,
                                  const std::string& corpus_manifest,
                                  const fs::path& out_path) {
  atomic_write_file(out_path,
                    trainer_config_to_json(
                        make_trainer_config(kind, corpus_manifest)).dump(2) +
                        "\n");
}

inline TrainerConfig read_trainer_config(const fs::path& path) {
  const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) {
    throw DataError("trainer config: " + path.string() + " is not valid JSON");
  }
  try {
    return trainer_config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("trainer config: " + path.string() + ": " + e.what());
  }
}

}  // namespace clinsynth
