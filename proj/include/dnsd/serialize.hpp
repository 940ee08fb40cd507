#pragma once

// JSON forms of model and training configs, and versioned model checkpoints.
//
// A checkpoint is one JSON document: format tag, version, the model config and
// every named parameter as shape + row-major values. Doubles are written in
// shortest round-trip form, so a loaded model reproduces logits bit for bit.

#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "dnsd/model.hpp"
#include "dnsd/training.hpp"

namespace dnsd {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys and wrong types throw ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

std::string checkpoint_to_string(const Model& model);
/// Throws CheckpointError on format, version, name or shape mismatches.
Model checkpoint_from_string(const std::string& text);

/// Atomic write (temporary file + rename).
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace dnsd
