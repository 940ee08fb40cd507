#include "dnsd/serialize.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace dnsd {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
  }
}

template <class T>
void read_field(const json& j, const char* key, T& out, const char* what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(what) + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

json to_json(const ModelConfig& c) {
  return {{"family", to_string(c.family)},
          {"map", to_string(c.map)},
          {"adj", c.flags.adj},
          {"odd", c.flags.odd},
          {"gate", c.flags.gate},
          {"input_dim", c.input_dim},
          {"num_classes", c.num_classes},
          {"hidden", c.hidden},
          {"stalk_dim", c.stalk_dim},
          {"layers", c.layers},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  static const std::set<std::string> known{"family", "map",   "adj",       "odd",    "gate", "input_dim",
                                           "num_classes", "hidden", "stalk_dim", "layers", "seed"};
  const char* what = "model config";
  reject_unknown(j, known, what);
  ModelConfig c;
  std::string family = to_string(c.family), map = to_string(c.map);
  read_field(j, "family", family, what);
  read_field(j, "map", map, what);
  c.family = parse_family(family);
  c.map = parse_map_kind(map);
  read_field(j, "adj", c.flags.adj, what);
  read_field(j, "odd", c.flags.odd, what);
  read_field(j, "gate", c.flags.gate, what);
  read_field(j, "input_dim", c.input_dim, what);
  read_field(j, "num_classes", c.num_classes, what);
  read_field(j, "hidden", c.hidden, what);
  read_field(j, "stalk_dim", c.stalk_dim, what);
  read_field(j, "layers", c.layers, what);
  read_field(j, "seed", c.seed, what);
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"max_epochs", c.max_epochs},
          {"plateau_factor", c.plateau_factor},
          {"plateau_patience", c.plateau_patience},
          {"early_stop_patience", c.early_stop_patience},
          {"min_lr", c.min_lr},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps}};
}

TrainConfig train_config_from_json(const json& j) {
  static const std::set<std::string> known{"lr",     "weight_decay", "max_epochs", "plateau_factor",
                                           "plateau_patience", "early_stop_patience", "min_lr",
                                           "beta1",  "beta2",        "adam_eps"};
  const char* what = "train config";
  reject_unknown(j, known, what);
  TrainConfig c;
  read_field(j, "lr", c.lr, what);
  read_field(j, "weight_decay", c.weight_decay, what);
  read_field(j, "max_epochs", c.max_epochs, what);
  read_field(j, "plateau_factor", c.plateau_factor, what);
  read_field(j, "plateau_patience", c.plateau_patience, what);
  read_field(j, "early_stop_patience", c.early_stop_patience, what);
  read_field(j, "min_lr", c.min_lr, what);
  read_field(j, "beta1", c.beta1, what);
  read_field(j, "beta2", c.beta2, what);
  read_field(j, "adam_eps", c.adam_eps, what);
  return c;
}

std::string checkpoint_to_string(const Model& model) {
  json params = json::array();
  for (const auto& p : model.parameters()) {
    params.push_back({{"name", p.name},
                      {"shape", p.value.shape()},
                      {"values", std::vector<double>(p.value.values().begin(), p.value.values().end())}});
  }
  const json j = {{"format", "dnsd-checkpoint"},
                  {"version", kCheckpointFormatVersion},
                  {"config", to_json(model.config())},
                  {"parameters", params}};
  return j.dump(1);
}

Model checkpoint_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint: not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "dnsd-checkpoint") {
    throw CheckpointError("checkpoint: missing or wrong format tag");
  }
  if (j.value("version", -1) != kCheckpointFormatVersion) {
    throw CheckpointError("checkpoint: unsupported version " + j.value("version", json()).dump() +
                          " (expected " + std::to_string(kCheckpointFormatVersion) + ")");
  }
  if (!j.contains("config") || !j.contains("parameters") || !j["parameters"].is_array()) {
    throw CheckpointError("checkpoint: config and parameters are required");
  }
  Model model(model_config_from_json(j["config"]));
  const json& params = j["parameters"];
  if (params.size() != model.parameters().size()) {
    throw CheckpointError("checkpoint: expected " + std::to_string(model.parameters().size()) +
                          " parameters, found " + std::to_string(params.size()));
  }
  for (const json& entry : params) {
    try {
      const std::string name = entry.at("name").get<std::string>();
      ad::Parameter* target = nullptr;
      try {
        target = &model.parameter(name);
      } catch (const std::exception&) {
        throw CheckpointError("checkpoint: unknown parameter '" + name + "'");
      }
      const Shape shape = entry.at("shape").get<Shape>();
      if (shape != target->value.shape()) {
        throw CheckpointError("checkpoint: parameter '" + name + "' has shape " + to_string(shape) +
                              ", model expects " + to_string(target->value.shape()));
      }
      const auto values = entry.at("values").get<std::vector<double>>();
      if (values.size() != target->value.size()) {
        throw CheckpointError("checkpoint: parameter '" + name + "' has " +
                              std::to_string(values.size()) + " values");
      }
      std::copy(values.begin(), values.end(), target->value.values().begin());
    } catch (const json::exception& e) {
      throw CheckpointError(std::string("checkpoint: malformed parameter entry: ") + e.what());
    }
  }
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(path.string() + ": cannot open for writing");
    out << checkpoint_to_string(model);
    if (!out) throw CheckpointError(path.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return checkpoint_from_string(ss.str());
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace dnsd
