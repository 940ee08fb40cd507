#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dnsd/serialize.hpp"
#include "fixtures.hpp"

using namespace dnsd;
using testing::random_graph;
using testing::random_tensor;

namespace {

std::filesystem::path scratch_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / ("dnsd_test_" + std::string(name));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("model config survives a JSON round trip") {
  ModelConfig c;
  c.family = ModelFamily::nsd;
  c.map = MapKind::orthogonal;
  c.flags = {true, false, true};
  c.hidden = 12;
  c.stalk_dim = 4;
  c.layers = 7;
  c.seed = 123456789012345ULL;
  CHECK(model_config_from_json(to_json(c)) == c);

  TrainConfig t;
  t.lr = 0.003;
  t.max_epochs = 321;
  t.weight_decay = 0.0;
  CHECK(train_config_from_json(to_json(t)) == t);
}

TEST_CASE("config parsing rejects unknown keys and wrong types") {
  CHECK_THROWS_AS(model_config_from_json(nlohmann::json{{"layrs", 3}}), ConfigError);
  CHECK_THROWS_AS(model_config_from_json(nlohmann::json{{"layers", "three"}}), ConfigError);
  CHECK_THROWS_AS(model_config_from_json(nlohmann::json{{"family", "gcn"}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json::array()), ConfigError);
  CHECK(model_config_from_json(nlohmann::json::object()) == ModelConfig{});
}

TEST_CASE("checkpoint round trip reproduces logits bit for bit") {
  SplitMix64 rng(5);
  const Graph g = random_graph(20, 0.2, rng);
  const MessageIndex index = MessageIndex::from_graph(g);
  const Tensor features = random_tensor({20, 2}, rng);
  const auto dir = scratch_dir("checkpoint");

  for (ModelFamily fam : {ModelFamily::mlp, ModelFamily::nsd, ModelFamily::dnsd}) {
    for (MapKind kind : {MapKind::diagonal, MapKind::full, MapKind::orthogonal}) {
      ModelConfig cfg;
      cfg.family = fam;
      cfg.map = kind;
      cfg.flags = {true, true, true};
      cfg.layers = 3;
      cfg.seed = 77;
      Model model(cfg);
      for (auto& p : model.parameters())
        for (double& v : p.value.values()) v += 0.1 * rng.normal();

      const auto path = dir / "model.json";
      save_checkpoint(model, path);
      Model loaded = load_checkpoint(path);
      CHECK(loaded.config() == cfg);
      const Tensor a = model.logits(features, index);
      const Tensor b = loaded.logits(features, index);
      REQUIRE(a.size() == b.size());
      bool identical = true;
      for (std::size_t i = 0; i < a.size(); ++i) identical &= a.data()[i] == b.data()[i];
      CHECK(identical);
    }
  }
}

TEST_CASE("corrupt checkpoints are rejected with a reason") {
  ModelConfig cfg;
  cfg.layers = 2;
  const Model model(cfg);
  const std::string good = checkpoint_to_string(model);

  CHECK_THROWS_AS(checkpoint_from_string("{not json"), CheckpointError);

  auto j = nlohmann::json::parse(good);
  j["version"] = kCheckpointFormatVersion + 1;
  CHECK_THROWS_WITH_AS(checkpoint_from_string(j.dump()), doctest::Contains("unsupported version"),
                       CheckpointError);

  j = nlohmann::json::parse(good);
  j["parameters"][0]["shape"] = {1, 1};
  CHECK_THROWS_WITH_AS(checkpoint_from_string(j.dump()), doctest::Contains("has shape"),
                       CheckpointError);

  j = nlohmann::json::parse(good);
  j["parameters"][0]["name"] = "nonexistent";
  CHECK_THROWS_WITH_AS(checkpoint_from_string(j.dump()), doctest::Contains("unknown parameter"),
                       CheckpointError);

  j = nlohmann::json::parse(good);
  j["config"]["layers"] = 5;
  CHECK_THROWS_AS(checkpoint_from_string(j.dump()), CheckpointError);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/model.json"), CheckpointError);
}
