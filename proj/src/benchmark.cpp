#include "dnsd/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "dnsd/rng.hpp"
#include "json.hpp"

namespace dnsd {
namespace {

using json = nlohmann::json;

enum StreamTag : std::uint64_t { kFeatures = 1, kSelect = 2, kEndpoint = 3, kSplit = 4, kStratify = 5 };
constexpr int kMaxRewireAttempts = 1000;
constexpr double kTrainFraction = 0.8;

std::uint64_t edge_key(Edge e) { return (std::uint64_t(e.first) << 32) | e.second; }

std::vector<SplitRole> train_val_split(std::size_t n, std::uint64_t seed) {
  std::vector<std::uint32_t> perm(n);
  for (std::uint32_t i = 0; i < n; ++i) perm[i] = i;
  SplitMix64 rng(derive_seed(seed, kSplit));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  const auto n_train = static_cast<std::size_t>(std::llround(kTrainFraction * double(n)));
  std::vector<SplitRole> split(n, SplitRole::val);
  for (std::size_t i = 0; i < n_train; ++i) split[perm[i]] = SplitRole::train;
  return split;
}

json config_json(const SyntheticConfig& c) {
  json centers = json::array();
  for (auto [x, y] : c.centers) centers.push_back({x, y});
  return {{"communities", c.communities}, {"nodes_per_community", c.nodes_per_community},
          {"feature_dim", c.feature_dim},  {"sigma", c.sigma},
          {"centers", centers},            {"k", c.k},
          {"level", c.level},              {"seed", c.seed}};
}

SyntheticConfig config_from_json(const json& j) {
  SyntheticConfig c;
  c.communities = j.at("communities").get<std::size_t>();
  c.nodes_per_community = j.at("nodes_per_community").get<std::size_t>();
  c.feature_dim = j.at("feature_dim").get<std::size_t>();
  c.sigma = j.at("sigma").get<double>();
  c.centers.clear();
  for (const auto& p : j.at("centers")) c.centers.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  c.k = j.at("k").get<std::size_t>();
  c.level = j.at("level").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DatasetError(what + ": line " + std::to_string(line_of(text, e.byte)) +
                       ": malformed JSON (" + e.what() + ")");
  }
}

[[noreturn]] void field_error(const std::string& field, const std::string& msg) {
  throw DatasetError("field '" + field + "': " + msg);
}

const json& require(const json& obj, const char* key) {
  if (!obj.contains(key)) field_error(key, "missing");
  return obj.at(key);
}

std::vector<SplitRole> split_from_json(const json& j, std::size_t n) {
  if (!j.is_object()) field_error("split", "expected an object of node-id lists");
  std::vector<SplitRole> split(n, SplitRole::test);
  std::vector<std::uint8_t> seen(n, 0);
  const std::pair<const char*, SplitRole> roles[] = {
      {"train", SplitRole::train}, {"val", SplitRole::val}, {"test", SplitRole::test}};
  for (auto [key, role] : roles) {
    if (!j.contains(key)) continue;
    const json& ids = j.at(key);
    if (!ids.is_array()) field_error(std::string("split.") + key, "expected an array");
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::string where = std::string("split.") + key + "[" + std::to_string(i) + "]";
      if (!ids[i].is_number_unsigned() || ids[i].get<std::uint64_t>() >= n) {
        field_error(where, "expected a node id in [0, " + std::to_string(n) + ")");
      }
      const auto v = ids[i].get<std::size_t>();
      if (seen[v]) field_error(where, "node " + std::to_string(v) + " listed twice");
      seen[v] = 1;
      split[v] = role;
    }
  }
  return split;
}

json split_to_json(const std::vector<SplitRole>& split) {
  json out = {{"train", json::array()}, {"val", json::array()}, {"test", json::array()}};
  for (std::size_t v = 0; v < split.size(); ++v) {
    const char* key = split[v] == SplitRole::train ? "train" : split[v] == SplitRole::val ? "val" : "test";
    out[key].push_back(v);
  }
  return out;
}

// Shared body of the cache and external formats.
void parse_graph_body(const json& j, DatasetBundle& b) {
  const json& nodes = require(j, "nodes");
  if (!nodes.is_number_unsigned() || nodes.get<std::uint64_t>() == 0) {
    field_error("nodes", "expected a positive integer");
  }
  const auto n = nodes.get<std::size_t>();

  const json& feats = require(j, "features");
  if (!feats.is_array() || feats.size() != n) {
    field_error("features", "expected " + std::to_string(n) + " rows");
  }
  const std::size_t width = feats.empty() || !feats[0].is_array() ? 0 : feats[0].size();
  if (width == 0) field_error("features[0]", "expected a non-empty array of numbers");
  b.features = Tensor(Shape{n, width});
  for (std::size_t i = 0; i < n; ++i) {
    const std::string where = "features[" + std::to_string(i) + "]";
    if (!feats[i].is_array() || feats[i].size() != width) {
      field_error(where, "expected " + std::to_string(width) + " numbers");
    }
    for (std::size_t k = 0; k < width; ++k) {
      if (!feats[i][k].is_number()) field_error(where + "[" + std::to_string(k) + "]", "not a number");
      b.features.at(i, k) = feats[i][k].get<double>();
    }
  }
  if (!b.features.all_finite()) field_error("features", "non-finite value");

  const json& labels = require(j, "labels");
  if (!labels.is_array() || labels.size() != n) field_error("labels", "expected " + std::to_string(n) + " entries");
  b.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!labels[i].is_number_integer() || labels[i].get<long long>() < 0) {
      field_error("labels[" + std::to_string(i) + "]", "expected a non-negative integer");
    }
    b.labels[i] = labels[i].get<int>();
  }

  const json& edges = require(j, "edges");
  if (!edges.is_array()) field_error("edges", "expected an array of [u, v] pairs");
  std::vector<Edge> list;
  list.reserve(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const json& e = edges[i];
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned()) {
      field_error("edges[" + std::to_string(i) + "]", "expected [u, v] with non-negative integers");
    }
    list.emplace_back(e[0].get<std::uint32_t>(), e[1].get<std::uint32_t>());
  }
  try {
    b.graph = Graph(n, std::move(list));
  } catch (const GraphError& e) {
    field_error("edges", e.what());
  }
}

std::vector<SplitRole> stratified_split(const std::vector<int>& labels, const std::string& name) {
  const std::size_t n = labels.size();
  const int classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  SplitMix64 rng(derive_seed(fnv1a64(name), kStratify));
  std::vector<SplitRole> split(n, SplitRole::test);
  for (int c = 0; c < classes; ++c) {
    std::vector<std::uint32_t> members;
    for (std::uint32_t v = 0; v < n; ++v)
      if (labels[v] == c) members.push_back(v);
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.below(i)]);
    const auto m = double(members.size());
    const auto n_train = static_cast<std::size_t>(std::llround(0.6 * m));
    const auto n_val = static_cast<std::size_t>(std::llround(0.2 * m));
    for (std::size_t i = 0; i < members.size(); ++i) {
      split[members[i]] = i < n_train ? SplitRole::train
                          : i < n_train + n_val ? SplitRole::val
                                                : SplitRole::test;
    }
  }
  return split;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void SyntheticConfig::validate() const {
  if (communities < 2) throw DatasetError("config: need at least 2 communities");
  if (nodes_per_community < 2) throw DatasetError("config: need at least 2 nodes per community");
  if (feature_dim != 2) throw DatasetError("config: features are 2-dimensional");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DatasetError("config: sigma must be positive");
  if (centers.size() != communities) throw DatasetError("config: one center per community required");
  if (k == 0 || k >= nodes_per_community) throw DatasetError("config: k must be in [1, nodes_per_community)");
  if (level < 0 || level > 10) throw DatasetError("config: level must be in [0, 10]");
}

std::size_t DatasetBundle::num_classes() const {
  return labels.empty() ? 0 : static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1);
}

std::vector<std::uint8_t> DatasetBundle::mask(SplitRole role) const {
  std::vector<std::uint8_t> m(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) m[i] = split[i] == role;
  return m;
}

std::vector<Edge> knn_edges(const Tensor& features, std::size_t communities,
                            std::size_t nodes_per_community, std::size_t k) {
  std::vector<Edge> edges;
  std::vector<std::pair<double, std::uint32_t>> cand;
  const std::size_t width = features.dim(1);
  for (std::size_t c = 0; c < communities; ++c) {
    const std::size_t lo = c * nodes_per_community, hi = lo + nodes_per_community;
    for (std::size_t i = lo; i < hi; ++i) {
      cand.clear();
      for (std::size_t j = lo; j < hi; ++j) {
        if (j == i) continue;
        double d2 = 0.0;
        for (std::size_t t = 0; t < width; ++t) {
          const double diff = features.at(i, t) - features.at(j, t);
          d2 += diff * diff;
        }
        cand.emplace_back(d2, static_cast<std::uint32_t>(j));
      }
      std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
      for (std::size_t t = 0; t < k; ++t) {
        const auto a = static_cast<std::uint32_t>(i), b = cand[t].second;
        edges.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

DatasetBundle generate(const SyntheticConfig& config) {
  config.validate();
  const std::size_t n = config.num_nodes(), per = config.nodes_per_community;

  Tensor features(Shape{n, 2});
  SplitMix64 feat_rng(derive_seed(config.seed, kFeatures));
  for (std::size_t i = 0; i < n; ++i) {
    const auto [cx, cy] = config.centers[i / per];
    features.at(i, 0) = cx + config.sigma * feat_rng.normal();
    features.at(i, 1) = cy + config.sigma * feat_rng.normal();
  }

  const std::vector<Edge> base = knn_edges(features, config.communities, per, config.k);
  std::unordered_set<std::uint64_t> present;
  for (const Edge& e : base) present.insert(edge_key(e));

  // Selection and endpoint draws use separate streams and depend only on the seed, so
  // the edges rewired at level L are a prefix of those rewired at level L+1.
  const std::size_t m = base.size();
  const auto rewires = static_cast<std::size_t>(std::llround(0.1 * config.level * double(m)));
  std::vector<std::uint32_t> order(m);
  for (std::uint32_t i = 0; i < m; ++i) order[i] = i;
  SplitMix64 select_rng(derive_seed(config.seed, kSelect));
  SplitMix64 endpoint_rng(derive_seed(config.seed, kEndpoint));
  std::vector<Edge> edges = base;
  for (std::size_t t = 0; t < rewires; ++t) {
    std::swap(order[t], order[t + select_rng.below(m - t)]);
    const Edge old = base[order[t]];
    const std::uint32_t keep = old.first;
    const std::size_t own = keep / per;
    Edge fresh;
    int attempts = 0;
    for (;;) {
      if (++attempts > kMaxRewireAttempts) {
        throw DatasetError("generate: rewiring edge (" + std::to_string(old.first) + "," +
                           std::to_string(old.second) + ") exceeded " +
                           std::to_string(kMaxRewireAttempts) + " attempts");
      }
      auto other = static_cast<std::uint32_t>(endpoint_rng.below(n - per));
      if (other >= own * per) other += static_cast<std::uint32_t>(per);
      fresh = {std::min(keep, other), std::max(keep, other)};
      if (!present.count(edge_key(fresh))) break;
    }
    present.erase(edge_key(old));
    present.insert(edge_key(fresh));
    edges[order[t]] = fresh;
  }

  DatasetBundle b;
  b.name = "G" + std::to_string(config.level) + "_seed" + std::to_string(config.seed);
  b.graph = Graph(n, std::move(edges));
  b.features = std::move(features);
  b.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) b.labels[i] = static_cast<int>(i / per);
  b.split = train_val_split(n, config.seed);
  b.config = config;
  b.generator_version = kGeneratorVersion;
  return b;
}

double heterophily_fraction(const Graph& g, const std::vector<int>& labels) {
  if (g.num_edges() == 0) throw DatasetError("heterophily_fraction: graph has no edges");
  if (labels.size() != g.num_nodes()) throw DatasetError("heterophily_fraction: label count mismatch");
  std::size_t cross = 0;
  for (auto [u, v] : g.edges()) cross += labels[u] != labels[v];
  return double(cross) / double(g.num_edges());
}

std::string cache_file_name(const SyntheticConfig& config) {
  const std::string key = config_json(config).dump() + kGeneratorVersion;
  return "G" + std::to_string(config.level) + "_seed" + std::to_string(config.seed) + "_" +
         hex64(fnv1a64(key)).substr(0, 8) + ".json";
}

std::string serialize(const DatasetBundle& b) {
  json j;
  j["format"] = "dnsd-dataset";
  j["version"] = kDatasetFormatVersion;
  j["generator_version"] = b.generator_version;
  j["name"] = b.name;
  if (b.config) j["config"] = config_json(*b.config);
  j["nodes"] = b.num_nodes();
  json feats = json::array();
  for (std::size_t i = 0; i < b.features.dim(0); ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < b.features.dim(1); ++k) row.push_back(b.features.at(i, k));
    feats.push_back(std::move(row));
  }
  j["features"] = std::move(feats);
  j["labels"] = b.labels;
  json edges = json::array();
  for (auto [u, v] : b.graph.edges()) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  j["split"] = split_to_json(b.split);
  j["checksum"] = hex64(fnv1a64(j.dump()));
  return j.dump() + "\n";
}

DatasetBundle deserialize(const std::string& text) {
  json j = parse_json(text, "dataset cache");
  if (!j.is_object() || j.value("format", "") != "dnsd-dataset") {
    throw DatasetError("dataset cache: not a dataset file");
  }
  if (j.value("version", -1) != kDatasetFormatVersion) {
    throw VersionMismatchError("dataset cache: format version " + j.value("version", json(-1)).dump() +
                               ", expected " + std::to_string(kDatasetFormatVersion));
  }
  const std::string gen = j.value("generator_version", "");
  if (j.contains("config") && gen != kGeneratorVersion) {
    throw VersionMismatchError("dataset cache: generator version '" + gen + "', expected '" +
                               kGeneratorVersion + "'");
  }
  const std::string stored = j.value("checksum", "");
  j.erase("checksum");
  if (stored != hex64(fnv1a64(j.dump()))) {
    throw ChecksumError("dataset cache: checksum mismatch (file modified or corrupt)");
  }
  DatasetBundle b;
  b.name = j.value("name", "");
  b.generator_version = gen;
  if (j.contains("config")) b.config = config_from_json(j.at("config"));
  parse_graph_body(j, b);
  b.split = split_from_json(require(j, "split"), b.num_nodes());
  return b;
}

bool cache_write(const DatasetBundle& bundle, const std::filesystem::path& path) {
  const std::string text = serialize(bundle);
  std::error_code ec;
  if (std::filesystem::exists(path, ec)) {
    try {
      if (read_file(path) == text) return false;
    } catch (const DatasetError&) {
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw DatasetError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
  return true;
}

DatasetBundle cache_read(const std::filesystem::path& path) {
  try {
    return deserialize(read_file(path));
  } catch (const VersionMismatchError& e) {
    throw VersionMismatchError(path.string() + ": " + e.what());
  } catch (const ChecksumError& e) {
    throw ChecksumError(path.string() + ": " + e.what());
  } catch (const DatasetError& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
}

DatasetBundle load_or_generate(const SyntheticConfig& config, const std::filesystem::path& dir) {
  const auto path = dir / cache_file_name(config);
  if (std::filesystem::exists(path)) {
    DatasetBundle b = cache_read(path);
    if (b.config != config) throw DatasetError(path.string() + ": cached config differs from request");
    return b;
  }
  DatasetBundle b = generate(config);
  cache_write(b, path);
  return b;
}

DatasetBundle parse_external(const std::string& text, const std::string& fallback_name) {
  const json j = parse_json(text, "graph file");
  if (!j.is_object()) throw DatasetError("graph file: top level must be an object");
  DatasetBundle b;
  b.name = j.contains("name") && j["name"].is_string() ? j["name"].get<std::string>() : fallback_name;
  b.generator_version = "external";
  parse_graph_body(j, b);
  b.split = j.contains("split") ? split_from_json(j.at("split"), b.num_nodes())
                                : stratified_split(b.labels, b.name);
  return b;
}

DatasetBundle load_external(const std::filesystem::path& path) {
  try {
    return parse_external(read_file(path), path.stem().string());
  } catch (const DatasetError& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
}

}  // namespace dnsd
