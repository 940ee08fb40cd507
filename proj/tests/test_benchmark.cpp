#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "dnsd/benchmark.hpp"

using namespace dnsd;
namespace fs = std::filesystem;

namespace {

SyntheticConfig small_config(int level, std::uint64_t seed) {
  SyntheticConfig c;
  c.nodes_per_community = 40;
  c.k = 4;
  c.level = level;
  c.seed = seed;
  return c;
}

std::set<Edge> cross_edges(const DatasetBundle& b) {
  std::set<Edge> out;
  for (const Edge& e : b.graph.edges())
    if (b.labels[e.first] != b.labels[e.second]) out.insert(e);
  return out;
}

fs::path scratch_dir(const char* name) {
  auto dir = fs::temp_directory_path() / ("dnsd_test_" + std::string(name));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("k-NN edges match a brute-force neighbour search") {
  const DatasetBundle b = generate(small_config(0, 5));
  const std::size_t per = 40, k = 4;
  std::set<Edge> expect;
  for (std::uint32_t i = 0; i < b.num_nodes(); ++i) {
    const std::uint32_t lo = i / per * per;
    std::vector<std::pair<double, std::uint32_t>> cand;
    for (std::uint32_t j = lo; j < lo + per; ++j) {
      if (j == i) continue;
      const double dx = b.features.at(i, 0) - b.features.at(j, 0);
      const double dy = b.features.at(i, 1) - b.features.at(j, 1);
      cand.emplace_back(dx * dx + dy * dy, j);
    }
    std::sort(cand.begin(), cand.end());
    for (std::size_t t = 0; t < k; ++t) expect.insert({std::min(i, cand[t].second), std::max(i, cand[t].second)});
  }
  const std::set<Edge> got(b.graph.edges().begin(), b.graph.edges().end());
  CHECK(got == expect);
  for (std::uint32_t v = 0; v < b.num_nodes(); ++v) CHECK(b.graph.degree(v) >= k);
}

TEST_CASE("rewiring keeps the edge count, nests across levels and reaches full heterophily") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    std::size_t edges = 0;
    std::set<Edge> previous;
    double prev_h = -1.0;
    for (int level = 0; level <= 10; ++level) {
      const DatasetBundle b = generate(small_config(level, seed));
      if (level == 0) edges = b.graph.num_edges();
      CHECK(b.graph.num_edges() == edges);
      const auto cross = cross_edges(b);
      if (level == 0) CHECK(cross.empty());
      CHECK(std::includes(cross.begin(), cross.end(), previous.begin(), previous.end()));
      const double h = heterophily_fraction(b.graph, b.labels);
      CHECK(h == doctest::Approx(double(cross.size()) / double(edges)));
      CHECK(h >= prev_h);
      CHECK(std::abs(h - 0.1 * level) <= 0.5 / double(edges) + 1e-12);
      previous = cross;
      prev_h = h;
    }
  }
}

TEST_CASE("generation is deterministic in the seed and the split is 80/20 train/val") {
  const SyntheticConfig c = small_config(4, 11);
  const DatasetBundle a = generate(c), b = generate(c);
  CHECK(a == b);
  CHECK_FALSE(generate(small_config(4, 12)).features == a.features);
  std::size_t train = 0, val = 0, test = 0;
  for (SplitRole r : a.split) (r == SplitRole::train ? train : r == SplitRole::val ? val : test)++;
  CHECK(test == 0);
  CHECK(train == 96);
  CHECK(val == 24);
  CHECK(a.name == "G4_seed11");
}

TEST_CASE("heterophily fraction on a hand-built graph") {
  const Graph g(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
  CHECK(heterophily_fraction(g, {0, 0, 1, 1}) == 0.5);
  CHECK(heterophily_fraction(g, {0, 1, 0, 1}) == 1.0);
  CHECK_THROWS_AS(heterophily_fraction(Graph(2, {}), {0, 1}), DatasetError);
}

TEST_CASE("invalid generator configs are rejected") {
  SyntheticConfig c = small_config(0, 1);
  c.level = 11;
  CHECK_THROWS_AS(generate(c), DatasetError);
  c = small_config(0, 1);
  c.k = 40;
  CHECK_THROWS_AS(generate(c), DatasetError);
  c = small_config(0, 1);
  c.centers.pop_back();
  CHECK_THROWS_AS(generate(c), DatasetError);
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("dataset cache round trips, is idempotent and detects tampering") {
  const auto dir = scratch_dir("cache");
  const SyntheticConfig c = small_config(3, 7);
  const DatasetBundle b = generate(c);
  const fs::path path = dir / cache_file_name(c);
  CHECK(cache_file_name(c) != cache_file_name(small_config(3, 8)));
  CHECK(cache_file_name(c).rfind("G3_seed7_", 0) == 0);

  CHECK(cache_write(b, path));
  const std::string bytes = read_file(path);
  CHECK_FALSE(cache_write(b, path));
  CHECK(read_file(path) == bytes);
  CHECK(cache_read(path) == b);
  CHECK(load_or_generate(c, dir) == b);

  auto j = nlohmann::json::parse(bytes);
  j["features"][0][0] = j["features"][0][0].get<double>() + 1.0;
  std::ofstream(path, std::ios::binary | std::ios::trunc) << j.dump();
  CHECK_THROWS_AS(cache_read(path), ChecksumError);

  j = nlohmann::json::parse(bytes);
  j["version"] = kDatasetFormatVersion + 1;
  std::ofstream(path, std::ios::binary | std::ios::trunc) << j.dump();
  CHECK_THROWS_AS(cache_read(path), VersionMismatchError);

  j = nlohmann::json::parse(bytes);
  j["generator_version"] = "something-else";
  std::ofstream(path, std::ios::binary | std::ios::trunc) << j.dump();
  CHECK_THROWS_AS(cache_read(path), VersionMismatchError);

  CHECK_THROWS_AS(cache_read(dir / "missing.json"), DatasetError);
}

TEST_CASE("external graphs load with diagnostics and a stratified split") {
  const std::string doc = R"({
    "name": "toy",
    "nodes": 10,
    "features": [[0],[1],[2],[3],[4],[5],[6],[7],[8],[9]],
    "labels": [0,0,0,0,0,1,1,1,1,1],
    "edges": [[0,1],[1,2],[5,6],[2,7]]
  })";
  const DatasetBundle b = parse_external(doc, "fallback");
  CHECK(b.name == "toy");
  CHECK(b.graph.num_edges() == 4);
  CHECK(b.features.shape() == Shape{10, 1});
  for (int c = 0; c < 2; ++c) {
    std::size_t train = 0, val = 0, test = 0;
    for (std::size_t v = 0; v < 10; ++v) {
      if (b.labels[v] != c) continue;
      (b.split[v] == SplitRole::train ? train : b.split[v] == SplitRole::val ? val : test)++;
    }
    CHECK(train == 3);
    CHECK(val == 1);
    CHECK(test == 1);
  }
  CHECK(parse_external(doc, "fallback") == b);

  auto with_split = nlohmann::json::parse(doc);
  with_split["split"] = {{"train", {0, 5}}, {"val", {1}}};
  const DatasetBundle s = parse_external(with_split.dump(), "x");
  CHECK(s.split[0] == SplitRole::train);
  CHECK(s.split[1] == SplitRole::val);
  CHECK(s.split[9] == SplitRole::test);

  auto bad = nlohmann::json::parse(doc);
  bad["labels"].erase(0);
  CHECK_THROWS_WITH_AS(parse_external(bad.dump(), "x"), doctest::Contains("labels"), DatasetError);
  bad = nlohmann::json::parse(doc);
  bad["edges"].push_back({3, 3});
  CHECK_THROWS_WITH_AS(parse_external(bad.dump(), "x"), doctest::Contains("edges"), DatasetError);
  bad = nlohmann::json::parse(doc);
  bad["edges"].push_back({0, 99});
  CHECK_THROWS_WITH_AS(parse_external(bad.dump(), "x"), doctest::Contains("edges"), DatasetError);
  bad = nlohmann::json::parse(doc);
  bad["features"][4] = {1, 2};
  CHECK_THROWS_WITH_AS(parse_external(bad.dump(), "x"), doctest::Contains("features[4]"), DatasetError);
  bad = nlohmann::json::parse(doc);
  bad.erase("nodes");
  CHECK_THROWS_WITH_AS(parse_external(bad.dump(), "x"), doctest::Contains("nodes"), DatasetError);
  CHECK_THROWS_WITH_AS(parse_external("{\n  \"nodes\": 3,\n  oops\n}", "x"), doctest::Contains("line 3"),
                       DatasetError);
  with_split["split"] = {{"train", {0, 0}}};
  CHECK_THROWS_WITH_AS(parse_external(with_split.dump(), "x"), doctest::Contains("listed twice"),
                       DatasetError);
}

TEST_CASE("community feature means sit near their centres") {
  for (std::uint64_t seed : {42u, 43u, 100u}) {
    SyntheticConfig c;
    c.seed = seed;
    const DatasetBundle b = generate(c);
    const double tol = 3.0 * c.sigma / std::sqrt(500.0);
    for (std::size_t k = 0; k < 3; ++k) {
      double mx = 0.0, my = 0.0;
      for (std::size_t i = k * 500; i < (k + 1) * 500; ++i) {
        mx += b.features.at(i, 0) / 500.0;
        my += b.features.at(i, 1) / 500.0;
      }
      CHECK(std::abs(mx - c.centers[k].first) < tol);
      CHECK(std::abs(my - c.centers[k].second) < tol);
    }
  }
}
