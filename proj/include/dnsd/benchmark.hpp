#pragma once

// Synthetic community benchmark: k-NN graphs over Gaussian communities with a
// tunable fraction of edges rewired across communities (levels G0..G10), plus
// on-disk caching and a loader for user-supplied graphs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dnsd/graph.hpp"
#include "dnsd/tensor.hpp"

namespace dnsd {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionMismatchError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

class ChecksumError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

inline constexpr const char* kGeneratorVersion = "knn-rewire/1";
inline constexpr int kDatasetFormatVersion = 1;

struct SyntheticConfig {
  std::size_t communities = 3;
  std::size_t nodes_per_community = 500;
  std::size_t feature_dim = 2;
  double sigma = 3.0;
  std::vector<std::pair<double, double>> centers = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  std::size_t k = 8;
  int level = 0;
  std::uint64_t seed = 42;

  std::size_t num_nodes() const noexcept { return communities * nodes_per_community; }
  /// Throws DatasetError.
  void validate() const;

  friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

enum class SplitRole : std::uint8_t { train = 0, val = 1, test = 2 };

struct DatasetBundle {
  std::string name;
  Graph graph;
  Tensor features;  // n×F
  std::vector<int> labels;
  std::vector<SplitRole> split;
  std::optional<SyntheticConfig> config;
  std::string generator_version;

  std::size_t num_nodes() const noexcept { return labels.size(); }
  std::size_t num_classes() const;
  std::vector<std::uint8_t> mask(SplitRole role) const;
  std::vector<std::uint8_t> all_nodes() const { return std::vector<std::uint8_t>(num_nodes(), 1); }

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

/// Deterministic in `config` (seed included).
DatasetBundle generate(const SyntheticConfig& config);

/// The level-0 k-NN edge set E₀ of a configuration.
std::vector<Edge> knn_edges(const Tensor& features, std::size_t communities,
                            std::size_t nodes_per_community, std::size_t k);

/// Fraction of edges joining nodes with different labels. Throws on an empty edge set.
double heterophily_fraction(const Graph& g, const std::vector<int>& labels);

/// "G5_seed42_<hash>.json"; the hash covers the full config and generator version.
std::string cache_file_name(const SyntheticConfig& config);

std::string serialize(const DatasetBundle& bundle);
DatasetBundle deserialize(const std::string& text);

/// Atomic write (temporary file + rename). Returns false and leaves the file untouched
/// when it already holds exactly these bytes.
bool cache_write(const DatasetBundle& bundle, const std::filesystem::path& path);
DatasetBundle cache_read(const std::filesystem::path& path);
/// Reads the cached bundle for `config` from `dir`, generating and writing it if absent.
DatasetBundle load_or_generate(const SyntheticConfig& config, const std::filesystem::path& dir);

/// Graph JSON: {"name"?, "nodes", "features", "labels", "edges", "split"?}. A stratified
/// 60/20/20 split seeded from the name is generated when "split" is absent.
DatasetBundle load_external(const std::filesystem::path& path);
DatasetBundle parse_external(const std::string& text, const std::string& fallback_name);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace dnsd
