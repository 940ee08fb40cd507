#pragma once

// Experiment pipelines shared by the command-line tool and the acceptance suite:
// run specs, per-(level, depth, seed) training cells, aggregation into result rows,
// and the level × variant report table.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dnsd/benchmark.hpp"
#include "dnsd/model.hpp"
#include "dnsd/training.hpp"
#include "json.hpp"

namespace dnsd {

inline constexpr int kExperimentFormatVersion = 1;

struct ExperimentSpec {
  std::vector<int> levels = {5};
  /// Graph file; when set, levels and test seeds are ignored and the file's own
  /// test split is scored.
  std::string external;
  ModelFamily family = ModelFamily::dnsd;
  MapKind map = MapKind::diagonal;
  LayerFlags flags;
  std::vector<std::size_t> depths = {2, 4, 8, 12, 16};
  std::vector<std::uint64_t> seeds = {42, 43, 44, 45, 46, 47};
  std::vector<std::uint64_t> test_seeds = {100, 101, 102};
  std::size_t hidden = 18;
  std::size_t stalk_dim = 3;
  std::size_t nodes_per_community = 500;
  std::size_t k = 8;
  TrainConfig train;
  std::string out = "results";
  /// Dataset cache directory; empty means <out>/data.
  std::string data_dir;
  int workers = 1;

  /// Throws ConfigError.
  void validate() const;
  std::filesystem::path cache_dir() const;
  ModelConfig model_config(std::size_t depth, std::uint64_t seed, std::size_t input_dim,
                           std::size_t num_classes) const;
  SyntheticConfig synthetic(int level, std::uint64_t seed) const;

  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

nlohmann::json to_json(const ExperimentSpec& spec);
/// Missing keys keep their defaults; unknown keys, wrong types and other versions throw ConfigError.
ExperimentSpec spec_from_json(const nlohmann::json& j);

/// "2,4,8" or ranges "42-47", mixed freely. Throws ConfigError.
std::vector<std::uint64_t> parse_list(const std::string& text);

/// "dnsd-diag-adj+odd", "nsd-full", "mlp".
std::string variant_label(ModelFamily family, MapKind map, const LayerFlags& flags);

struct CellKey {
  int level = 0;  // -1 for external graphs
  std::size_t depth = 0;
  std::uint64_t seed = 0;

  std::string file_stem() const;
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct CellResult {
  CellKey key;
  std::string family, map, flags;
  /// "ok" or "failed: <reason>".
  std::string status = "ok";
  TrainReport report;
  std::size_t parameters = 0;

  bool ok() const { return status == "ok"; }
};

/// Every (level, depth, seed) combination in a stable order.
std::vector<CellKey> cells(const ExperimentSpec& spec);

/// Generates (or verifies) every dataset the experiment touches. Run this before cells
/// execute concurrently so that no two cells write the same cache file.
void prepare_datasets(const ExperimentSpec& spec);

/// Trains one cell and scores it. Failures are captured in `status`, never thrown.
/// With `checkpoint` set the trained model is saved there.
CellResult run_cell(const ExperimentSpec& spec, const CellKey& key,
                    const std::filesystem::path* checkpoint = nullptr);

/// Runs cells on `spec.workers` threads; results come back in input order.
std::vector<CellResult> run_cells(const ExperimentSpec& spec, const std::vector<CellKey>& keys,
                                  bool checkpoints);

/// Deterministic per-cell record (no timings).
nlohmann::json cell_json(const CellResult& r);
CellResult cell_from_json(const nlohmann::json& j);

struct ResultRow {
  int level = 0;
  std::string model, map, flags;
  std::size_t depth = 0;
  /// Pooled test accuracy in percent over successful runs; std is the population std.
  double mean = 0.0;
  double std = 0.0;
  double val_mean = 0.0;
  std::size_t n_runs = 0;
  std::size_t n_failed = 0;
  /// Highest mean validation accuracy among the depths of its (level, variant); ties
  /// go to the shallower depth.
  bool best = false;

  std::string variant() const;
};

/// Groups cells by (level, variant, depth), sorted by level, variant, depth.
std::vector<ResultRow> aggregate(const std::vector<CellResult>& results);

std::string rows_csv(const std::vector<ResultRow>& rows);
nlohmann::json rows_json(const std::vector<ResultRow>& rows);
/// depth,mean,std for one (level, variant).
std::string depth_curve_csv(const std::vector<ResultRow>& rows, int level, const std::string& variant);

struct ReportTable {
  std::vector<int> levels;
  std::vector<std::string> variants;
  /// cells[v][l] is empty when that variant was not run at that level.
  std::vector<std::vector<std::string>> cells;

  std::string markdown() const;
  std::string csv() const;
};

/// Best-depth cells "mean±std (Ldepth)".
ReportTable report_table(const std::vector<ResultRow>& rows);

/// Reads every per-cell record under `dir` (recursively). Throws DatasetError when none exist.
std::vector<CellResult> load_cells(const std::filesystem::path& dir);

/// Atomic write (temporary file + rename); false and no write when the file already
/// holds exactly `text`.
bool write_if_changed(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Parameter totals from the published synthetic-benchmark table, when listed.
std::optional<std::size_t> reference_param_count(ModelFamily family, MapKind map,
                                                 const LayerFlags& flags, std::size_t layers);

}  // namespace dnsd
