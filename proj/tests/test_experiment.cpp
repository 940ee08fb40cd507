#include <cmath>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "dnsd/experiment.hpp"
#include "dnsd/serialize.hpp"

using namespace dnsd;
namespace fs = std::filesystem;

namespace {

CellResult fake_cell(int level, std::size_t depth, std::uint64_t seed, double test, double val,
                     const char* model = "dnsd", const char* flags = "adj+odd") {
  CellResult r;
  r.key = {level, depth, seed};
  r.family = model;
  r.map = std::string(model) == "mlp" ? "-" : "diag";
  r.flags = flags;
  r.report.pooled_test_acc = test;
  r.report.best_val_acc = val;
  r.report.test_names = {"a", "b", "c"};
  r.report.test_acc = {test, test, test};
  r.report.epochs.push_back({1, 0.01, 1.1, 0.3, 1.2, val});
  return r;
}

ExperimentSpec tiny_spec(const fs::path& out) {
  ExperimentSpec s;
  s.levels = {4};
  s.depths = {2};
  s.seeds = {42, 43};
  s.test_seeds = {100};
  s.nodes_per_community = 20;
  s.k = 3;
  s.flags = {true, true, false};
  s.train.max_epochs = 12;
  s.train.plateau_patience = 5;
  s.train.early_stop_patience = 10;
  s.out = out.string();
  return s;
}

}  // namespace

TEST_CASE("list parsing accepts values and ranges") {
  CHECK(parse_list("2,4,8") == std::vector<std::uint64_t>{2, 4, 8});
  CHECK(parse_list("42-44, 100") == std::vector<std::uint64_t>{42, 43, 44, 100});
  CHECK_THROWS_AS(parse_list(""), ConfigError);
  CHECK_THROWS_AS(parse_list("5-3"), ConfigError);
  CHECK_THROWS_AS(parse_list("a,2"), ConfigError);
}

TEST_CASE("experiment spec round trips and validates") {
  ExperimentSpec s;
  s.levels = {0, 5, 10};
  s.family = ModelFamily::nsd;
  s.map = MapKind::orthogonal;
  s.flags = {true, false, true};
  s.depths = {4};
  s.seeds = {1, 2};
  s.test_seeds = {9};
  s.train.lr = 0.02;
  s.workers = 3;
  CHECK(spec_from_json(to_json(s)) == s);
  CHECK(spec_from_json(nlohmann::json::parse(to_json(s).dump())) == s);

  auto j = to_json(s);
  j["colour"] = 1;
  CHECK_THROWS_AS(spec_from_json(j), ConfigError);
  j = to_json(s);
  j["version"] = 99;
  CHECK_THROWS_AS(spec_from_json(j), ConfigError);
  j = to_json(s);
  j["depths"] = "deep";
  CHECK_THROWS_AS(spec_from_json(j), ConfigError);

  ExperimentSpec bad;
  bad.test_seeds = {42};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ExperimentSpec{};
  bad.depths.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ExperimentSpec{};
  bad.stalk_dim = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ExperimentSpec{};
  bad.levels = {11};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_NOTHROW(ExperimentSpec{}.validate());
}

TEST_CASE("aggregation matches a direct recomputation") {
  std::vector<CellResult> cells;
  const double tests[2][3] = {{0.40, 0.50, 0.45}, {0.80, 0.70, 0.90}};
  const double vals[2][3] = {{0.5, 0.6, 0.55}, {0.9, 0.8, 0.85}};
  const std::size_t depths[2] = {2, 12};
  for (int d = 0; d < 2; ++d)
    for (int s = 0; s < 3; ++s) cells.push_back(fake_cell(5, depths[d], 42 + s, tests[d][s], vals[d][s]));
  cells.push_back(fake_cell(5, 2, 42, 0.41, 0.4, "mlp", "-"));
  cells.push_back(fake_cell(5, 2, 43, 0.42, 0.4, "mlp", "-"));
  CellResult broken = fake_cell(5, 12, 45, 0.0, 0.0);
  broken.status = "failed: boom";
  cells.push_back(broken);

  const auto rows = aggregate(cells);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].variant() == "dnsd-diag-adj+odd");
  CHECK(rows[0].depth == 2);
  CHECK(rows[1].depth == 12);
  CHECK(rows[2].variant() == "mlp");
  for (int d = 0; d < 2; ++d) {
    double mean = 0, var = 0;
    for (double t : tests[d]) mean += 100 * t / 3;
    for (double t : tests[d]) var += (100 * t - mean) * (100 * t - mean) / 3;
    CHECK(rows[d].mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(rows[d].std == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
    CHECK(rows[d].n_runs == 3);
  }
  CHECK(rows[1].n_failed == 1);
  CHECK_FALSE(rows[0].best);
  CHECK(rows[1].best);
  CHECK(rows[2].best);
  CHECK(rows[2].mean == doctest::Approx(41.5));
  CHECK(rows[2].std == doctest::Approx(0.5));

  const ReportTable t = report_table(rows);
  CHECK(t.levels == std::vector<int>{5});
  CHECK(t.cells[0][0] == "80.0±8.2 (L12)");
  CHECK(t.cells[1][0] == "41.5±0.5 (L2)");
  CHECK(depth_curve_csv(rows, 5, "dnsd-diag-adj+odd").rfind("depth,mean,std\n2,45", 0) == 0);
}

TEST_CASE("best depth ties go to the shallower model and single depths are trivially best") {
  std::vector<CellResult> cells = {fake_cell(3, 4, 42, 0.5, 0.7), fake_cell(3, 8, 42, 0.6, 0.7)};
  auto rows = aggregate(cells);
  CHECK(rows[0].best);
  CHECK_FALSE(rows[1].best);
  rows = aggregate({fake_cell(1, 16, 42, 0.5, 0.2)});
  CHECK(rows.size() == 1);
  CHECK(rows[0].best);
}

TEST_CASE("report columns follow the level order") {
  std::vector<CellResult> cells;
  for (int level : {10, 0, 5}) cells.push_back(fake_cell(level, 2, 42, 0.5, 0.5));
  const ReportTable t = report_table(aggregate(cells));
  CHECK(t.levels == std::vector<int>{0, 5, 10});
  CHECK(t.markdown().find("| variant | G0 | G5 | G10 |") == 0);
}

TEST_CASE("cell records round trip through JSON") {
  const CellResult r = fake_cell(7, 12, 44, 0.625, 0.75);
  const CellResult back = cell_from_json(cell_json(r));
  CHECK(back.key == r.key);
  CHECK(back.report.pooled_test_acc == r.report.pooled_test_acc);
  CHECK(cell_json(back) == cell_json(r));
  auto j = cell_json(r);
  j["version"] = 2;
  CHECK_THROWS_AS(cell_from_json(j), VersionMismatchError);
}

TEST_CASE("cells run end to end, deterministically, and failures are captured") {
  const fs::path root = fs::temp_directory_path() / "dnsd_test_cells";
  fs::remove_all(root);
  ExperimentSpec spec = tiny_spec(root / "a");
  prepare_datasets(spec);
  const auto keys = cells(spec);
  REQUIRE(keys.size() == 2);
  const auto first = run_cells(spec, keys, true);
  for (const auto& c : first) CHECK(c.ok());
  CHECK(fs::exists(root / "a" / "checkpoints" / (keys[0].file_stem() + ".json")));
  const Model restored = load_checkpoint(root / "a" / "checkpoints" / (keys[0].file_stem() + ".json"));
  CHECK(restored.config().layers == 2);

  spec.workers = 2;
  const auto second = run_cells(spec, keys, false);
  for (std::size_t i = 0; i < keys.size(); ++i) CHECK(cell_json(first[i]) == cell_json(second[i]));

  ExperimentSpec broken = spec;
  broken.data_dir = (root / "data_elsewhere").string();
  broken.external = (root / "missing.json").string();
  const CellResult failed = run_cell(broken, {-1, 2, 42});
  CHECK_FALSE(failed.ok());
  CHECK(failed.status.find("missing.json") != std::string::npos);

  CHECK_THROWS_AS(load_cells(root / "nothing_here"), DatasetError);
  fs::create_directories(root / "empty");
  CHECK_THROWS_AS(load_cells(root / "empty"), DatasetError);
}

TEST_CASE("write_if_changed leaves identical files alone") {
  const fs::path p = fs::temp_directory_path() / "dnsd_test_write" / "x.txt";
  fs::remove_all(p.parent_path());
  CHECK(write_if_changed(p, "hello"));
  CHECK_FALSE(write_if_changed(p, "hello"));
  CHECK(write_if_changed(p, "hello!"));
  CHECK(read_text(p) == "hello!");
}

TEST_CASE("reference parameter counts cover the published rows") {
  CHECK(reference_param_count(ModelFamily::mlp, MapKind::diagonal, {}, 2) == 111u);
  CHECK(reference_param_count(ModelFamily::nsd, MapKind::full, {}, 8) == 3159u);
  CHECK(reference_param_count(ModelFamily::dnsd, MapKind::diagonal, {true, false, true}, 12) == 3939u);
  CHECK(reference_param_count(ModelFamily::dnsd, MapKind::full, {false, true, true}, 16) == 12319u);
  CHECK_FALSE(reference_param_count(ModelFamily::dnsd, MapKind::orthogonal, {}, 16).has_value());
}
