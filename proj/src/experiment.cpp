#include "dnsd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "dnsd/serialize.hpp"

namespace dnsd {
namespace {

using nlohmann::json;

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("experiment config: field '") + key + "' has the wrong type");
  }
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (depths.empty()) throw ConfigError("experiment: depth list is empty");
  if (seeds.empty()) throw ConfigError("experiment: no train seeds");
  if (external.empty()) {
    if (levels.empty()) throw ConfigError("experiment: no levels");
    for (int l : levels)
      if (l < 0 || l > 10) throw ConfigError("experiment: level " + std::to_string(l) + " outside 0..10");
    if (test_seeds.empty()) throw ConfigError("experiment: no test seeds");
    for (auto s : test_seeds)
      if (std::find(seeds.begin(), seeds.end(), s) != seeds.end()) {
        throw ConfigError("experiment: seed " + std::to_string(s) + " is both a train and a test seed");
      }
    synthetic(levels.front(), seeds.front()).validate();
  }
  if (workers < 1) throw ConfigError("experiment: workers must be at least 1");
  for (std::size_t depth : depths) model_config(depth, 0, 2, 3).validate();
  try {
    train.validate();
  } catch (const TrainingError& e) {
    throw ConfigError(e.what());
  }
}

std::filesystem::path ExperimentSpec::cache_dir() const {
  return data_dir.empty() ? std::filesystem::path(out) / "data" : std::filesystem::path(data_dir);
}

ModelConfig ExperimentSpec::model_config(std::size_t depth, std::uint64_t seed, std::size_t input_dim,
                                         std::size_t num_classes) const {
  ModelConfig c;
  c.family = family;
  c.map = map;
  c.flags = family == ModelFamily::dnsd ? flags : LayerFlags{};
  c.input_dim = input_dim;
  c.num_classes = num_classes;
  c.hidden = hidden;
  c.stalk_dim = stalk_dim;
  c.layers = depth;
  c.seed = seed;
  return c;
}

SyntheticConfig ExperimentSpec::synthetic(int level, std::uint64_t seed) const {
  SyntheticConfig c;
  c.nodes_per_community = nodes_per_community;
  c.k = k;
  c.level = level;
  c.seed = seed;
  return c;
}

json to_json(const ExperimentSpec& s) {
  return {{"format", "dnsd-experiment"},
          {"version", kExperimentFormatVersion},
          {"levels", s.levels},
          {"external", s.external},
          {"model", to_string(s.family)},
          {"map", to_string(s.map)},
          {"adj", s.flags.adj},
          {"odd", s.flags.odd},
          {"gate", s.flags.gate},
          {"depths", s.depths},
          {"seeds", s.seeds},
          {"test_seeds", s.test_seeds},
          {"hidden", s.hidden},
          {"stalk_dim", s.stalk_dim},
          {"nodes_per_community", s.nodes_per_community},
          {"k", s.k},
          {"train", to_json(s.train)},
          {"out", s.out},
          {"data_dir", s.data_dir},
          {"workers", s.workers}};
}

ExperimentSpec spec_from_json(const json& j) {
  static const std::set<std::string> known{
      "format", "version", "levels", "external", "model", "map", "adj", "odd", "gate", "depths",
      "seeds", "test_seeds", "hidden", "stalk_dim", "nodes_per_community", "k", "train", "out",
      "data_dir", "workers"};
  if (!j.is_object()) throw ConfigError("experiment config: expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("experiment config: unknown key '" + key + "'");
  if (j.contains("format") && j["format"] != "dnsd-experiment") {
    throw ConfigError("experiment config: format is not dnsd-experiment");
  }
  if (j.contains("version") && j["version"] != kExperimentFormatVersion) {
    throw ConfigError("experiment config: version " + j["version"].dump() + ", expected " +
                      std::to_string(kExperimentFormatVersion));
  }
  ExperimentSpec s;
  std::string model = to_string(s.family), map = to_string(s.map);
  read_field(j, "levels", s.levels);
  read_field(j, "external", s.external);
  read_field(j, "model", model);
  read_field(j, "map", map);
  s.family = parse_family(model);
  s.map = parse_map_kind(map);
  read_field(j, "adj", s.flags.adj);
  read_field(j, "odd", s.flags.odd);
  read_field(j, "gate", s.flags.gate);
  read_field(j, "depths", s.depths);
  read_field(j, "seeds", s.seeds);
  read_field(j, "test_seeds", s.test_seeds);
  read_field(j, "hidden", s.hidden);
  read_field(j, "stalk_dim", s.stalk_dim);
  read_field(j, "nodes_per_community", s.nodes_per_community);
  read_field(j, "k", s.k);
  if (j.contains("train")) s.train = train_config_from_json(j["train"]);
  read_field(j, "out", s.out);
  read_field(j, "data_dir", s.data_dir);
  read_field(j, "workers", s.workers);
  return s;
}

std::vector<std::uint64_t> parse_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  auto number = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("list '" + text + "': '" + s + "' is not a non-negative integer");
    }
    return std::stoull(s);
  };
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove(item.begin(), item.end(), ' '), item.end());
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(number(item));
      continue;
    }
    const auto lo = number(item.substr(0, dash)), hi = number(item.substr(dash + 1));
    if (hi < lo) throw ConfigError("list '" + text + "': empty range '" + item + "'");
    for (auto v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw ConfigError("list '" + text + "' is empty");
  return out;
}

std::string variant_label(ModelFamily family, MapKind map, const LayerFlags& flags) {
  if (family == ModelFamily::mlp) return "mlp";
  std::string out = std::string(to_string(family)) + "-" + to_string(map);
  if (family == ModelFamily::dnsd && (flags.adj || flags.odd || flags.gate)) out += "-" + to_string(flags);
  return out;
}

std::string CellKey::file_stem() const {
  return (level < 0 ? std::string("ext") : "G" + std::to_string(level)) + "_L" +
         std::to_string(depth) + "_seed" + std::to_string(seed);
}

std::vector<CellKey> cells(const ExperimentSpec& spec) {
  std::vector<CellKey> out;
  const std::vector<int> levels = spec.external.empty() ? spec.levels : std::vector<int>{-1};
  for (int level : levels)
    for (std::size_t depth : spec.depths)
      for (std::uint64_t seed : spec.seeds) out.push_back({level, depth, seed});
  return out;
}

void prepare_datasets(const ExperimentSpec& spec) {
  if (!spec.external.empty()) return;
  for (int level : spec.levels) {
    for (auto seed : spec.seeds) load_or_generate(spec.synthetic(level, seed), spec.cache_dir());
    for (auto seed : spec.test_seeds) load_or_generate(spec.synthetic(level, seed), spec.cache_dir());
  }
}

CellResult run_cell(const ExperimentSpec& spec, const CellKey& key,
                    const std::filesystem::path* checkpoint) {
  CellResult r;
  r.key = key;
  r.family = to_string(spec.family);
  r.map = spec.family == ModelFamily::mlp ? "-" : to_string(spec.map);
  r.flags = spec.family == ModelFamily::dnsd ? to_string(spec.flags) : "-";
  try {
    DatasetBundle data;
    std::vector<DatasetBundle> tests;
    if (key.level < 0) {
      data = load_external(spec.external);
    } else {
      data = load_or_generate(spec.synthetic(key.level, key.seed), spec.cache_dir());
      for (auto s : spec.test_seeds) tests.push_back(load_or_generate(spec.synthetic(key.level, s), spec.cache_dir()));
    }
    Model model(spec.model_config(key.depth, key.seed, data.features.dim(1), data.num_classes()));
    r.parameters = model.count_parameters().total;
    r.report = train(model, data, spec.train);
    if (key.level < 0) {
      const Tensor logits = model.logits(data.features, MessageIndex::from_graph(data.graph));
      const auto mask = data.mask(SplitRole::test);
      if (std::find(mask.begin(), mask.end(), 1) == mask.end()) {
        throw DatasetError(data.name + ": no test nodes to score");
      }
      r.report.test_names = {data.name};
      r.report.test_acc = {accuracy(logits, data.labels, mask)};
      r.report.pooled_test_acc = r.report.test_acc.front();
    } else {
      std::vector<const DatasetBundle*> ptrs;
      for (const auto& t : tests) ptrs.push_back(&t);
      const EvalResult ev = evaluate(model, ptrs);
      for (const auto& t : tests) r.report.test_names.push_back(t.name);
      r.report.test_acc = ev.per_graph;
      r.report.pooled_test_acc = ev.pooled;
    }
    if (checkpoint) save_checkpoint(model, *checkpoint);
  } catch (const std::exception& e) {
    r.status = std::string("failed: ") + e.what();
  }
  return r;
}

std::vector<CellResult> run_cells(const ExperimentSpec& spec, const std::vector<CellKey>& keys,
                                  bool checkpoints) {
  std::vector<CellResult> out(keys.size());
  const auto ckpt_dir = std::filesystem::path(spec.out) / "checkpoints";
  if (checkpoints) std::filesystem::create_directories(ckpt_dir);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) {
      const auto path = ckpt_dir / (keys[i].file_stem() + ".json");
      out[i] = run_cell(spec, keys[i], checkpoints ? &path : nullptr);
    }
  };
  const std::size_t n = std::min<std::size_t>(spec.workers, keys.size());
  if (n <= 1) {
    worker();
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

json cell_json(const CellResult& r) {
  json tests = json::array();
  for (std::size_t i = 0; i < r.report.test_acc.size(); ++i) {
    tests.push_back({{"graph", r.report.test_names.at(i)}, {"accuracy", r.report.test_acc[i]}});
  }
  json epochs = json::array();
  for (const auto& e : r.report.epochs) {
    epochs.push_back({e.epoch, e.lr, e.train_loss, e.train_acc, e.val_loss, e.val_acc});
  }
  return {{"format", "dnsd-run"},
          {"version", kExperimentFormatVersion},
          {"level", r.key.level},
          {"depth", r.key.depth},
          {"seed", r.key.seed},
          {"model", r.family},
          {"map", r.map},
          {"flags", r.flags},
          {"status", r.status},
          {"parameters", r.parameters},
          {"best_epoch", r.report.best_epoch},
          {"best_val_acc", r.report.best_val_acc},
          {"epochs_run", r.report.epochs.size()},
          {"test", tests},
          {"pooled_test_acc", r.report.pooled_test_acc},
          {"trace_columns", {"epoch", "lr", "train_loss", "train_acc", "val_loss", "val_acc"}},
          {"trace", epochs}};
}

CellResult cell_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != "dnsd-run") throw DatasetError("not a run record");
  if (j.value("version", -1) != kExperimentFormatVersion) {
    throw VersionMismatchError("run record version " + j.value("version", json(-1)).dump());
  }
  try {
    CellResult r;
    r.key = {j.at("level").get<int>(), j.at("depth").get<std::size_t>(), j.at("seed").get<std::uint64_t>()};
    r.family = j.at("model").get<std::string>();
    r.map = j.at("map").get<std::string>();
    r.flags = j.at("flags").get<std::string>();
    r.status = j.at("status").get<std::string>();
    r.parameters = j.at("parameters").get<std::size_t>();
    r.report.best_epoch = j.at("best_epoch").get<int>();
    r.report.best_val_acc = j.at("best_val_acc").get<double>();
    for (const auto& t : j.at("test")) {
      r.report.test_names.push_back(t.at("graph").get<std::string>());
      r.report.test_acc.push_back(t.at("accuracy").get<double>());
    }
    r.report.pooled_test_acc = j.at("pooled_test_acc").get<double>();
    for (const auto& e : j.at("trace")) {
      r.report.epochs.push_back({e.at(0).get<int>(), e.at(1).get<double>(), e.at(2).get<double>(),
                                 e.at(3).get<double>(), e.at(4).get<double>(), e.at(5).get<double>()});
    }
    r.report.restored = true;
    return r;
  } catch (const json::exception& e) {
    throw DatasetError(std::string("run record: ") + e.what());
  }
}

std::string ResultRow::variant() const {
  if (model == "mlp") return "mlp";
  std::string out = model + "-" + map;
  if (flags != "-") out += "-" + flags;
  return out;
}

std::vector<ResultRow> aggregate(const std::vector<CellResult>& results) {
  struct Acc {
    ResultRow row;
    std::vector<double> test, val;
  };
  std::map<std::tuple<int, std::string, std::size_t>, Acc> groups;
  for (const auto& r : results) {
    ResultRow proto;
    proto.level = r.key.level;
    proto.model = r.family;
    proto.map = r.map;
    proto.flags = r.flags;
    proto.depth = r.key.depth;
    auto [it, fresh] = groups.try_emplace({r.key.level, proto.variant(), r.key.depth});
    if (fresh) it->second.row = proto;
    if (!r.ok()) {
      ++it->second.row.n_failed;
      continue;
    }
    it->second.test.push_back(100.0 * r.report.pooled_test_acc);
    it->second.val.push_back(r.report.best_val_acc);
  }
  std::vector<ResultRow> rows;
  for (auto& [key, acc] : groups) {
    ResultRow row = acc.row;
    row.n_runs = acc.test.size();
    if (row.n_runs) {
      double s = 0.0, v = 0.0;
      for (double x : acc.test) s += x;
      for (double x : acc.val) v += x;
      row.mean = s / double(row.n_runs);
      row.val_mean = v / double(row.n_runs);
      double ss = 0.0;
      for (double x : acc.test) ss += (x - row.mean) * (x - row.mean);
      row.std = std::sqrt(ss / double(row.n_runs));
    }
    rows.push_back(row);
  }
  // Rows are grouped by (level, variant) with depth ascending, so the first strict
  // maximum of each group is the shallowest best.
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i, best = rows.size();
    while (j < rows.size() && rows[j].level == rows[i].level && rows[j].variant() == rows[i].variant()) {
      if (rows[j].n_runs && (best == rows.size() || rows[j].val_mean > rows[best].val_mean)) best = j;
      ++j;
    }
    if (best < rows.size()) rows[best].best = true;
    i = j;
  }
  return rows;
}

std::string rows_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "level,model,map,flags,depth,mean,std,val_mean,n_runs,n_failed,best\n";
  for (const auto& r : rows) {
    out << r.level << ',' << r.model << ',' << r.map << ',' << r.flags << ',' << r.depth << ','
        << r.mean << ',' << r.std << ',' << r.val_mean << ',' << r.n_runs << ',' << r.n_failed << ','
        << (r.best ? 1 : 0) << '\n';
  }
  return out.str();
}

json rows_json(const std::vector<ResultRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"level", r.level}, {"model", r.model}, {"map", r.map}, {"flags", r.flags},
                   {"depth", r.depth}, {"mean", r.mean}, {"std", r.std}, {"val_mean", r.val_mean},
                   {"n_runs", r.n_runs}, {"n_failed", r.n_failed}, {"best", r.best}});
  }
  return out;
}

std::string depth_curve_csv(const std::vector<ResultRow>& rows, int level, const std::string& variant) {
  std::ostringstream out;
  out.precision(17);
  out << "depth,mean,std\n";
  for (const auto& r : rows)
    if (r.level == level && r.variant() == variant && r.n_runs) out << r.depth << ',' << r.mean << ',' << r.std << '\n';
  return out.str();
}

ReportTable report_table(const std::vector<ResultRow>& rows) {
  ReportTable t;
  std::set<int> levels;
  std::set<std::string> variants;
  for (const auto& r : rows) {
    levels.insert(r.level);
    variants.insert(r.variant());
  }
  t.levels.assign(levels.begin(), levels.end());
  t.variants.assign(variants.begin(), variants.end());
  t.cells.assign(t.variants.size(), std::vector<std::string>(t.levels.size()));
  for (const auto& r : rows) {
    if (!r.best) continue;
    const auto v = std::lower_bound(t.variants.begin(), t.variants.end(), r.variant()) - t.variants.begin();
    const auto l = std::lower_bound(t.levels.begin(), t.levels.end(), r.level) - t.levels.begin();
    t.cells[v][l] = percent(r.mean) + "±" + percent(r.std) + " (L" + std::to_string(r.depth) + ")";
  }
  return t;
}

namespace {
std::string level_name(int l) { return l < 0 ? "external" : "G" + std::to_string(l); }
}  // namespace

std::string ReportTable::markdown() const {
  std::ostringstream out;
  out << "| variant |";
  for (int l : levels) out << ' ' << level_name(l) << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < levels.size(); ++i) out << "---|";
  out << '\n';
  for (std::size_t v = 0; v < variants.size(); ++v) {
    out << "| " << variants[v] << " |";
    for (const auto& c : cells[v]) out << ' ' << (c.empty() ? "-" : c) << " |";
    out << '\n';
  }
  return out.str();
}

std::string ReportTable::csv() const {
  std::ostringstream out;
  out << "variant";
  for (int l : levels) out << ',' << level_name(l);
  out << '\n';
  for (std::size_t v = 0; v < variants.size(); ++v) {
    out << variants[v];
    for (const auto& c : cells[v]) out << ',' << c;
    out << '\n';
  }
  return out.str();
}

std::vector<CellResult> load_cells(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DatasetError(dir.string() + ": not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json" && e.path().parent_path().filename() == "runs") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<CellResult> out;
  for (const auto& f : files) {
    try {
      out.push_back(cell_from_json(json::parse(read_text(f))));
    } catch (const json::parse_error& e) {
      throw DatasetError(f.string() + ": " + e.what());
    } catch (const DatasetError& e) {
      throw DatasetError(f.string() + ": " + e.what());
    }
  }
  if (out.empty()) throw DatasetError(dir.string() + ": no run records found");
  return out;
}

bool write_if_changed(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (std::filesystem::exists(path, ec)) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in && ss.str() == text) return false;
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

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<std::size_t> reference_param_count(ModelFamily family, MapKind map,
                                                 const LayerFlags& flags, std::size_t layers) {
  switch (family) {
    case ModelFamily::mlp:
      if (layers == 2) return 111;
      return std::nullopt;
    case ModelFamily::nsd:
      if (map == MapKind::diagonal && layers == 16) return 2655;
      if (map == MapKind::full && layers == 8) return 3159;
      return std::nullopt;
    case ModelFamily::dnsd:
      break;
  }
  if (map == MapKind::diagonal) {
    if (layers == 16) return flags.gate ? 5215 : 5007;
    if (layers == 12 && flags.adj && flags.gate) return 3939;
  }
  if (map == MapKind::full && layers == 16) return flags.gate ? 12319 : 12111;
  return std::nullopt;
}

}  // namespace dnsd
