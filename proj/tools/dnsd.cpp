// dnsd: dataset generation, training, depth sweeps, signal-decay analysis,
// parameter tables and report aggregation.
//
// Exit codes: 0 ok, 1 internal, 2 usage, 3 config, 4 data or IO, 5 training,
// 6 some sweep cells failed. Errors go to stderr as "error[<kind>]: <message>".

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dnsd/experiment.hpp"
#include "dnsd/runtime.hpp"
#include "dnsd/serialize.hpp"
#include "dnsd/sheaf.hpp"

using namespace dnsd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kConfig = 3, kData = 4, kTraining = 5, kPartial = 6 };

struct Options {
  std::string config, level, depths, model, map, seeds, test_seeds, out;
  bool adj = false, odd = false, gate = false;
  int workers = 0;
  bool checkpoints = false;
};

void add_spec_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Experiment JSON; flags override its values");
  cmd->add_option("--level,--levels", o.level, "Perturbation levels, e.g. 5 or 0-10");
  cmd->add_option("--depths", o.depths, "Layer counts, e.g. 2,4,8,12,16");
  cmd->add_option("--model", o.model, "mlp | nsd | dnsd");
  cmd->add_option("--map", o.map, "diag | full | orthogonal");
  cmd->add_flag("--adj", o.adj, "Sheaf adjacency instead of the Laplacian");
  cmd->add_flag("--odd", o.odd, "tanh instead of relu in the stalk-wise update");
  cmd->add_flag("--gate", o.gate, "Per-stalk gate on the update");
  cmd->add_option("--seeds", o.seeds, "Train seeds, e.g. 42-47");
  cmd->add_option("--test-seeds", o.test_seeds, "Test graph seeds, e.g. 100-102");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--workers", o.workers, "Concurrent training cells")->check(CLI::PositiveNumber);
}

ExperimentSpec build_spec(const Options& o) {
  ExperimentSpec s;
  if (!o.config.empty()) {
    json j;
    try {
      j = json::parse(read_text(o.config));
    } catch (const json::parse_error& e) {
      throw ConfigError(o.config + ": " + e.what());
    }
    s = spec_from_json(j);
  }
  if (!o.level.empty()) {
    s.levels.clear();
    for (auto v : parse_list(o.level)) s.levels.push_back(static_cast<int>(v));
  }
  if (!o.depths.empty()) {
    s.depths.clear();
    for (auto v : parse_list(o.depths)) s.depths.push_back(static_cast<std::size_t>(v));
  }
  if (!o.model.empty()) s.family = parse_family(o.model);
  if (!o.map.empty()) s.map = parse_map_kind(o.map);
  if (o.adj) s.flags.adj = true;
  if (o.odd) s.flags.odd = true;
  if (o.gate) s.flags.gate = true;
  if (!o.seeds.empty()) s.seeds = parse_list(o.seeds);
  if (!o.test_seeds.empty()) s.test_seeds = parse_list(o.test_seeds);
  if (!o.out.empty()) s.out = o.out;
  if (o.workers > 0) s.workers = o.workers;
  s.validate();
  return s;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<CellResult> run_and_record(const ExperimentSpec& spec, bool checkpoints) {
  const fs::path out(spec.out);
  write_if_changed(out / "config.json", to_json(spec).dump(1) + "\n");
  prepare_datasets(spec);
  const auto keys = cells(spec);
  const auto start = std::chrono::steady_clock::now();
  std::vector<CellResult> results = run_cells(spec, keys, checkpoints);
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json timings = {{"total_seconds", total}, {"cells", json::array()}};
  for (const auto& r : results) {
    write_if_changed(out / "runs" / (r.key.file_stem() + ".json"), cell_json(r).dump(1) + "\n");
    timings["cells"].push_back({{"cell", r.key.file_stem()}, {"seconds", r.report.wall_seconds}});
    std::cout << r.key.file_stem() << "  ";
    if (r.ok()) {
      std::cout << "val " << fixed(r.report.best_val_acc, 4) << " (epoch " << r.report.best_epoch
                << ")  test " << fixed(100.0 * r.report.pooled_test_acc, 1) << "%  "
                << fixed(r.report.wall_seconds, 1) << "s\n";
    } else {
      std::cout << r.status << '\n';
    }
  }
  write_if_changed(out / "timings.json", timings.dump(1) + "\n");
  return results;
}

int finish(const std::vector<CellResult>& results) {
  std::size_t failed = 0;
  for (const auto& r : results) failed += !r.ok();
  if (failed) {
    std::cerr << "error[partial]: " << failed << " of " << results.size() << " cells failed\n";
    return kPartial;
  }
  return kOk;
}

int cmd_generate(const Options& o) {
  ExperimentSpec s;
  if (!o.config.empty()) s = spec_from_json(json::parse(read_text(o.config)));
  std::vector<std::uint64_t> levels = o.level.empty() ? parse_list("0-10") : parse_list(o.level);
  std::vector<std::uint64_t> seeds = o.seeds.empty() ? parse_list("42-47,100-102") : parse_list(o.seeds);
  const fs::path dir = o.out.empty() ? s.cache_dir() : fs::path(o.out);
  std::size_t written = 0, unchanged = 0, repaired = 0;
  for (auto level : levels) {
    for (auto seed : seeds) {
      const SyntheticConfig cfg = s.synthetic(static_cast<int>(level), seed);
      const fs::path path = dir / cache_file_name(cfg);
      bool damaged = false;
      if (fs::exists(path)) {
        try {
          if (cache_read(path).config != cfg) throw DatasetError(path.string() + ": config differs");
        } catch (const DatasetError& e) {
          std::cerr << "warning: " << e.what() << "; regenerating\n";
          damaged = true;
        }
      }
      if (cache_write(generate(cfg), path)) {
        ++(damaged ? repaired : written);
      } else {
        ++unchanged;
      }
    }
  }
  std::cout << "generated " << written << ", unchanged " << unchanged << ", repaired " << repaired
            << " in " << dir.string() << '\n';
  return kOk;
}

int cmd_train(const Options& o) {
  const ExperimentSpec spec = build_spec(o);
  const auto results = run_and_record(spec, true);
  const auto rows = aggregate(results);
  write_if_changed(fs::path(spec.out) / "summary.json", rows_json(rows).dump(1) + "\n");
  for (const auto& r : rows) {
    std::cout << "G" << r.level << " " << r.variant() << " L" << r.depth << ": " << fixed(r.mean, 1)
              << " ± " << fixed(r.std, 1) << " over " << r.n_runs << " runs\n";
  }
  return finish(results);
}

int cmd_sweep(const Options& o) {
  const ExperimentSpec spec = build_spec(o);
  const auto results = run_and_record(spec, o.checkpoints);
  const auto rows = aggregate(results);
  const fs::path out(spec.out);
  write_if_changed(out / "results.csv", rows_csv(rows));
  write_if_changed(out / "results.json", rows_json(rows).dump(1) + "\n");
  for (const auto& r : rows) {
    if (!r.best) continue;
    const std::string level = r.level < 0 ? "ext" : "G" + std::to_string(r.level);
    write_if_changed(out / "curves" / (r.variant() + "_" + level + ".csv"),
                     depth_curve_csv(rows, r.level, r.variant()));
    std::cout << level << " " << r.variant() << ": best L" << r.depth << "  " << fixed(r.mean, 1)
              << " ± " << fixed(r.std, 1) << "  (val " << fixed(r.val_mean, 4) << ")\n";
  }
  return finish(results);
}

struct DecayOptions {
  std::size_t nodes = 60, stalk = 3, width = 4, steps = 200, layers = 8;
  std::uint64_t seed = 42;
  std::string sheaf = "random";
};

int cmd_analyze_decay(const Options& o, const DecayOptions& d) {
  if (d.sheaf != "random" && d.sheaf != "identity") throw ConfigError("--sheaf must be random or identity");
  if (d.nodes < 6 || d.nodes % 3) throw ConfigError("--nodes must be a multiple of 3, at least 6");
  SyntheticConfig gc;
  gc.nodes_per_community = d.nodes / 3;
  gc.k = 1;
  gc.level = 3;
  gc.seed = d.seed;
  const Graph g = generate(gc).graph;
  SplitMix64 rng(d.seed);
  const CellularSheaf sheaf =
      d.sheaf == "random" ? CellularSheaf::random(g, d.stalk, rng) : CellularSheaf::identity(g, d.stalk);
  const BlockOperator delta =
      normalize(assemble_laplacian(g, sheaf), g, sheaf, Normalization::stalk_block);

  Tensor x(Shape{d.nodes, d.stalk, d.width});
  for (std::size_t v = 0; v < d.nodes; ++v)
    for (std::size_t s = 0; s < d.stalk; ++s)
      for (std::size_t k = 0; k < d.width; ++k) {
        // The identity sheaf's normalised kernel is spanned by sqrt(degree)-weighted constants.
        x.at(v, s, k) = d.sheaf == "identity" ? std::sqrt(double(std::max<std::size_t>(1, g.degree(v)))) * (1.0 + s + k)
                                              : rng.normal();
      }

  std::ostringstream decay;
  decay.precision(17);
  decay << "step,laplacian_norm,energy\n";
  for (std::size_t t = 0; t <= d.steps; ++t) {
    decay << t << ',' << laplacian_signal_norm(x, delta) << ',' << dirichlet_energy(x, delta) << '\n';
    if (t < d.steps) x = linear_diffusion_step(x, delta);
  }

  // Layer-wise aggregated signal at initialisation on an agreement state (all nodes equal).
  ExperimentSpec spec = o.config.empty() ? ExperimentSpec{} : spec_from_json(json::parse(read_text(o.config)));
  if (!o.map.empty()) spec.map = parse_map_kind(o.map);
  const DatasetBundle bench = generate(spec.synthetic(5, d.seed));
  const MessageIndex index = MessageIndex::from_graph(bench.graph);
  Tensor agree(Shape{bench.num_nodes(), bench.features.dim(1)});
  for (std::size_t v = 0; v < bench.num_nodes(); ++v)
    for (std::size_t k = 0; k < agree.dim(1); ++k) agree.at(v, k) = bench.features.at(0, k);
  auto layer_norms = [&](ModelFamily fam, LayerFlags flags) {
    ModelConfig mc;
    mc.family = fam;
    mc.map = spec.map;
    mc.flags = flags;
    mc.hidden = spec.hidden;
    mc.stalk_dim = spec.stalk_dim;
    mc.layers = d.layers;
    mc.seed = d.seed;
    Model m(mc);
    ForwardTrace trace;
    ad::Tape tape;
    m.forward(tape, tape.constant(agree), index, false, &trace);
    return trace.aggregated_norm;
  };
  const auto lap = layer_norms(ModelFamily::nsd, {});
  const auto adj = layer_norms(ModelFamily::dnsd, {true, true, false});
  std::ostringstream layers;
  layers.precision(17);
  layers << "layer,laplacian_path,adjacency_path\n";
  for (std::size_t l = 0; l < d.layers; ++l) layers << l + 1 << ',' << lap[l] << ',' << adj[l] << '\n';

  const fs::path out = o.out.empty() ? fs::path("decay") : fs::path(o.out);
  write_if_changed(out / "decay.csv", decay.str());
  write_if_changed(out / "layers.csv", layers.str());
  std::cout << "wrote " << (out / "decay.csv").string() << " and " << (out / "layers.csv").string() << '\n';
  return kOk;
}

int cmd_params(const Options& o) {
  struct Variant {
    ModelFamily family;
    MapKind map;
    LayerFlags flags;
    std::vector<std::size_t> depths;
  };
  std::vector<Variant> variants;
  if (!o.model.empty() || !o.config.empty()) {
    const ExperimentSpec s = build_spec(o);
    variants.push_back({s.family, s.map, s.flags, s.depths});
  } else {
    variants.push_back({ModelFamily::mlp, MapKind::diagonal, {}, {2}});
    variants.push_back({ModelFamily::nsd, MapKind::diagonal, {}, {16}});
    variants.push_back({ModelFamily::nsd, MapKind::full, {}, {8}});
    for (MapKind map : {MapKind::diagonal, MapKind::full})
      for (int bits = 0; bits < 8; ++bits) {
        const LayerFlags f{bool(bits & 1), bool(bits & 2), bool(bits & 4)};
        const std::size_t depth = map == MapKind::diagonal && f.adj && f.gate ? 12 : 16;
        variants.push_back({ModelFamily::dnsd, map, f, {depth}});
      }
  }
  std::ostringstream csv, table;
  csv << "variant,layers,total,backbone,reference,deviation_percent\n";
  table << "| variant | L | total | backbone | reference | deviation |\n|---|---|---|---|---|---|\n";
  for (const auto& v : variants) {
    for (std::size_t depth : v.depths) {
      ModelConfig mc;
      mc.family = v.family;
      mc.map = v.map;
      mc.flags = v.flags;
      mc.layers = depth;
      const ParameterCount c = Model(mc).count_parameters();
      const auto ref = reference_param_count(v.family, v.map, v.flags, depth);
      const std::string label = variant_label(v.family, v.map, v.flags);
      const std::string backbone = v.family == ModelFamily::mlp ? "-" : std::to_string(c.backbone);
      std::string dev = "-", refs = "-";
      if (ref) {
        refs = std::to_string(*ref);
        dev = fixed(100.0 * (double(c.total) - double(*ref)) / double(*ref), 2);
      }
      csv << label << ',' << depth << ',' << c.total << ',' << backbone << ',' << refs << ',' << dev << '\n';
      table << "| " << label << " | " << depth << " | " << c.total << " | " << backbone << " | " << refs
            << " | " << (ref ? dev + "%" : "-") << " |\n";
    }
  }
  std::cout << table.str();
  if (!o.out.empty()) write_if_changed(fs::path(o.out) / "params.csv", csv.str());
  return kOk;
}

int cmd_report(const std::string& dir, const Options& o) {
  const auto rows = aggregate(load_cells(dir));
  const ReportTable t = report_table(rows);
  const fs::path out = o.out.empty() ? fs::path(dir) : fs::path(o.out);
  write_if_changed(out / "report.md", t.markdown());
  write_if_changed(out / "report.csv", t.csv());
  std::cout << t.markdown();
  return kOk;
}

int fail(const char* kind, const std::string& msg, int code) {
  std::cerr << "error[" << kind << "]: " << msg << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Sheaf diffusion experiments on the synthetic community benchmark"};
  app.require_subcommand(1);
  Options opt;
  DecayOptions decay;
  std::string report_dir;

  auto* gen = app.add_subcommand("generate", "Generate and cache benchmark graphs");
  gen->add_option("--config", opt.config, "Experiment JSON (graph size, k)");
  gen->add_option("--level,--levels", opt.level, "Levels, default 0-10");
  gen->add_option("--seeds", opt.seeds, "Seeds, default 42-47,100-102");
  gen->add_option("--out", opt.out, "Cache directory");

  auto* train = app.add_subcommand("train", "Train one run per (seed, depth) and save checkpoints");
  add_spec_options(train, opt);
  auto* sweep = app.add_subcommand("sweep", "Depth sweep with best-depth selection by validation");
  add_spec_options(sweep, opt);
  sweep->add_flag("--checkpoints", opt.checkpoints, "Also save trained models");

  auto* an = app.add_subcommand("analyze-decay", "Signal decay under linear diffusion and at initialisation");
  an->add_option("--config", opt.config, "Experiment JSON (hidden size, stalk dim)");
  an->add_option("--map", opt.map, "Map kind for the layer-wise trace");
  an->add_option("--out", opt.out, "Output directory");
  an->add_option("--nodes", decay.nodes, "Graph size for the diffusion trace");
  an->add_option("--stalk", decay.stalk, "Stalk dimension for the diffusion trace");
  an->add_option("--width", decay.width, "Signal channels per stalk");
  an->add_option("--steps", decay.steps, "Diffusion steps");
  an->add_option("--layers", decay.layers, "Layers for the initialisation trace");
  an->add_option("--seed", decay.seed, "Seed");
  an->add_option("--sheaf", decay.sheaf, "random | identity");

  auto* params = app.add_subcommand("params", "Parameter counts with published reference values");
  add_spec_options(params, opt);

  auto* report = app.add_subcommand("report", "Aggregate run records into a level × variant table");
  report->add_option("results_dir", report_dir, "Directory searched for runs/*.json")->required();
  report->add_option("--out", opt.out, "Output directory (default: results_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_generate(opt);
    if (*train) return cmd_train(opt);
    if (*sweep) return cmd_sweep(opt);
    if (*an) return cmd_analyze_decay(opt, decay);
    if (*params) return cmd_params(opt);
    if (*report) return cmd_report(report_dir, opt);
  } catch (const ConfigError& e) {
    return fail("config", e.what(), kConfig);
  } catch (const json::exception& e) {
    return fail("config", e.what(), kConfig);
  } catch (const DatasetError& e) {
    return fail("data", e.what(), kData);
  } catch (const CheckpointError& e) {
    return fail("data", e.what(), kData);
  } catch (const fs::filesystem_error& e) {
    return fail("io", e.what(), kData);
  } catch (const TrainingError& e) {
    return fail("training", e.what(), kTraining);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kInternal);
  }
  return kInternal;
}
