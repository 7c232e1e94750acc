#include "tct/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tct/errors.hpp"
#include "tct/manifest.hpp"
#include "tct/rng.hpp"
#include "tct/target_features.hpp"

namespace tct {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
  return s;
}

std::string num17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

Box parse_box(const std::string& text) {
  std::vector<int> v;
  std::stringstream ss(text);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) v.push_back(std::stoi(item));
  } catch (const std::exception&) {
    v.clear();
  }
  if (v.size() != 4) throw InputError("--box expects x,y,w,h");
  return {v[0], v[1], v[2], v[3]};
}

ModulationConfig ablated(const ModulationConfig& base, const std::string& name) {
  ModulationConfig m = base;
  const std::string n = lower(name);
  if (n == "tct") return m;
  if (n == "targetalone") {
    m.context_layers.clear();
  } else if (n == "contextalone") {
    m.target_layers.clear();
  } else if (n == "vit") {
    m.target_layers.clear();
    m.context_layers.clear();
  } else {
    throw InputError("unknown --ablation '" + name + "' (tct | target-alone | context-alone | vit)");
  }
  return m;
}

nlohmann::ordered_json scanpath_json(const std::string& id, const std::string& variant, const ScanpathResult& r) {
  nlohmann::ordered_json j;
  j["trial"] = id;
  j["variant"] = variant;
  j["found"] = r.found;
  j["n_fixations"] = r.n_fixations;
  auto fix = nlohmann::ordered_json::array();
  for (const auto& f : r.fixations) fix.push_back({f.x, f.y});
  j["fixations"] = std::move(fix);
  return j;
}

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;

  void add(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "Run config file (INI)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Override [run] seed");
    cmd->add_option("-o,--out-dir", out_dir, "Override [run] output_dir");
  }

  RunConfig load() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    return cfg;
  }
};

void echo_config(const RunConfig& cfg) {
  auto out = open_out(cfg.output_dir / "effective_config.ini");
  write_effective_config(out, cfg);
}

struct BenchOptions {
  std::string manifest;
  std::optional<int> trials, n_max, jobs;
  std::string profile;
  std::string variants;

  void add(CLI::App* cmd) {
    cmd->add_option("--manifest", manifest, "Trial manifest (JSON Lines); default synthesises scenes")
        ->check(CLI::ExistingFile);
    cmd->add_option("--trials", trials, "Number of synthetic scenes");
    cmd->add_option("--n-max", n_max, "Length of the p(n) curve");
    cmd->add_option("--jobs", jobs, "Concurrent trial evaluations");
    cmd->add_option("--profile", profile, "coco18-like | natclutter-like");
    cmd->add_option("--variants", variants, "Comma-separated variant names");
  }

  void apply(RunConfig& cfg) const {
    if (!manifest.empty()) cfg.bench.manifest = manifest;
    if (trials) cfg.bench.trials = *trials;
    if (n_max) cfg.bench.n_max = *n_max;
    if (jobs) cfg.bench.jobs = *jobs;
    if (!profile.empty()) cfg.bench.profile = parse_scale_profile(profile);
    if (!variants.empty()) {
      cfg.bench.variants.clear();
      std::stringstream ss(variants);
      std::string item;
      while (std::getline(ss, item, ',')) cfg.bench.variants.push_back(item);
    }
    cfg.validate();
  }
};

std::vector<TrialSpec> bench_trials(const RunConfig& cfg) {
  if (!cfg.bench.manifest.empty()) return load_manifest(cfg.bench.manifest);
  const auto& b = cfg.bench;
  return synthetic_trial_specs(static_cast<std::size_t>(b.trials), derive_seed(cfg.seed, "bench"), b.profile,
                               b.density, b.ratio.value_or(profile_spec(b.profile).target_ratio), b.congruencies);
}

int cmd_bench(const RunConfig& cfg, bool layer_groups, std::ostream& out) {
  const EncoderWeights weights = build_weights(cfg);
  const auto trials = bench_trials(cfg);
  SuiteConfig suite;
  suite.base = cfg.pipeline;
  suite.variants = configured_variants(cfg, cfg.bench.variants, layer_groups || cfg.bench.layer_groups);
  suite.n_max = cfg.bench.n_max;
  suite.jobs = cfg.bench.jobs;
  const SuiteResult result = run_ablation_suite(trials, weights, suite);

  echo_config(cfg);
  {
    auto f = open_out(cfg.output_dir / "curves.csv");
    write_curve_csv(f, result.reports);
  }
  {
    auto f = open_out(cfg.output_dir / "summary.csv");
    write_summary_csv(f, result.reports);
  }
  {
    auto f = open_out(cfg.output_dir / "scanpaths.jsonl");
    write_scanpath_jsonl(f, result.records);
  }
  write_summary_csv(out, result.reports);
  return kExitOk;
}

}  // namespace

std::vector<VariantSpec> configured_variants(const RunConfig& config, const std::vector<std::string>& names,
                                             bool layer_groups) {
  const int layers = config.encoder.layers;
  const double g_max = config.pipeline.modulation.g_max;
  std::vector<VariantSpec> out;
  auto add = [&](VariantSpec v) {
    for (const auto& existing : out)
      if (existing.name == v.name) return;
    out.push_back(std::move(v));
  };
  static const std::vector<std::pair<std::string, std::string>> core = {
      {"tct", "TCT"}, {"targetalone", "TargetAlone"}, {"contextalone", "ContextAlone"}, {"vit", "ViT"}};
  for (const auto& name : names) {
    const std::string key = lower(name);
    auto it = std::find_if(core.begin(), core.end(), [&](const auto& c) { return c.first == key; });
    if (it != core.end()) {
      add({it->second, {ablated(config.pipeline.modulation, key)}});
    } else {
      add(variant_by_name(name, layers, g_max));
    }
  }
  if (layer_groups) {
    for (auto& v : standard_variants(layers, g_max, true)) {
      auto it = std::find_if(core.begin(), core.end(), [&](const auto& c) { return c.second == v.name; });
      if (it != core.end()) {
        add({v.name, {ablated(config.pipeline.modulation, it->first)}});
      } else {
        add(std::move(v));
      }
    }
  }
  return out;
}

void write_map_text(std::ostream& out, const AttentionMap& map) {
  out << map.width << " " << map.height << "\n";
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) out << (x ? " " : "") << num17(map.at(x, y));
    out << "\n";
  }
}

AttentionMap read_map_text(std::istream& in) {
  AttentionMap map;
  if (!(in >> map.width >> map.height) || map.width <= 0 || map.height <= 0) {
    throw InputError("map dump: bad 'width height' header");
  }
  map.values.resize(static_cast<std::size_t>(map.width) * map.height);
  for (double& v : map.values)
    if (!(in >> v)) throw InputError("map dump: truncated");
  return map;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Target- and context-modulated transformer attention for zero-shot visual search", "tct"};
  app.require_subcommand(1);

  Common search_common;
  std::string search_img, target_img, box_text, trial_id = "trial", ablation = "tct", dump_map, snapshots, profile;
  auto* search = app.add_subcommand("search", "Run one search trial and write its scanpath");
  search_common.add(search);
  search->add_option("--search", search_img, "Search image (PPM/PGM)")->required()->check(CLI::ExistingFile);
  search->add_option("--target", target_img, "Target image (PPM/PGM)")->required()->check(CLI::ExistingFile);
  search->add_option("--box", box_text, "Target box x,y,w,h in search-image pixels")->required();
  search->add_option("--id", trial_id, "Trial id for the record");
  search->add_option("--ablation", ablation, "tct | target-alone | context-alone | vit");
  search->add_option("--profile", profile, "Apply a scale profile's IOR and encoder resolution");
  search->add_option("--dump-map", dump_map, "Write the image-resolution attention map as text");
  search->add_option("--snapshots", snapshots, "Directory for the map before every fixation");

  Common bench_common;
  BenchOptions bench_opts;
  auto* bench = app.add_subcommand("bench", "Run the configured variants over a trial set");
  bench_common.add(bench);
  bench_opts.add(bench);

  Common ablate_common;
  BenchOptions ablate_opts;
  auto* ablate = app.add_subcommand("ablate", "Variants plus early/middle/late layer-group ablations");
  ablate_common.add(ablate);
  ablate_opts.add(ablate);

  Common synth_common;
  std::optional<int> synth_trials;
  std::string synth_profile;
  auto* synth = app.add_subcommand("synth", "Write synthetic scenes as images plus a trial manifest");
  synth_common.add(synth);
  synth->add_option("--trials", synth_trials, "Number of scenes");
  synth->add_option("--profile", synth_profile, "coco18-like | natclutter-like");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect-weights", "Print a weight file's header");
  inspect->add_option("file", inspect_path, "Weight file")->required()->check(CLI::ExistingFile);

  Common export_common;
  std::string export_path;
  auto* export_cmd = app.add_subcommand("export-weights", "Write the configured encoder weights to a file");
  export_common.add(export_cmd);
  export_cmd->add_option("--out", export_path, "Destination weight file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n" << "run 'tct --help' for usage\n";
    return kExitInputError;
  }

  try {
    if (search->parsed()) {
      RunConfig cfg = search_common.load();
      if (!profile.empty()) cfg.pipeline = pipeline_for(cfg.pipeline, parse_scale_profile(profile));
      cfg.validate();
      const EncoderWeights weights = build_weights(cfg);
      PipelineConfig pipeline = cfg.pipeline;
      pipeline.modulation = ablated(cfg.pipeline.modulation, ablation);
      const ImageTensor search_image = load_netpbm(search_img);
      const ImageTensor target_image = load_netpbm(target_img);
      const Box box = parse_box(box_text);
      const TargetFeatures features = extract_target_features(target_image, weights, pipeline.target_size);
      SnapshotHook hook;
      if (!snapshots.empty()) {
        std::filesystem::create_directories(snapshots);
        hook = [&](int k, const AttentionMap& m) {
          auto f = open_out(std::filesystem::path(snapshots) / ("map_" + std::to_string(k + 1) + ".txt"));
          write_map_text(f, m);
        };
      }
      const TrialDetail detail = run_trial_detailed(search_image, features, box, weights, pipeline, hook);
      if (!dump_map.empty()) {
        auto f = open_out(dump_map);
        write_map_text(f, detail.map);
      }
      const std::string record = scanpath_json(trial_id, ablation, detail.scanpath).dump();
      echo_config(cfg);
      {
        auto f = open_out(cfg.output_dir / "scanpath.jsonl");
        f << record << "\n";
      }
      out << record << "\n";
      return kExitOk;
    }
    if (bench->parsed()) {
      RunConfig cfg = bench_common.load();
      bench_opts.apply(cfg);
      return cmd_bench(cfg, false, out);
    }
    if (ablate->parsed()) {
      RunConfig cfg = ablate_common.load();
      ablate_opts.apply(cfg);
      return cmd_bench(cfg, true, out);
    }
    if (synth->parsed()) {
      RunConfig cfg = synth_common.load();
      if (synth_trials) cfg.bench.trials = *synth_trials;
      if (!synth_profile.empty()) cfg.bench.profile = parse_scale_profile(synth_profile);
      cfg.bench.manifest.clear();
      cfg.validate();
      const auto specs = bench_trials(cfg);
      std::filesystem::create_directories(cfg.output_dir / "scenes");
      auto manifest = open_out(cfg.output_dir / "manifest.jsonl");
      for (const auto& spec : specs) {
        const Trial t = materialize(spec);
        const std::string search_rel = "scenes/" + spec.id + "_search.ppm";
        const std::string target_rel = "scenes/" + spec.id + "_target.ppm";
        save_netpbm(t.search, cfg.output_dir / search_rel);
        save_netpbm(t.target, cfg.output_dir / target_rel);
        nlohmann::ordered_json j;
        j["id"] = spec.id;
        j["search"] = search_rel;
        j["target"] = target_rel;
        j["box"] = {t.box.x, t.box.y, t.box.w, t.box.h};
        j["congruency"] = to_string(t.congruency);
        j["profile"] = to_string(t.profile);
        if (t.prior) {
          j["prior"] = {{"kind", "spatial-gaussian"},
                        {"center", {t.prior->center_x, t.prior->center_y}},
                        {"sigma", t.prior->sigma}};
        }
        manifest << j.dump() << "\n";
      }
      echo_config(cfg);
      out << "wrote " << specs.size() << " trials to " << (cfg.output_dir / "manifest.jsonl").string() << "\n";
      return kExitOk;
    }
    if (inspect->parsed()) {
      const WeightFileInfo info = inspect_weights(inspect_path);
      const auto& c = info.config;
      out << "profile " << to_string(c.profile) << "\n"
          << "channels " << c.channels << "\npatch_size " << c.patch_size << "\nhidden_dim " << c.hidden_dim
          << "\nheads " << c.heads << "\nlayers " << c.layers << "\nmlp_dim " << c.mlp_dim << "\nnorm "
          << to_string(c.norm) << "\nuse_position_embeddings " << c.use_position_embeddings << "\n";
      for (const auto& t : info.tensors) {
        out << "tensor " << t.name << " " << t.rows << "x" << t.cols << " @" << t.offset << "\n";
      }
      out << "payload_bytes " << info.payload_bytes << "\n";
      return kExitOk;
    }
    if (export_cmd->parsed()) {
      const RunConfig cfg = export_common.load();
      save_weights(build_weights(cfg), export_path);
      out << "wrote " << export_path << "\n";
      return kExitOk;
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return kExitInputError;
}

}  // namespace tct
