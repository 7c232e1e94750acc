#include "tct/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "tct/errors.hpp"
#include "tct/rng.hpp"
#include "tct/target_features.hpp"

namespace tct {

std::string to_string(ScaleProfile p) { return p == ScaleProfile::Coco18Like ? "coco18-like" : "natclutter-like"; }

ScaleProfile parse_scale_profile(const std::string& s) {
  if (s == "coco18-like") return ScaleProfile::Coco18Like;
  if (s == "natclutter-like") return ScaleProfile::NatClutterLike;
  throw InputError("unknown scale profile '" + s + "' (coco18-like | natclutter-like)");
}

std::string to_string(Congruency c) {
  switch (c) {
    case Congruency::Congruent: return "congruent";
    case Congruency::Incongruent: return "incongruent";
    case Congruency::NotApplicable: return "n/a";
  }
  return "n/a";
}

Congruency parse_congruency(const std::string& s) {
  if (s == "congruent") return Congruency::Congruent;
  if (s == "incongruent") return Congruency::Incongruent;
  if (s == "n/a" || s == "na" || s.empty()) return Congruency::NotApplicable;
  throw InputError("unknown congruency '" + s + "' (congruent | incongruent | n/a)");
}

ProfileSpec profile_spec(ScaleProfile p) {
  if (p == ScaleProfile::Coco18Like) return {512, 320, 48, 64, 40, 0.04};
  return {1280, 1024, 200, 80, 64, 0.01};
}

namespace {

struct Sprite {
  int w, h;
  double color[3];
  bool ellipse;
};

// Texture noise is drawn for every pixel so the stream advances identically
// for both shapes.
void render_sprite(ImageTensor& img, int x0, int y0, const Sprite& s, Rng& rng) {
  for (int yy = 0; yy < s.h; ++yy) {
    for (int xx = 0; xx < s.w; ++xx) {
      bool inside = true;
      if (s.ellipse) {
        const double u = (xx + 0.5 - s.w / 2.0) / (s.w / 2.0);
        const double v = (yy + 0.5 - s.h / 2.0) / (s.h / 2.0);
        inside = u * u + v * v <= 1.0;
      }
      for (int c = 0; c < img.channels(); ++c) {
        const double value = std::clamp(s.color[c] + rng.uniform(-0.08, 0.08), 0.0, 1.0);
        if (inside) img.at(c, y0 + yy, x0 + xx) = value;
      }
    }
  }
}

std::optional<Box> place(std::vector<Box>& placed, int w, int h, int width, int height, int retries, Rng& rng) {
  if (w > width || h > height) return std::nullopt;
  for (int attempt = 0; attempt < retries; ++attempt) {
    const Box b{static_cast<int>(rng.uniform_int(0, width - w)), static_cast<int>(rng.uniform_int(0, height - h)), w, h};
    if (std::none_of(placed.begin(), placed.end(), [&](const Box& o) { return o.intersects(b); })) {
      placed.push_back(b);
      return b;
    }
  }
  return std::nullopt;
}

Sprite random_sprite(int w, int h, Rng& rng) {
  Sprite s{w, h, {0, 0, 0}, false};
  for (double& c : s.color) c = rng.uniform();
  s.ellipse = rng.uniform_int(0, 1) == 1;
  return s;
}

ContextPrior make_prior(std::uint64_t seed, Congruency congruency, const Box& box, int width, int height,
                        const SceneOptions& options) {
  Rng rng(seed, "prior", congruency == Congruency::Congruent ? 0 : 1);
  if (congruency == Congruency::Congruent) {
    const double x = box.x + rng.uniform() * box.w;
    const double y = box.y + rng.uniform() * box.h;
    return ContextPrior::gaussian(x / width, y / height, options.prior_sigma);
  }
  // Away from the target: outside the box grown by its own size on every side.
  const Box grown{box.x - box.w, box.y - box.h, 3 * box.w, 3 * box.h};
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double x = rng.uniform() * width;
    const double y = rng.uniform() * height;
    const bool inside = x >= grown.x && x < grown.x + grown.w && y >= grown.y && y < grown.y + grown.h;
    if (!inside) return ContextPrior::gaussian(x / width, y / height, options.prior_sigma);
  }
  throw InputError("scene generation: no room for an incongruent prior centre");
}

}  // namespace

Trial synthesize_scene(std::uint64_t seed, ScaleProfile profile, double clutter_density, double target_scale_ratio,
                       Congruency congruency, const SceneOptions& options) {
  if (!(target_scale_ratio > 0.0 && target_scale_ratio < 1.0)) throw InputError("target ratio must lie in (0, 1)");
  if (!(clutter_density >= 0.0) || !std::isfinite(clutter_density)) throw InputError("clutter density must be >= 0");
  const ProfileSpec spec = profile_spec(profile);
  const int width = spec.width, height = spec.height;
  Rng rng(seed, "scene");

  double bg[3];
  for (double& c : bg) c = rng.uniform(0.35, 0.65);
  ImageTensor img(3, height, width);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) img.at(c, y, x) = std::clamp(bg[c] + rng.uniform(-0.1, 0.1), 0.0, 1.0);

  const int side = std::max(1, static_cast<int>(std::lround(std::sqrt(target_scale_ratio * width * height))));
  std::vector<Box> placed;
  const Sprite target_sprite = random_sprite(side, side, rng);
  const auto target_box = place(placed, side, side, width, height, options.placement_retries, rng);
  if (!target_box) throw InputError("scene generation: could not place a " + std::to_string(side) + "px target");
  render_sprite(img, target_box->x, target_box->y, target_sprite, rng);

  const long distractors = std::lround(clutter_density * width * height / (static_cast<double>(side) * side));
  for (long k = 0; k < distractors; ++k) {
    const int w = std::max(1, static_cast<int>(side * rng.uniform(0.7, 1.3)));
    const int h = std::max(1, static_cast<int>(side * rng.uniform(0.7, 1.3)));
    const auto b = place(placed, w, h, width, height, options.placement_retries, rng);
    const Sprite s = random_sprite(w, h, rng);
    if (b) render_sprite(img, b->x, b->y, s, rng);
  }

  ImageTensor target(3, side, side);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) target.at(c, y, x) = bg[c];
  Rng texture(seed, "target-texture");
  render_sprite(target, 0, 0, target_sprite, texture);

  Trial t{"", profile, congruency, std::move(img), std::move(target), *target_box, std::nullopt};
  if (congruency != Congruency::NotApplicable) {
    t.prior = make_prior(seed, congruency, *target_box, width, height, options);
  }
  return t;
}

Trial synthesize_tile_scene(std::uint64_t seed, int cols, int rows, int tile) {
  if (cols < 1 || rows < 1 || tile < 1) throw InputError("tile scene needs positive dimensions");
  Rng rng(seed, "tiles");
  ImageTensor img(3, rows * tile, cols * tile);
  for (int gy = 0; gy < rows; ++gy) {
    for (int gx = 0; gx < cols; ++gx) {
      double color[3];
      for (double& c : color) c = rng.uniform();
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < tile; ++y)
          for (int x = 0; x < tile; ++x)
            img.at(c, gy * tile + y, gx * tile + x) = std::clamp(color[c] + rng.uniform(-0.1, 0.1), 0.0, 1.0);
    }
  }
  const int pick = static_cast<int>(rng.uniform_int(0, cols * rows - 1));
  const Box box{(pick % cols) * tile, (pick / cols) * tile, tile, tile};
  ImageTensor target = crop(img, box.x, box.y, tile, tile);
  return Trial{"tiles-" + std::to_string(seed), ScaleProfile::Coco18Like, Congruency::NotApplicable,
               std::move(img), std::move(target), box, std::nullopt};
}

Trial materialize(const TrialSpec& spec) {
  if (spec.synthetic) {
    Trial t = synthesize_scene(spec.seed, spec.profile, spec.density, spec.ratio, spec.congruency, spec.scene);
    t.id = spec.id;
    return t;
  }
  const ProfileSpec ps = profile_spec(spec.profile);
  Trial t{spec.id, spec.profile, spec.congruency, load_netpbm(spec.search_path), load_netpbm(spec.target_path),
          spec.box, spec.prior};
  if (t.search.width() != ps.width || t.search.height() != ps.height) {
    throw InputError("trial " + spec.id + ": " + to_string(spec.profile) + " requires a " + std::to_string(ps.width) +
                     "x" + std::to_string(ps.height) + " search image, got " + std::to_string(t.search.width()) +
                     "x" + std::to_string(t.search.height()));
  }
  validate_box(t.box, t.search.width(), t.search.height());
  return t;
}

std::vector<TrialSpec> synthetic_trial_specs(std::size_t n, std::uint64_t seed, ScaleProfile profile,
                                             double density, double ratio,
                                             std::span<const Congruency> congruencies, const SceneOptions& scene) {
  std::vector<TrialSpec> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t scene_seed = derive_seed(seed, "scene", i);
    for (Congruency c : congruencies) {
      TrialSpec s;
      s.id = "scene" + std::to_string(i) + (c == Congruency::NotApplicable ? "" : "-" + to_string(c));
      s.profile = profile;
      s.congruency = c;
      s.seed = scene_seed;
      s.density = density;
      s.ratio = ratio;
      s.scene = scene;
      out.push_back(std::move(s));
    }
  }
  return out;
}

MetricsReport compute_metrics(std::span<const ScanpathResult> results, int n_max) {
  if (results.empty()) throw InputError("compute_metrics: no results");
  if (n_max < 1) throw InputError("compute_metrics: n_max must be >= 1");
  MetricsReport r;
  r.trials = results.size();
  std::vector<std::size_t> hits(static_cast<std::size_t>(n_max) + 1, 0);
  long total = 0;
  for (const auto& s : results) {
    if (!s.found) continue;
    ++r.found;
    total += s.n_fixations;
    if (s.n_fixations <= n_max) ++hits[static_cast<std::size_t>(s.n_fixations)];
  }
  r.not_found = r.trials - r.found;
  r.avg_fixations = r.found ? static_cast<double>(total) / static_cast<double>(r.found) : std::nan("");
  std::size_t cumulative = hits[0];
  for (int n = 1; n <= n_max; ++n) {
    cumulative += hits[static_cast<std::size_t>(n)];
    r.curve.push_back(static_cast<double>(cumulative) / static_cast<double>(r.trials));
  }
  return r;
}

MetricsReport random_baseline(int width, int height, const Box& box, const SearchParams& params, int n_repeats,
                              std::uint64_t seed, int n_max) {
  if (n_repeats < 1) throw InputError("random baseline needs at least one repeat");
  std::vector<ScanpathResult> results;
  results.reserve(static_cast<std::size_t>(n_repeats));
  AttentionMap map{width, height, std::vector<double>(static_cast<std::size_t>(width) * height)};
  for (int rep = 0; rep < n_repeats; ++rep) {
    Rng rng(seed, "random-baseline", static_cast<std::uint64_t>(rep));
    for (double& v : map.values) v = rng.uniform();
    results.push_back(generate_scanpath(map, box, params));
  }
  return compute_metrics(results, n_max);
}

std::vector<VariantSpec> standard_variants(int layers, double g_max, bool layer_groups) {
  ModulationConfig tct = ModulationConfig::tct_default(layers);
  tct.g_max = g_max;
  ModulationConfig target_alone = tct;
  target_alone.context_layers.clear();
  ModulationConfig context_alone = tct;
  context_alone.target_layers.clear();
  ModulationConfig vit;
  vit.g_max = g_max;
  std::vector<VariantSpec> out{{"TCT", {tct}}, {"TargetAlone", {target_alone}}, {"ContextAlone", {context_alone}},
                               {"ViT", {vit}}};
  if (!layer_groups) return out;

  // Thirds of the depth: early, middle, late (1-4, 5-8, 9-12 for 12 layers).
  const int bounds[4] = {0, layers / 3, 2 * layers / 3, layers};
  for (int g = 0; g < 3; ++g) {
    const int lo = bounds[g] + 1;
    if (lo > bounds[g + 1]) continue;
    ModulationConfig m = vit;
    for (int l = lo; l <= layers; ++l) m.target_layers.insert(l);
    out.push_back({"Target[" + std::to_string(lo) + "-" + std::to_string(layers) + "]", {m}});
  }
  for (int g = 0; g < 3; ++g) {
    const int lo = bounds[g] + 1, hi = bounds[g + 1];
    if (lo > hi) continue;
    VariantSpec v{"Context[" + std::to_string(lo) + "-" + std::to_string(hi) + "]", {}};
    for (int l = lo; l <= hi; ++l) {
      ModulationConfig m = vit;
      m.context_layers.insert(l);
      v.configs.push_back(m);
    }
    out.push_back(std::move(v));
  }
  return out;
}

VariantSpec variant_by_name(const std::string& name, int layers, double g_max) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  std::string known;
  for (auto& v : standard_variants(layers, g_max, true)) {
    if (lower(v.name) == lower(name)) return v;
    known += (known.empty() ? "" : ", ") + v.name;
  }
  throw InputError("unknown variant '" + name + "' (known: " + known + ")");
}

PipelineConfig pipeline_for(const PipelineConfig& base, ScaleProfile profile) {
  const ProfileSpec spec = profile_spec(profile);
  PipelineConfig p = base;
  p.encoder_width = spec.encoder_width;
  p.encoder_height = spec.encoder_height;
  p.search.ior_width = spec.ior;
  p.search.ior_height = spec.ior;
  return p;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

SuiteResult run_ablation_suite(std::span<const TrialSpec> trials, const EncoderWeights& weights,
                               const SuiteConfig& config) {
  if (trials.empty()) throw InputError("ablation suite: no trials");
  if (config.variants.empty()) throw InputError("ablation suite: no variants");
  for (const auto& v : config.variants) {
    if (v.configs.empty()) throw InputError("ablation suite: variant " + v.name + " has no configs");
    for (const auto& m : v.configs) m.validate(weights.layer_count());
  }

  SuiteResult out;
  if (config.n_max) {
    out.n_max = *config.n_max;
  } else {
    for (const auto& t : trials) {
      const ProfileSpec ps = profile_spec(t.profile);
      const PipelineConfig p = pipeline_for(config.base, t.profile);
      out.n_max = std::max(out.n_max, p.search.resolved_max_fixations(ps.width, ps.height));
    }
  }

  std::vector<std::vector<TrialRecord>> per_trial(trials.size());
  parallel_for(trials.size(), config.jobs, [&](std::size_t i) {
    const Trial trial = materialize(trials[i]);
    PipelineConfig p = pipeline_for(config.base, trial.profile);
    p.prior = trial.prior.value_or(ContextPrior::uniform());
    const TargetFeatures features = extract_target_features(trial.target, weights, p.target_size);
    for (const auto& v : config.variants) {
      for (std::size_t c = 0; c < v.configs.size(); ++c) {
        p.modulation = v.configs[c];
        TrialDetail d = run_trial_detailed(trial.search, features, trial.box, weights, p);
        per_trial[i].push_back({trials[i].id, v.name, c, trial.congruency, std::move(d.scanpath)});
      }
    }
  });
  for (auto& recs : per_trial)
    for (auto& r : recs) out.records.push_back(std::move(r));

  for (const auto& v : config.variants) {
    for (const char* label : {"all", "congruent", "incongruent"}) {
      std::vector<ScanpathResult> results;
      for (const auto& r : out.records) {
        if (r.variant != v.name) continue;
        if (std::string(label) != "all" && to_string(r.congruency) != label) continue;
        results.push_back(r.result);
      }
      if (results.empty()) continue;
      out.reports.push_back({v.name, label, compute_metrics(results, out.n_max)});
    }
  }
  return out;
}

namespace {

std::string fixed6(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_curve_csv(std::ostream& out, std::span<const VariantReport> reports) {
  out << "variant,congruency,n,p\n";
  for (const auto& r : reports)
    for (std::size_t n = 0; n < r.metrics.curve.size(); ++n)
      out << r.variant << "," << r.congruency << "," << (n + 1) << "," << fixed6(r.metrics.curve[n]) << "\n";
}

void write_summary_csv(std::ostream& out, std::span<const VariantReport> reports) {
  out << "variant,congruency,trials,found,not_found,avg_fixations\n";
  for (const auto& r : reports) {
    out << r.variant << "," << r.congruency << "," << r.metrics.trials << "," << r.metrics.found << ","
        << r.metrics.not_found << "," << fixed6(r.metrics.avg_fixations) << "\n";
  }
}

void write_scanpath_jsonl(std::ostream& out, std::span<const TrialRecord> records) {
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["trial"] = r.trial_id;
    j["variant"] = r.variant;
    j["config"] = r.config_index;
    j["congruency"] = to_string(r.congruency);
    j["found"] = r.result.found;
    j["n_fixations"] = r.result.n_fixations;
    auto fix = nlohmann::ordered_json::array();
    for (const auto& f : r.result.fixations) fix.push_back({f.x, f.y});
    j["fixations"] = std::move(fix);
    out << j.dump() << "\n";
  }
}

}  // namespace tct
