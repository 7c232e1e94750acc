#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tct/context_provider.hpp"
#include "tct/encoder.hpp"
#include "tct/image.hpp"
#include "tct/search.hpp"

namespace tct {

enum class ScaleProfile { Coco18Like, NatClutterLike };
enum class Congruency { Congruent, Incongruent, NotApplicable };

std::string to_string(ScaleProfile p);
ScaleProfile parse_scale_profile(const std::string& s);
std::string to_string(Congruency c);
Congruency parse_congruency(const std::string& s);

/// Fixed geometry of a scale profile plus the desk-scale encoder resolution.
struct ProfileSpec {
  int width, height;  // search image
  int ior;            // square IOR window
  int encoder_width, encoder_height;
  double target_ratio;  // default target area / image area
};
ProfileSpec profile_spec(ScaleProfile p);

struct Trial {
  std::string id;
  ScaleProfile profile = ScaleProfile::Coco18Like;
  Congruency congruency = Congruency::NotApplicable;
  ImageTensor search;
  ImageTensor target;
  Box box;
  std::optional<ContextPrior> prior;  // none = uniform (no context signal)
};

struct SceneOptions {
  double prior_sigma = 0.15;
  int placement_retries = 200;
};

/// Deterministic synthetic scene: noisy background, non-overlapping sprite
/// distractors (as many of round(density * W * H / side^2) as fit) and one
/// target sprite of side round(sqrt(ratio * W * H)). The target image is the
/// same sprite re-rendered with fresh texture on the background colour.
/// Congruent trials carry a gaussian prior centred inside the target box,
/// incongruent ones a prior centred away from it; the scene itself depends
/// only on the seed, so the two are paired.
Trial synthesize_scene(std::uint64_t seed, ScaleProfile profile, double clutter_density, double target_scale_ratio,
                       Congruency congruency, const SceneOptions& options = {});

/// Grid of cols x rows random textured tiles of side `tile`, one of which is
/// also the target image; the box is that tile.
Trial synthesize_tile_scene(std::uint64_t seed, int cols, int rows, int tile);

/// Where a trial comes from: synthesised from a seed, or image files listed
/// in a manifest.
struct TrialSpec {
  std::string id;
  ScaleProfile profile = ScaleProfile::Coco18Like;
  Congruency congruency = Congruency::NotApplicable;
  bool synthetic = true;
  // synthetic
  std::uint64_t seed = 0;
  double density = 0.3;
  double ratio = 0.04;
  SceneOptions scene;
  // files
  std::filesystem::path search_path, target_path;
  Box box;
  std::optional<ContextPrior> prior;
};

Trial materialize(const TrialSpec& spec);

/// n paired scenes; each scene yields one TrialSpec per requested congruency.
std::vector<TrialSpec> synthetic_trial_specs(std::size_t n, std::uint64_t seed, ScaleProfile profile,
                                             double density, double ratio,
                                             std::span<const Congruency> congruencies, const SceneOptions& scene = {});

struct MetricsReport {
  std::vector<double> curve;  // p(n) for n = 1..n_max
  std::size_t trials = 0;
  std::size_t found = 0;      // found within any number of fixations
  std::size_t not_found = 0;
  double avg_fixations = 0.0;  // over found trials; NaN when none found
};

MetricsReport compute_metrics(std::span<const ScanpathResult> results, int n_max);

/// Uniform random maps searched with the given params, one seeded stream per repeat.
MetricsReport random_baseline(int width, int height, const Box& box, const SearchParams& params, int n_repeats,
                              std::uint64_t seed, int n_max);

/// One named variant; several configs are pooled into one report (layer groups).
struct VariantSpec {
  std::string name;
  std::vector<ModulationConfig> configs;
};

/// TCT, TargetAlone, ContextAlone and ViT; with layer_groups also target
/// modulation from the start of each third of the depth onwards and context
/// modulation at each single layer of each third.
std::vector<VariantSpec> standard_variants(int layers, double g_max, bool layer_groups = false);
VariantSpec variant_by_name(const std::string& name, int layers, double g_max);

struct SuiteConfig {
  std::vector<VariantSpec> variants;
  /// Upsampling, target size, max_fixations and g_max-independent settings;
  /// IOR and encoder resolution come from each trial's profile.
  PipelineConfig base;
  std::optional<int> n_max;  // unset: the largest resolved max_fixations
  int jobs = 1;
};

struct TrialRecord {
  std::string trial_id;
  std::string variant;
  std::size_t config_index = 0;
  Congruency congruency = Congruency::NotApplicable;
  ScanpathResult result;
};

struct VariantReport {
  std::string variant;
  std::string congruency;  // "all", "congruent" or "incongruent"
  MetricsReport metrics;
};

struct SuiteResult {
  int n_max = 0;
  std::vector<TrialRecord> records;  // trial-major, then variant, then config
  std::vector<VariantReport> reports;
};

PipelineConfig pipeline_for(const PipelineConfig& base, ScaleProfile profile);

SuiteResult run_ablation_suite(std::span<const TrialSpec> trials, const EncoderWeights& weights,
                               const SuiteConfig& config);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions are rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

void write_curve_csv(std::ostream& out, std::span<const VariantReport> reports);
void write_summary_csv(std::ostream& out, std::span<const VariantReport> reports);
void write_scanpath_jsonl(std::ostream& out, std::span<const TrialRecord> records);

}  // namespace tct
