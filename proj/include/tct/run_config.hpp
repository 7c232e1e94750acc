#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "tct/bench.hpp"
#include "tct/encoder.hpp"
#include "tct/search.hpp"

namespace tct {

struct BenchSettings {
  ScaleProfile profile = ScaleProfile::Coco18Like;
  int trials = 20;
  double density = 0.3;
  std::optional<double> ratio;  // unset: the profile's target ratio
  std::vector<Congruency> congruencies{Congruency::Congruent, Congruency::Incongruent};
  std::vector<std::string> variants{"TCT", "TargetAlone", "ContextAlone", "ViT"};
  bool layer_groups = false;
  std::optional<int> n_max;
  int jobs = 1;
  std::filesystem::path manifest;  // empty: synthesise scenes
};

/// Everything a run needs; every field has a default, the config file and
/// command line override them.
struct RunConfig {
  EncoderConfig encoder = EncoderConfig::pixel_similarity_default();
  std::filesystem::path weights_file;    // file-loaded profile only
  std::optional<std::uint64_t> weight_seed;  // seeded-random; unset: derived from seed
  PipelineConfig pipeline;
  std::filesystem::path prior_file;  // [prior] kind = file
  BenchSettings bench;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "tct-out";

  RunConfig();
  /// Throws InputError on any inconsistency (layer indices vs depth, ...).
  void validate() const;
  std::uint64_t resolved_weight_seed() const;
};

/// Parses "6-12", "3", "1,3,5-7" or "none" into a set of 1-based layers.
std::set<int> parse_layer_set(const std::string& text);
std::string format_layer_set(const std::set<int>& layers);

/// INI-style file: [section] headers and key = value lines; see README.
RunConfig parse_run_config(std::istream& in, const std::string& source_name = "config");
RunConfig load_run_config(const std::filesystem::path& path);

/// Writes the fully resolved config in the same grammar (re-loadable).
void write_effective_config(std::ostream& out, const RunConfig& config);

/// Builds (or loads) the encoder weights the config describes.
EncoderWeights build_weights(const RunConfig& config);

}  // namespace tct
