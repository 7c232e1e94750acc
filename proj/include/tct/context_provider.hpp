#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tct/encoder.hpp"

namespace tct {

enum class PriorKind { Uniform, SpatialGaussian, File };

std::string to_string(PriorKind k);
PriorKind parse_prior_kind(const std::string& s);

/// Source of the per-patch context gain. Coordinates are normalised to [0,1]
/// with x to the right and y downwards.
struct ContextPrior {
  PriorKind kind = PriorKind::Uniform;
  double center_x = 0.5;
  double center_y = 0.5;
  double sigma = 0.15;
  GridDims grid;               // file priors only
  std::vector<double> values;  // file priors only, row-major

  static ContextPrior uniform() { return {}; }
  static ContextPrior gaussian(double cx, double cy, double sigma);
};

/// Plain text: "rows cols" then rows*cols whitespace-separated gains.
ContextPrior load_prior_file(const std::filesystem::path& path);
ContextPrior parse_prior_text(const std::string& text);

/// Gain vector of length grid.count(), every entry in [0, g_max].
std::vector<double> context_gain(const ContextPrior& prior, GridDims grid, double g_max);

}  // namespace tct
