#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "tct/context_provider.hpp"
#include "tct/encoder.hpp"
#include "tct/image.hpp"
#include "tct/target_features.hpp"
#include "tct/tcab.hpp"

namespace tct {

/// Image-resolution attention map, row-major, non-negative.
struct AttentionMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Axis-aligned pixel rectangle [x, x+w) x [y, y+h).
struct Box {
  int x = 0, y = 0, w = 0, h = 0;
  long area() const { return static_cast<long>(w) * h; }
  bool intersects(const Box& o) const { return x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h; }
  bool operator==(const Box&) const = default;
};

enum class Upsample { Bilinear, Nearest };

struct SearchParams {
  int ior_width = 48;
  int ior_height = 48;
  /// Unset: 4 * ceil(W / ior_w) * ceil(H / ior_h).
  std::optional<int> max_fixations;

  static constexpr int kUnbounded = std::numeric_limits<int>::max();
  int resolved_max_fixations(int width, int height) const;
};

struct Fixation {
  int x = 0, y = 0;
  bool operator==(const Fixation&) const = default;
};

struct ScanpathResult {
  std::vector<Fixation> fixations;
  bool found = false;
  int n_fixations = 0;
  bool operator==(const ScanpathResult&) const = default;
};

/// Throws InputError unless the box has positive area and lies inside the image.
void validate_box(const Box& box, int width, int height);

/// IOR / overlap window for a fixation, clipped to the image.
Box fixation_window(Fixation f, const SearchParams& params, int width, int height);

/// Patch-grid map to image resolution. Bilinear uses half-pixel centres with
/// edge clamping, so each patch centre keeps its patch value.
AttentionMap upsample_map(std::span<const double> patch_map, GridDims grid, int width, int height,
                          Upsample mode = Upsample::Bilinear);

/// Called before every fixation with its 0-based index and the map it is
/// selected from (pixels suppressed so far set to 0).
using SnapshotHook = std::function<void(int, const AttentionMap&)>;

/// Repeated argmax over unsuppressed pixels (raster-order tie-break) with
/// permanent inhibition of return.
ScanpathResult generate_scanpath(const AttentionMap& map, const Box& target_box, const SearchParams& params,
                                 const SnapshotHook& snapshot = {});

/// Everything that turns (search, target, box) into a scanpath.
struct PipelineConfig {
  /// Encoder input resolution for the search image; 0 keeps the native size.
  int encoder_width = 0;
  int encoder_height = 0;
  /// Square target resolution; 0 keeps the native size.
  int target_size = 0;
  ModulationConfig modulation;
  ContextPrior prior;
  SearchParams search;
  Upsample upsample = Upsample::Bilinear;
};

struct TrialDetail {
  ScanpathResult scanpath;
  GridDims grid;
  std::vector<double> class_map;  // patch-grid map
  AttentionMap map;               // image-resolution map before any IOR
  /// Per-layer, per-head reduced key masks (empty where target modulation is off).
  std::vector<std::vector<std::vector<std::uint8_t>>> key_masks;
};

/// Search-stream tokens for an image at the configured encoder resolution.
Matrix search_tokens(const ImageTensor& search, const EncoderWeights& weights, const PipelineConfig& config,
                     GridDims* grid = nullptr);

TrialDetail run_trial_detailed(const ImageTensor& search, const TargetFeatures& target, const Box& target_box,
                               const EncoderWeights& weights, const PipelineConfig& config,
                               const SnapshotHook& snapshot = {});

ScanpathResult run_trial(const ImageTensor& search, const ImageTensor& target, const Box& target_box,
                         const EncoderWeights& weights, const PipelineConfig& config);

}  // namespace tct
