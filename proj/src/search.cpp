#include "tct/search.hpp"

#include "tct/errors.hpp"

namespace tct {

int SearchParams::resolved_max_fixations(int width, int height) const {
  if (max_fixations) {
    if (*max_fixations < 1) throw InputError("max_fixations must be >= 1");
    return *max_fixations;
  }
  const long cols = (width + ior_width - 1) / ior_width;
  const long rows = (height + ior_height - 1) / ior_height;
  return static_cast<int>(4 * cols * rows);
}

void validate_box(const Box& box, int width, int height) {
  if (box.w <= 0 || box.h <= 0) throw InputError("target box has zero area");
  if (box.x < 0 || box.y < 0 || box.x + box.w > width || box.y + box.h > height) {
    throw InputError("target box (" + std::to_string(box.x) + "," + std::to_string(box.y) + "," +
                     std::to_string(box.w) + "," + std::to_string(box.h) + ") lies outside the " +
                     std::to_string(width) + "x" + std::to_string(height) + " image");
  }
}

Box fixation_window(Fixation f, const SearchParams& params, int width, int height) {
  const int x0 = std::max(0, f.x - params.ior_width / 2);
  const int y0 = std::max(0, f.y - params.ior_height / 2);
  const int x1 = std::min(width, f.x - params.ior_width / 2 + params.ior_width);
  const int y1 = std::min(height, f.y - params.ior_height / 2 + params.ior_height);
  return {x0, y0, x1 - x0, y1 - y0};
}

AttentionMap upsample_map(std::span<const double> patch_map, GridDims grid, int width, int height, Upsample mode) {
  if (grid.rows <= 0 || grid.cols <= 0 || width <= 0 || height <= 0) throw ShapeError("upsample_map: zero-sized dims");
  if (patch_map.size() != static_cast<std::size_t>(grid.count())) {
    throw ShapeError("upsample_map: map length does not match the patch grid");
  }
  AttentionMap out{width, height, {}};
  if (mode == Upsample::Bilinear) {
    const ImageTensor src(1, grid.rows, grid.cols, std::vector<double>(patch_map.begin(), patch_map.end()));
    out.values = resize_bilinear(src, height, width).data();
    return out;
  }
  out.values.resize(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const int gy = std::min(grid.rows - 1, static_cast<int>(static_cast<long>(y) * grid.rows / height));
    for (int x = 0; x < width; ++x) {
      const int gx = std::min(grid.cols - 1, static_cast<int>(static_cast<long>(x) * grid.cols / width));
      out.values[static_cast<std::size_t>(y) * width + x] = patch_map[static_cast<std::size_t>(gy * grid.cols + gx)];
    }
  }
  return out;
}

ScanpathResult generate_scanpath(const AttentionMap& map, const Box& target_box, const SearchParams& params,
                                 const SnapshotHook& snapshot) {
  const int w = map.width, h = map.height;
  if (w <= 0 || h <= 0 || map.values.size() != static_cast<std::size_t>(w) * h) {
    throw ShapeError("generate_scanpath: malformed attention map");
  }
  if (params.ior_width < 1 || params.ior_height < 1) throw InputError("IOR window must be at least 1x1");
  validate_box(target_box, w, h);
  const int max_fix = params.resolved_max_fixations(w, h);

  std::vector<std::uint8_t> suppressed(map.values.size(), 0);
  std::size_t remaining = suppressed.size();
  std::optional<AttentionMap> current;
  if (snapshot) current = map;

  ScanpathResult result;
  while (result.n_fixations < max_fix && remaining > 0) {
    std::size_t best = suppressed.size();
    for (std::size_t i = 0; i < suppressed.size(); ++i) {
      if (!suppressed[i] && (best == suppressed.size() || map.values[i] > map.values[best])) best = i;
    }
    if (snapshot) snapshot(result.n_fixations, *current);
    const Fixation f{static_cast<int>(best % static_cast<std::size_t>(w)), static_cast<int>(best / static_cast<std::size_t>(w))};
    result.fixations.push_back(f);
    ++result.n_fixations;
    const Box win = fixation_window(f, params, w, h);
    if (win.intersects(target_box)) {
      result.found = true;
      break;
    }
    for (int y = win.y; y < win.y + win.h; ++y) {
      for (int x = win.x; x < win.x + win.w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (!suppressed[i]) {
          suppressed[i] = 1;
          --remaining;
          if (current) current->values[i] = 0.0;
        }
      }
    }
  }
  return result;
}

Matrix search_tokens(const ImageTensor& search, const EncoderWeights& weights, const PipelineConfig& config,
                     GridDims* grid) {
  const bool resize = config.encoder_width > 0 && config.encoder_height > 0;
  const ImageTensor sized = resize ? resize_bilinear(search, config.encoder_height, config.encoder_width) : search;
  const int p = weights.config().patch_size;
  const GridDims g = patch_grid(sized, p);
  if (grid) *grid = g;
  if (weights.config().use_position_embeddings && weights.config().position_grid != g) {
    throw ShapeError("search patch grid " + std::to_string(g.rows) + "x" + std::to_string(g.cols) +
                     " does not match the position table grid " + std::to_string(weights.config().position_grid.rows) +
                     "x" + std::to_string(weights.config().position_grid.cols) +
                     "; set the encoder input size or disable position embeddings");
  }
  return embed(patchify(sized, p), weights, weights.config().use_position_embeddings);
}

TrialDetail run_trial_detailed(const ImageTensor& search, const TargetFeatures& target, const Box& target_box,
                               const EncoderWeights& weights, const PipelineConfig& config,
                               const SnapshotHook& snapshot) {
  validate_box(target_box, search.width(), search.height());
  const ModulationConfig& mod = config.modulation;
  mod.validate(weights.layer_count());

  TrialDetail detail;
  const Matrix tokens = search_tokens(search, weights, config, &detail.grid);
  std::vector<double> gain;
  if (!mod.context_layers.empty()) gain = context_gain(config.prior, detail.grid, mod.g_max);
  const bool targeted = !mod.target_layers.empty();
  EncoderRun run = encode(tokens, weights, mod, &target.queries, gain, targeted);
  for (auto& st : run.states) detail.key_masks.push_back(std::move(st.key_masks));

  detail.class_map = std::move(run.class_map);
  detail.map = upsample_map(detail.class_map, detail.grid, search.width(), search.height(), config.upsample);
  detail.scanpath = generate_scanpath(detail.map, target_box, config.search, snapshot);
  return detail;
}

ScanpathResult run_trial(const ImageTensor& search, const ImageTensor& target, const Box& target_box,
                         const EncoderWeights& weights, const PipelineConfig& config) {
  const TargetFeatures features = extract_target_features(target, weights, config.target_size);
  return run_trial_detailed(search, features, target_box, weights, config).scanpath;
}

}  // namespace tct
