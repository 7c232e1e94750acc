#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "tct/bench.hpp"
#include "tct/errors.hpp"
#include "tct/search.hpp"
#include "test_util.hpp"

using tct::AttentionMap;
using tct::Box;
using tct::SearchParams;

namespace {

AttentionMap flat(int w, int h, double v) { return {w, h, std::vector<double>(static_cast<std::size_t>(w) * h, v)}; }

SearchParams window(int w, int h, std::optional<int> max_fix = std::nullopt) {
  SearchParams p;
  p.ior_width = w;
  p.ior_height = h;
  p.max_fixations = max_fix;
  return p;
}

// Replays the search rule with the suppression written into the map itself
// (suppressed = -1), scanning for the first strict maximum in raster order.
int replay(AttentionMap map, const Box& box, int iw, int ih) {
  for (int n = 1;; ++n) {
    int best = -1;
    for (int i = 0; i < map.width * map.height; ++i)
      if (map.values[static_cast<std::size_t>(i)] >= 0 && (best < 0 || map.values[static_cast<std::size_t>(i)] > map.values[static_cast<std::size_t>(best)])) best = i;
    if (best < 0) return -1;
    const int x = best % map.width, y = best / map.width;
    const int x0 = std::max(0, x - iw / 2), x1 = std::min(map.width, x - iw / 2 + iw);
    const int y0 = std::max(0, y - ih / 2), y1 = std::min(map.height, y - ih / 2 + ih);
    if (x0 < box.x + box.w && box.x < x1 && y0 < box.y + box.h && box.y < y1) return n;
    for (int yy = y0; yy < y1; ++yy)
      for (int xx = x0; xx < x1; ++xx) map.values[static_cast<std::size_t>(yy * map.width + xx)] = -1;
  }
}

}  // namespace

TEST_CASE("upsample constant and peak") {
  const std::vector<double> c(6, 0.25);
  for (double v : tct::upsample_map(c, {2, 3}, 30, 20).values) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

  std::vector<double> hot(12, 0.0);
  hot[5] = 1.0;  // row 1, col 1 of a 3x4 grid
  const auto m = tct::upsample_map(hot, {3, 4}, 32, 24);
  const auto best = tct::argmax(m.values);
  const int x = static_cast<int>(best % 32), y = static_cast<int>(best / 32);
  CHECK(x >= 8 + 3);
  CHECK(x <= 8 + 4);
  CHECK(y >= 8 + 3);
  CHECK(y <= 8 + 4);
  CHECK(m.at(x, y) == 1.0 - 2 * (1.0 / 16) + 1.0 / 256);  // half a pixel off the centre in both axes
}

TEST_CASE("bilinear upsample matches the interpolation formula") {
  const std::vector<double> grid{0, 0, 0, 1};
  const auto m = tct::upsample_map(grid, {2, 2}, 4, 4);
  auto source = [](int i) { return std::clamp((i + 0.5) * 0.5 - 0.5, 0.0, 1.0); };
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(m.at(x, y) == doctest::Approx(source(x) * source(y)).epsilon(1e-15));

  const auto nn = tct::upsample_map(grid, {2, 2}, 4, 4, tct::Upsample::Nearest);
  CHECK(nn.at(1, 1) == 0.0);
  CHECK(nn.at(2, 2) == 1.0);
  CHECK(nn.at(3, 1) == 0.0);
  CHECK_THROWS_AS(tct::upsample_map(grid, {2, 2}, 0, 4), tct::ShapeError);
  CHECK_THROWS_AS(tct::upsample_map(grid, {1, 3}, 4, 4), tct::ShapeError);
}

TEST_CASE("scanpath examples") {
  AttentionMap m = flat(10, 10, 0.1);
  m.values[5 * 10 + 5] = 1.0;
  auto r = tct::generate_scanpath(m, {4, 4, 3, 3}, window(2, 2));
  CHECK(r.found);
  CHECK(r.n_fixations == 1);
  CHECK(r.fixations.front() == tct::Fixation{5, 5});

  AttentionMap two = flat(20, 10, 0.0);
  two.values[2 * 20 + 2] = 1.0;
  two.values[7 * 20 + 17] = 0.5;
  r = tct::generate_scanpath(two, {16, 6, 2, 2}, window(3, 3));
  CHECK(r.found);
  CHECK(r.n_fixations == 2);
  CHECK(r.fixations[1] == tct::Fixation{17, 7});

  const Box corner{7, 7, 1, 1};
  const auto u = tct::generate_scanpath(flat(8, 8, 0.5), corner, window(2, 2, SearchParams::kUnbounded));
  CHECK(u.found);
  CHECK(u.n_fixations == replay(flat(8, 8, 0.5), corner, 2, 2));

  CHECK_THROWS_AS(tct::generate_scanpath(m, {1, 1, 0, 3}, window(2, 2)), tct::InputError);
  CHECK_THROWS_AS(tct::generate_scanpath(m, {8, 8, 3, 3}, window(2, 2)), tct::InputError);
}

TEST_CASE("max fixations and exhaustion") {
  const auto r = tct::generate_scanpath(flat(8, 8, 1.0), {7, 7, 1, 1}, window(1, 1, 5));
  CHECK_FALSE(r.found);
  CHECK(r.n_fixations == 5);
  CHECK(window(48, 48).resolved_max_fixations(512, 320) == 4 * 11 * 7);
}

TEST_CASE("scanpath properties on random maps") {
  tct::Rng rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    const int w = static_cast<int>(rng.uniform_int(1, 16)), h = static_cast<int>(rng.uniform_int(1, 16));
    AttentionMap m{w, h, {}};
    for (int i = 0; i < w * h; ++i) m.values.push_back(std::floor(rng.uniform() * 4));  // many ties
    const int bw = static_cast<int>(rng.uniform_int(1, w)), bh = static_cast<int>(rng.uniform_int(1, h));
    const Box box{static_cast<int>(rng.uniform_int(0, w - bw)), static_cast<int>(rng.uniform_int(0, h - bh)), bw, bh};
    const int iw = static_cast<int>(rng.uniform_int(1, 4)), ih = static_cast<int>(rng.uniform_int(1, 4));
    const auto r = tct::generate_scanpath(m, box, window(iw, ih, SearchParams::kUnbounded));
    CHECK(r.found);
    CHECK(r.n_fixations == replay(m, box, iw, ih));

    AttentionMap scaled = m;
    for (double& v : scaled.values) v = v * 3.5 + 0.0;
    CHECK(tct::generate_scanpath(scaled, box, window(iw, ih, SearchParams::kUnbounded)) == r);

    for (std::size_t k = 0; k + 1 < r.fixations.size(); ++k)
      CHECK_FALSE(tct::fixation_window(r.fixations[k], window(iw, ih), w, h).intersects(box));
    CHECK(tct::fixation_window(r.fixations.back(), window(iw, ih), w, h).intersects(box));
  }
}

TEST_CASE("snapshots show the map each fixation was chosen from") {
  AttentionMap m = flat(6, 6, 0.0);
  for (int i = 0; i < 36; ++i) m.values[static_cast<std::size_t>(i)] = i % 7;
  std::vector<AttentionMap> seen;
  const auto r = tct::generate_scanpath(m, {0, 0, 1, 1}, window(1, 1, SearchParams::kUnbounded),
                                        [&](int, const AttentionMap& s) { seen.push_back(s); });
  REQUIRE(seen.size() == static_cast<std::size_t>(r.n_fixations));
  CHECK(seen.front().values == m.values);
  for (std::size_t k = 1; k < seen.size(); ++k) {
    const auto& prev = r.fixations[k - 1];
    CHECK(seen[k].at(prev.x, prev.y) == 0.0);
  }
}

TEST_CASE("run_trial is deterministic") {
  tct::EncoderConfig c;
  c.patch_size = 8;
  c.hidden_dim = 12;
  c.heads = 3;
  c.layers = 4;
  c.mlp_dim = 16;
  c.position_grid = {5, 8};
  const auto w = tct::EncoderWeights::seeded_random(c, 123);
  const tct::Trial t = tct::synthesize_scene(5, tct::ScaleProfile::Coco18Like, 0.3, 0.04, tct::Congruency::NotApplicable);
  tct::PipelineConfig p;
  p.encoder_width = 64;
  p.encoder_height = 40;
  p.target_size = 16;
  const auto a = tct::run_trial(t.search, t.target, t.box, w, p);
  const auto b = tct::run_trial(t.search, t.target, t.box, w, p);
  CHECK(a == b);
  CHECK(a.n_fixations >= 1);

  p.encoder_width = 0;  // native 512x320 does not match the 5x8 position table
  CHECK_THROWS_AS(tct::run_trial(t.search, t.target, t.box, w, p), tct::ShapeError);
}

TEST_CASE("patch-aligned target copy is found in one fixation") {
  const auto w = tct::EncoderWeights::pixel_similarity(tct::EncoderConfig::pixel_similarity_default());
  tct::PipelineConfig p;
  p.modulation.target_layers = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  p.search = window(4, 4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const tct::Trial t = tct::synthesize_tile_scene(seed, 4, 4, 4);
    const auto r = tct::run_trial(t.search, t.target, t.box, w, p);
    CHECK(r.found);
    CHECK(r.n_fixations == 1);
  }
}
