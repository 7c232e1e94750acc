#include <cmath>
#include <fstream>

#include "doctest.h"
#include "tct/context_provider.hpp"
#include "tct/errors.hpp"
#include "tct/target_features.hpp"
#include "test_util.hpp"

using tct::Matrix;

namespace {

tct::ImageTensor random_image(tct::Rng& rng, int h, int w) {
  tct::ImageTensor img(3, h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(c, y, x) = rng.uniform();
  return img;
}

const tct::EncoderWeights& pixel_weights() {
  static const auto w = tct::EncoderWeights::pixel_similarity(tct::EncoderConfig::pixel_similarity_default());
  return w;
}

}  // namespace

TEST_CASE("target features shape and determinism") {
  tct::Rng rng(1);
  const auto target = random_image(rng, 4, 4);
  const auto f = tct::extract_target_features(target, pixel_weights());
  CHECK(f.patch_count == 1);
  REQUIRE(f.queries.size() == 12);
  for (const auto& layer : f.queries) CHECK(layer.front().rows() == 1);

  const auto again = tct::extract_target_features(target, pixel_weights());
  for (std::size_t l = 0; l < 12; ++l) CHECK(tct::bitwise_equal(f.queries[l][0], again.queries[l][0]));

  const auto resized = tct::extract_target_features(target, pixel_weights(), 12);
  CHECK(resized.patch_count == 9);
  CHECK_THROWS_AS(tct::extract_target_features(random_image(rng, 5, 4), pixel_weights()), tct::ShapeError);
}

TEST_CASE("pixel-similarity first-layer target queries are the normalised pixels") {
  tct::Rng rng(2);
  const auto target = random_image(rng, 8, 4);
  const auto f = tct::extract_target_features(target, pixel_weights());
  const Matrix patches = tct::patchify(target, 4);
  for (std::size_t r = 0; r < patches.rows(); ++r) {
    double norm = 0;
    for (double v : patches.row(r)) norm += v * v;
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < patches.cols(); ++c)
      CHECK(f.queries[0][0](r, c) == doctest::Approx(patches(r, c) / norm).epsilon(1e-14));
  }
}

TEST_CASE("shuffling target patches permutes queries but keeps the key mask") {
  tct::Rng rng(3);
  const auto target = random_image(rng, 8, 8);
  tct::ImageTensor shuffled(3, 8, 8);
  // swap the quadrants diagonally
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) shuffled.at(c, (y + 4) % 8, (x + 4) % 8) = target.at(c, y, x);
  const auto a = tct::extract_target_features(target, pixel_weights());
  const auto b = tct::extract_target_features(shuffled, pixel_weights());
  const Matrix search = tct::project_qkv(tct::embed(tct::patchify(random_image(rng, 16, 16), 4), pixel_weights(), false),
                                         pixel_weights(), 0)
                            .q[0]
                            .row_block(1, 16);
  auto close = [](std::span<const double> x, std::span<const double> y) {
    double d = 0;
    for (std::size_t i = 0; i < x.size(); ++i) d = std::max(d, std::fabs(x[i] - y[i]));
    return d < 1e-12;
  };
  for (std::size_t l = 0; l < 12; ++l) {
    CHECK(close(a.queries[l][0].row(0), b.queries[l][0].row(3)));
    CHECK(close(a.queries[l][0].row(1), b.queries[l][0].row(2)));
    CHECK(close(a.queries[l][0].row(2), b.queries[l][0].row(1)));
  }
  CHECK(tct::compute_target_mask(a.queries[0][0], search, 96).key_mask ==
        tct::compute_target_mask(b.queries[0][0], search, 96).key_mask);
}

TEST_CASE("context gain") {
  const tct::GridDims grid{4, 4};
  for (double g : tct::context_gain(tct::ContextPrior::uniform(), grid, 1.0)) CHECK(g == 0.0);

  // sigma -> 0 at a patch centre
  const auto sharp = tct::context_gain(tct::ContextPrior::gaussian(0.375, 0.625, 1e-3), grid, 0.8);
  for (std::size_t j = 0; j < 16; ++j) {
    if (j == 2 * 4 + 1) CHECK(sharp[j] == doctest::Approx(0.8));
    else CHECK(sharp[j] < 1e-12);
  }

  const auto g = tct::context_gain(tct::ContextPrior::gaussian(0.5, 0.5, 0.25), grid, 1.0);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      const double px = (c + 0.5) / 4, py = (r + 0.5) / 4;
      const double expect = std::exp(-((px - 0.5) * (px - 0.5) + (py - 0.5) * (py - 0.5)) / (2 * 0.25 * 0.25));
      CHECK(g[static_cast<std::size_t>(r * 4 + c)] == doctest::Approx(expect).epsilon(1e-14));
    }
  CHECK_THROWS_AS(tct::context_gain(tct::ContextPrior::gaussian(0.5, 0.5, 0.0), grid, 1.0), tct::InputError);
}

TEST_CASE("gaussian gains are translation covariant") {
  const tct::GridDims grid{5, 6};
  const auto a = tct::context_gain(tct::ContextPrior::gaussian(0.3, 0.4, 0.2), grid, 1.0);
  const auto b = tct::context_gain(tct::ContextPrior::gaussian(0.3 + 1.0 / 6, 0.4, 0.2), grid, 1.0);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c + 1 < 6; ++c)
      CHECK(b[static_cast<std::size_t>(r * 6 + c + 1)] == doctest::Approx(a[static_cast<std::size_t>(r * 6 + c)]).epsilon(1e-12));
}

TEST_CASE("file priors") {
  const auto p = tct::parse_prior_text("2 3\n0.5 2.0 -1\n0 0.1 0.2\n");
  const auto g = tct::context_gain(p, {2, 3}, 1.0);
  CHECK(g == std::vector<double>{0.5, 1.0, 0.0, 0.0, 0.1, 0.2});
  CHECK_THROWS_AS(tct::context_gain(p, {3, 2}, 1.0), tct::InputError);
  CHECK_THROWS_AS(tct::parse_prior_text("2 2\n1 2 3\n"), tct::InputError);
  CHECK_THROWS_AS(tct::parse_prior_text("x\n"), tct::InputError);

  const auto dir = testutil::temp_dir("prior");
  std::ofstream(dir / "p.txt") << "1 2\n0.25 0.75\n";
  CHECK(tct::load_prior_file(dir / "p.txt").values == std::vector<double>{0.25, 0.75});
}
