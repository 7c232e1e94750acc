// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: tct_acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tct/bench.hpp"
#include "tct/cli.hpp"
#include "tct/encoder.hpp"
#include "tct/rng.hpp"
#include "tct/search.hpp"
#include "tct/target_features.hpp"
#include "test_util.hpp"

namespace {

using tct::Matrix;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1: kernels against naive implementations --------------------------------

Matrix naive_softmax(const Matrix& m, double scale) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    long double total = 0;
    std::vector<long double> e(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) total += e[j] = std::exp(static_cast<long double>(scale) * m(i, j));
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = static_cast<double>(e[j] / total);
  }
  return out;
}

Matrix naive_layernorm(const Matrix& m, const std::vector<double>& g, const std::vector<double>& b, double eps) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    long double mean = 0, var = 0;
    for (std::size_t j = 0; j < m.cols(); ++j) mean += m(i, j);
    mean /= m.cols();
    for (std::size_t j = 0; j < m.cols(); ++j) var += (m(i, j) - mean) * (m(i, j) - mean);
    var /= m.cols();
    for (std::size_t j = 0; j < m.cols(); ++j)
      out(i, j) = static_cast<double>((m(i, j) - mean) / std::sqrt(var + eps) * g[j] + b[j]);
  }
  return out;
}

Outcome kernels() {
  tct::Rng rng(2024, "acceptance-kernels");
  double worst = 0;
  int keeptop_bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto r = static_cast<std::size_t>(rng.uniform_int(1, 16));
    const auto k = static_cast<std::size_t>(rng.uniform_int(1, 16));
    const auto c = static_cast<std::size_t>(rng.uniform_int(1, 16));
    const Matrix a = testutil::random_matrix(rng, r, k, -3, 3), b = testutil::random_matrix(rng, k, c, -3, 3);
    worst = std::max(worst, testutil::max_abs_diff(tct::matmul(a, b), testutil::naive_matmul(a, b)));
    worst = std::max(worst, testutil::max_abs_diff(tct::matmul_transposed(a, b.transposed()), testutil::naive_matmul(a, b)));

    const double scale = rng.uniform(0.05, 4.0);
    worst = std::max(worst, testutil::max_abs_diff(tct::softmax_rows(a, scale), naive_softmax(a, scale)));

    std::vector<double> g(k), bias(k);
    for (std::size_t j = 0; j < k; ++j) {
      g[j] = rng.uniform(0.5, 1.5);
      bias[j] = rng.uniform(-0.5, 0.5);
    }
    worst = std::max(worst, testutil::max_abs_diff(tct::layernorm_rows(a, g, bias, 1e-6), naive_layernorm(a, g, bias, 1e-6)));

    // keeptop on coarsely quantised values so ties are common
    Matrix q = a;
    for (double& v : q.values()) v = std::round(v);
    const Matrix kt = tct::keeptop_rows(q);
    for (std::size_t i = 0; i < r; ++i) {
      double sum = 0;
      std::size_t first = 0;
      for (std::size_t j = 0; j < k; ++j) {
        sum += kt(i, j);
        if (q(i, j) > q(i, first)) first = j;
      }
      if (sum != 1.0 || kt(i, first) != 1.0) ++keeptop_bad;
    }
  }
  return {worst <= 1e-6 && keeptop_bad == 0,
          fmt("max |kernel - naive| = %.3g over 1000 shapes, keeptop row violations = %d", worst, keeptop_bad)};
}

// ---- 2 and 3: no-op identity and the final-layer exemption -----------------

struct RandomSetup {
  tct::EncoderWeights weights;
  tct::ImageTensor search, target;
  tct::Box box;
};

RandomSetup random_setup(std::uint64_t seed) {
  tct::Rng rng(seed, "acceptance-config");
  tct::EncoderConfig c;
  c.channels = 3;
  c.patch_size = static_cast<int>(rng.uniform_int(1, 4)) * 2;
  c.heads = static_cast<int>(rng.uniform_int(1, 4));
  c.hidden_dim = c.heads * static_cast<int>(rng.uniform_int(1, 6));
  c.layers = static_cast<int>(rng.uniform_int(1, 6));
  c.mlp_dim = static_cast<int>(rng.uniform_int(1, 24));
  c.norm = rng.uniform() < 0.7 ? tct::NormKind::Layer : tct::NormKind::None;
  c.use_position_embeddings = rng.uniform() < 0.7;
  c.normalize_patches = rng.uniform() < 0.3;
  c.position_grid = {static_cast<int>(rng.uniform_int(1, 6)), static_cast<int>(rng.uniform_int(1, 6))};
  auto weights = tct::EncoderWeights::seeded_random(c, tct::derive_seed(seed, "weights"));
  const int h = c.position_grid.rows * c.patch_size, w = c.position_grid.cols * c.patch_size;
  auto noise = [&](int hh, int ww) {
    std::vector<double> px(static_cast<std::size_t>(3 * hh * ww));
    for (double& v : px) v = rng.uniform();
    return tct::ImageTensor(3, hh, ww, std::move(px));
  };
  tct::ImageTensor search = noise(h, w), target = noise(c.patch_size * 2, c.patch_size * 2);
  return {std::move(weights), std::move(search), std::move(target), {0, 0, 1, 1}};
}

tct::PipelineConfig native_pipeline() {
  tct::PipelineConfig p;
  p.search.ior_width = p.search.ior_height = 2;
  p.search.max_fixations = 5;
  p.prior = tct::ContextPrior::gaussian(0.3, 0.6, 0.2);
  p.modulation.g_max = 0.5;
  return p;
}

// Attention maps of the unmodulated runs, kept for criterion 3.
std::vector<tct::AttentionMap> g_plain_maps;

Outcome no_op_identity() {
  int mismatches = 0;
  g_plain_maps.clear();
  for (std::uint64_t s = 0; s < 50; ++s) {
    const RandomSetup setup = random_setup(s);
    tct::PipelineConfig p = native_pipeline();
    tct::GridDims grid;
    const Matrix tokens = tct::search_tokens(setup.search, setup.weights, p, &grid);
    const tct::EncoderRun plain = tct::plain_encode(tokens, setup.weights);
    const tct::EncoderRun run = tct::encode(tokens, setup.weights, p.modulation, nullptr, {});
    bool same = tct::bitwise_equal(run.final_hidden, plain.final_hidden) &&
                tct::bitwise_equal(run.class_map, plain.class_map);
    for (std::size_t h = 0; h < plain.final_attention.size(); ++h)
      same = same && tct::bitwise_equal(run.final_attention[h], plain.final_attention[h]);

    const auto features = tct::extract_target_features(setup.target, setup.weights);
    const tct::TrialDetail detail = tct::run_trial_detailed(setup.search, features, setup.box, setup.weights, p);
    const tct::AttentionMap reference =
        tct::upsample_map(plain.class_map, grid, setup.search.width(), setup.search.height());
    same = same && tct::bitwise_equal(detail.map.values, reference.values);
    if (!same) ++mismatches;
    g_plain_maps.push_back(detail.map);
  }
  return {mismatches == 0, fmt("%d of 50 seeded configs differ from the plain encoder", mismatches)};
}

Outcome final_layer_exemption() {
  if (g_plain_maps.size() != 50) no_op_identity();
  int mismatches = 0, earlier_changes = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const RandomSetup setup = random_setup(s);
    const int L = setup.weights.config().layers;
    tct::PipelineConfig p = native_pipeline();
    p.modulation.target_layers = {L};
    p.modulation.context_layers = {L};
    const auto features = tct::extract_target_features(setup.target, setup.weights);
    const auto detail = tct::run_trial_detailed(setup.search, features, setup.box, setup.weights, p);
    if (!tct::bitwise_equal(detail.map.values, g_plain_maps[s].values)) ++mismatches;
    if (L > 1) {
      // sanity: the same modulation one layer earlier is not a no-op
      p.modulation.target_layers = {L - 1};
      p.modulation.context_layers = {L - 1};
      const auto early = tct::run_trial_detailed(setup.search, features, setup.box, setup.weights, p);
      if (!tct::bitwise_equal(early.map.values, g_plain_maps[s].values)) ++earlier_changes;
    }
  }
  return {mismatches == 0,
          fmt("%d of 50 layer-L runs differ from the unmodulated map (layer L-1 modulation changed %d maps)",
              mismatches, earlier_changes)};
}

// ---- 4: identity retrieval ------------------------------------------------------

Outcome identity_retrieval() {
  const auto weights = tct::EncoderWeights::pixel_similarity(tct::EncoderConfig::pixel_similarity_default());
  const int L = weights.config().layers;
  const int P = weights.config().patch_size;
  tct::PipelineConfig p;
  for (int l = 1; l <= L; ++l) p.modulation.target_layers.insert(l);
  p.search.ior_width = p.search.ior_height = P;
  int found_first = 0, hot_layer1 = 0, hot_all = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const tct::Trial t = tct::synthesize_tile_scene(tct::derive_seed(seed, "acceptance-tiles"), 4, 4, P);
    const auto features = tct::extract_target_features(t.target, weights);
    const auto detail = tct::run_trial_detailed(t.search, features, t.box, weights, p);
    if (detail.scanpath.found && detail.scanpath.n_fixations == 1) ++found_first;

    // brute force: cosine between raw pixel patches
    const Matrix patches = tct::patchify(t.search, P);
    const Matrix tp = tct::patchify(t.target, P);
    std::vector<double> cosine(patches.rows());
    for (std::size_t i = 0; i < patches.rows(); ++i) {
      long double dot = 0, na = 0, nb = 0;
      for (std::size_t j = 0; j < patches.cols(); ++j) {
        dot += static_cast<long double>(patches(i, j)) * tp(0, j);
        na += static_cast<long double>(patches(i, j)) * patches(i, j);
        nb += static_cast<long double>(tp(0, j)) * tp(0, j);
      }
      cosine[i] = static_cast<double>(dot / std::sqrt(na * nb));
    }
    const std::size_t expect = tct::argmax(cosine);
    auto hot = [&](int layer0) {
      const auto& mask = detail.key_masks[static_cast<std::size_t>(layer0)][0];
      std::size_t count = 0, at = 0;
      for (std::size_t j = 0; j < mask.size(); ++j)
        if (mask[j]) ++count, at = j;
      return count == 1 && at == expect;
    };
    if (hot(0)) ++hot_layer1;
    bool every = true;
    for (int l = 0; l < L; ++l) every = every && hot(l);
    if (every) ++hot_all;
  }
  return {found_first >= 95 && hot_layer1 == 100 && hot_all == 100,
          fmt("found in 1 fixation: %d/100; hot index = pixel-cosine argmax: layer 1 %d/100, all layers %d/100",
              found_first, hot_layer1, hot_all)};
}

// ---- 5: random baseline ---------------------------------------------------------

Outcome random_baseline_check() {
  // 10x7 image with a 1x1 window: exactly k = 70 cells.
  tct::SearchParams params;
  params.ior_width = params.ior_height = 1;
  const int k = 70;
  const auto m = tct::random_baseline(10, 7, {6, 4, 1, 1}, params, 10000, 99, k);
  const double mean_expect = (k + 1) / 2.0;
  double worst = 0;
  for (int n = 1; n <= k; ++n) worst = std::max(worst, std::fabs(m.curve[n - 1] - static_cast<double>(n) / k));
  const double rel = std::fabs(m.avg_fixations - mean_expect) / mean_expect;
  return {rel <= 0.05 && worst <= 0.02 && m.found == 10000,
          fmt("mean %.3f vs %.1f (%.2f%%), max |p(n) - n/k| = %.4f", m.avg_fixations, mean_expect, 100 * rel, worst)};
}

// ---- 6 and 7: ablation ordering and congruency robustness --------------------

struct AblationRun {
  bool done = false;
  std::map<std::string, double> avg;  // "variant/congruency"
};
AblationRun g_ablation;

const AblationRun& ablation_run() {
  if (g_ablation.done) return g_ablation;
  const auto weights = tct::EncoderWeights::pixel_similarity(tct::EncoderConfig::pixel_similarity_default());
  const std::vector<tct::Congruency> both{tct::Congruency::Congruent, tct::Congruency::Incongruent};
  const auto specs = tct::synthetic_trial_specs(200, 7, tct::ScaleProfile::Coco18Like, 0.3, 0.04, both);
  tct::SuiteConfig suite;
  suite.base.target_size = 12;
  suite.base.modulation = tct::ModulationConfig::tct_default(12);
  suite.base.modulation.g_max = 0.01;
  suite.variants = tct::standard_variants(12, 0.01);
  const auto result = tct::run_ablation_suite(specs, weights, suite);
  for (const auto& r : result.reports) g_ablation.avg[r.variant + "/" + r.congruency] = r.metrics.avg_fixations;
  g_ablation.done = true;
  return g_ablation;
}

Outcome ablation_ordering() {
  const auto& a = ablation_run().avg;
  const double tct_ = a.at("TCT/congruent"), target = a.at("TargetAlone/congruent"), vit = a.at("ViT/congruent");
  const double gain = (vit - tct_) / vit;
  return {tct_ <= target && target <= vit && gain >= 0.20,
          fmt("congruent avg fixations TCT %.3f, TargetAlone %.3f, ViT %.3f (TCT %.1f%% better than ViT)", tct_,
              target, vit, 100 * gain)};
}

Outcome congruency_robustness() {
  const auto& a = ablation_run().avg;
  auto gap = [&](const std::string& v) { return a.at(v + "/incongruent") - a.at(v + "/congruent"); };
  auto rel = [&](const std::string& v) { return gap(v) / a.at(v + "/congruent"); };
  const double g_ctx = gap("ContextAlone"), g_tgt = gap("TargetAlone"), g_tct = gap("TCT");
  const bool pass = g_ctx > g_tgt && g_ctx > g_tct && rel("TCT") * 2 <= rel("ContextAlone");
  return {pass, fmt("gaps: ContextAlone %.3f (%.1f%%), TargetAlone %.3f (%.1f%%), TCT %.3f (%.1f%%)", g_ctx,
                    100 * rel("ContextAlone"), g_tgt, 100 * rel("TargetAlone"), g_tct, 100 * rel("TCT"))};
}

// ---- 8: termination and IOR fuzz ---------------------------------------------------

Outcome ior_fuzz() {
  tct::Rng rng(8, "acceptance-fuzz");
  int violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int w = static_cast<int>(rng.uniform_int(1, 32)), h = static_cast<int>(rng.uniform_int(1, 32));
    tct::AttentionMap map{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
    const bool coarse = rng.uniform() < 0.3;  // many ties
    for (double& v : map.values) v = coarse ? static_cast<double>(rng.uniform_int(0, 3)) : rng.uniform();
    tct::SearchParams params;
    params.ior_width = static_cast<int>(rng.uniform_int(1, 4));
    params.ior_height = static_cast<int>(rng.uniform_int(1, 4));
    params.max_fixations = tct::SearchParams::kUnbounded;
    const int bw = static_cast<int>(rng.uniform_int(1, w)), bh = static_cast<int>(rng.uniform_int(1, h));
    const tct::Box box{static_cast<int>(rng.uniform_int(0, w - bw)), static_cast<int>(rng.uniform_int(0, h - bh)), bw, bh};
    const auto r = tct::generate_scanpath(map, box, params);
    std::set<std::pair<int, int>> centres;
    for (const auto& f : r.fixations) centres.insert({f.x, f.y});
    const bool ok = r.found && r.n_fixations >= 1 && r.n_fixations <= w * h &&
                    centres.size() == r.fixations.size() && r.n_fixations == static_cast<int>(r.fixations.size());
    if (!ok) ++violations;
  }
  return {violations == 0, fmt("%d violations in 10000 random maps", violations)};
}

// ---- 9: determinism of the bench suite ---------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome bench_determinism() {
  // Both runs write to the same directory, since the effective config records it.
  const auto dir = testutil::temp_dir("acceptance-determinism");
  const char* files[] = {"curves.csv", "summary.csv", "scanpaths.jsonl", "effective_config.ini"};
  std::vector<std::vector<std::string>> runs;
  for (int run = 0; run < 2; ++run) {
    std::ostringstream out, err;
    const int code = tct::run_cli({"bench", "--seed", "31", "--jobs", "2", "-o", dir.string()}, out, err);
    if (code != 0) return {false, "bench exited with " + std::to_string(code) + ": " + err.str()};
    runs.emplace_back();
    for (const char* f : files) runs.back().push_back(slurp(dir / f));
  }
  std::string mismatched;
  for (std::size_t i = 0; i < std::size(files); ++i)
    if (runs[0][i].empty() || runs[0][i] != runs[1][i]) mismatched += std::string(" ") + files[i];
  return {mismatched.empty(), mismatched.empty() ? "curves, summary, scanpaths and config byte-identical"
                                                 : "differing files:" + mismatched};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    double budget_s;  // 0: no runtime bound
  };
  const std::vector<Criterion> all{
      {1, "kernel oracles", kernels, 5},
      {2, "no-op identity", no_op_identity, 30},
      {3, "final-layer exemption", final_layer_exemption, 0},
      {4, "identity retrieval", identity_retrieval, 0},
      {5, "random baseline", random_baseline_check, 120},
      {6, "ablation ordering", ablation_ordering, 0},
      {7, "congruency robustness", congruency_robustness, 0},
      {8, "termination and IOR", ior_fuzz, 0},
      {9, "determinism", bench_determinism, 0},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.contains(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt(" [over the %.0f s budget]", c.budget_s);
    }
    if (!o.pass) ++failures;
    std::printf("criterion %d %-22s %s  %s (%.2f s)\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
