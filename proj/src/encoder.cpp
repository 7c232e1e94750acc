#include "tct/encoder.hpp"

#include <cmath>

#include "tct/errors.hpp"
#include "tct/rng.hpp"

namespace tct {

std::string to_string(WeightProfile p) {
  switch (p) {
    case WeightProfile::SeededRandom: return "seeded-random";
    case WeightProfile::PixelSimilarity: return "pixel-similarity";
    case WeightProfile::FileLoaded: return "file-loaded";
  }
  return "unknown";
}

WeightProfile parse_weight_profile(const std::string& s) {
  if (s == "seeded-random") return WeightProfile::SeededRandom;
  if (s == "pixel-similarity") return WeightProfile::PixelSimilarity;
  if (s == "file-loaded") return WeightProfile::FileLoaded;
  throw InputError("unknown weight profile '" + s + "' (seeded-random | pixel-similarity | file-loaded)");
}

std::string to_string(NormKind n) { return n == NormKind::Layer ? "layer" : "none"; }

NormKind parse_norm_kind(const std::string& s) {
  if (s == "layer") return NormKind::Layer;
  if (s == "none") return NormKind::None;
  throw InputError("unknown norm kind '" + s + "' (layer | none)");
}

void EncoderConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InputError("encoder config: " + what);
  };
  require(channels >= 1, "channels must be >= 1");
  require(patch_size >= 1, "patch_size must be >= 1");
  require(hidden_dim >= 1 && heads >= 1, "hidden_dim and heads must be >= 1");
  require(hidden_dim % heads == 0, "hidden_dim must equal heads * head_dim");
  require(layers >= 1, "layers must be >= 1");
  require(mlp_dim >= 1, "mlp_dim must be >= 1");
  require(norm_eps > 0.0, "norm_eps must be positive");
  require(!use_position_embeddings || position_grid.count() > 0, "position_grid must be non-empty");
  require(std::isfinite(key_gain) && std::isfinite(residual_write_scale), "gains must be finite");
}

EncoderConfig EncoderConfig::pixel_similarity_default() {
  EncoderConfig c;
  c.patch_size = 4;
  c.hidden_dim = 2 * c.patch_len();
  c.heads = 1;
  c.layers = 12;
  c.mlp_dim = 1;
  c.norm = NormKind::None;
  c.use_position_embeddings = false;
  c.normalize_patches = true;
  c.profile = WeightProfile::PixelSimilarity;
  c.key_gain = 300.0;
  c.residual_write_scale = 0.02;
  return c;
}

namespace {

void check_len(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) throw ShapeError(std::string("encoder weights: ") + what + " has wrong length");
}

void check_shape(const Matrix& m, std::size_t r, std::size_t c, const char* what) {
  if (m.rows() != r || m.cols() != c) {
    throw ShapeError(std::string("encoder weights: ") + what + " expected " + std::to_string(r) + "x" +
                     std::to_string(c) + ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  if (!all_finite(m.values())) throw ShapeError(std::string("encoder weights: ") + what + " not finite");
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal() * scale;
  return m;
}

std::vector<double> random_vector(Rng& rng, std::size_t n, double mean, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = mean + rng.normal() * scale;
  return v;
}

Matrix normalize(const Matrix& x, std::span<const double> gain, std::span<const double> bias,
                 const EncoderConfig& cfg) {
  if (cfg.norm == NormKind::None) return x;
  return layernorm_rows(x, gain, bias, cfg.norm_eps);
}

Matrix mlp(const Matrix& x, const LayerWeights& lw) {
  Matrix inner = matmul(x, lw.mlp_in);
  add_row_bias(inner, lw.mlp_in_bias);
  for (double& v : inner.values()) v = gelu(v);
  Matrix out = matmul(inner, lw.mlp_out);
  add_row_bias(out, lw.mlp_out_bias);
  return out;
}

void add_in_place(Matrix& dst, const Matrix& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = d[i] + s[i];
}

}  // namespace

EncoderWeights::EncoderWeights(EncoderConfig config, Matrix patch_projection, std::vector<double> patch_bias,
                               std::vector<double> class_token, std::optional<Matrix> position_embeddings,
                               std::vector<LayerWeights> layers)
    : config_(std::move(config)),
      patch_projection_(std::move(patch_projection)),
      patch_bias_(std::move(patch_bias)),
      class_token_(std::move(class_token)),
      position_embeddings_(std::move(position_embeddings)),
      layers_(std::move(layers)) {
  config_.validate();
  const auto d = static_cast<std::size_t>(config_.hidden_dim);
  const auto m = static_cast<std::size_t>(config_.mlp_dim);
  check_shape(patch_projection_, static_cast<std::size_t>(config_.patch_len()), d, "patch_projection");
  check_len(patch_bias_, d, "patch_bias");
  check_len(class_token_, d, "class_token");
  if (config_.use_position_embeddings) {
    if (!position_embeddings_) throw ShapeError("encoder weights: position embeddings required by config");
    check_shape(*position_embeddings_, static_cast<std::size_t>(config_.position_grid.count()) + 1, d,
                "position_embeddings");
  }
  if (layers_.size() != static_cast<std::size_t>(config_.layers)) {
    throw ShapeError("encoder weights: layer count does not match config");
  }
  for (const auto& lw : layers_) {
    check_shape(lw.qkv, d, 3 * d, "qkv");
    check_len(lw.qkv_bias, 3 * d, "qkv_bias");
    check_shape(lw.output_projection, d, d, "output_projection");
    check_len(lw.output_bias, d, "output_bias");
    check_len(lw.norm1_gain, d, "norm1_gain");
    check_len(lw.norm1_bias, d, "norm1_bias");
    check_len(lw.norm2_gain, d, "norm2_gain");
    check_len(lw.norm2_bias, d, "norm2_bias");
    check_shape(lw.mlp_in, d, m, "mlp_in");
    check_len(lw.mlp_in_bias, m, "mlp_in_bias");
    check_shape(lw.mlp_out, m, d, "mlp_out");
    check_len(lw.mlp_out_bias, d, "mlp_out_bias");
  }
}

EncoderWeights EncoderWeights::seeded_random(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed, "encoder-weights");
  const auto d = static_cast<std::size_t>(config.hidden_dim);
  const auto m = static_cast<std::size_t>(config.mlp_dim);
  const auto f = static_cast<std::size_t>(config.patch_len());
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix patch = random_matrix(rng, f, d, 1.0 / std::sqrt(static_cast<double>(f)));
  auto patch_bias = random_vector(rng, d, 0.0, 0.02);
  auto cls = random_vector(rng, d, 0.0, inv_sqrt_d);
  std::optional<Matrix> pos;
  if (config.use_position_embeddings) {
    pos = random_matrix(rng, static_cast<std::size_t>(config.position_grid.count()) + 1, d, inv_sqrt_d);
  }
  std::vector<LayerWeights> layers;
  for (int l = 0; l < config.layers; ++l) {
    LayerWeights lw;
    lw.qkv = random_matrix(rng, d, 3 * d, inv_sqrt_d);
    lw.qkv_bias = random_vector(rng, 3 * d, 0.0, 0.02);
    lw.output_projection = random_matrix(rng, d, d, inv_sqrt_d);
    lw.output_bias = random_vector(rng, d, 0.0, 0.02);
    lw.norm1_gain = random_vector(rng, d, 1.0, 0.05);
    lw.norm1_bias = random_vector(rng, d, 0.0, 0.05);
    lw.norm2_gain = random_vector(rng, d, 1.0, 0.05);
    lw.norm2_bias = random_vector(rng, d, 0.0, 0.05);
    lw.mlp_in = random_matrix(rng, d, m, inv_sqrt_d);
    lw.mlp_in_bias = random_vector(rng, m, 0.0, 0.02);
    lw.mlp_out = random_matrix(rng, m, d, 1.0 / std::sqrt(static_cast<double>(m)));
    lw.mlp_out_bias = random_vector(rng, d, 0.0, 0.02);
    layers.push_back(std::move(lw));
  }
  EncoderConfig cfg = config;
  cfg.profile = WeightProfile::SeededRandom;
  return EncoderWeights(cfg, std::move(patch), std::move(patch_bias), std::move(cls), std::move(pos),
                        std::move(layers));
}

EncoderWeights EncoderWeights::pixel_similarity(const EncoderConfig& config) {
  EncoderConfig cfg = config;
  cfg.profile = WeightProfile::PixelSimilarity;
  cfg.normalize_patches = true;
  cfg.use_position_embeddings = false;
  cfg.validate();
  const auto d = static_cast<std::size_t>(cfg.hidden_dim);
  const auto m = static_cast<std::size_t>(cfg.mlp_dim);
  const auto f = static_cast<std::size_t>(cfg.patch_len());
  // Pixels occupy the first `feat` columns; attention output is written into
  // the zero-padded remainder so the pixel half never changes.
  const std::size_t feat = std::min(f, d);
  const std::size_t pad = d - feat;

  Matrix patch(f, d);
  for (std::size_t i = 0; i < feat; ++i) patch(i, i) = 1.0;

  std::vector<LayerWeights> layers;
  for (int l = 0; l < cfg.layers; ++l) {
    LayerWeights lw;
    lw.qkv = Matrix(d, 3 * d);
    for (std::size_t i = 0; i < d; ++i) {
      lw.qkv(i, i) = 1.0;
      lw.qkv(i, d + i) = cfg.key_gain;
      lw.qkv(i, 2 * d + i) = 1.0;
    }
    lw.qkv_bias.assign(3 * d, 0.0);
    lw.output_projection = Matrix(d, d);
    for (std::size_t i = 0; i < std::min(feat, pad); ++i) lw.output_projection(i, feat + i) = cfg.residual_write_scale;
    lw.output_bias.assign(d, 0.0);
    lw.norm1_gain.assign(d, 1.0);
    lw.norm1_bias.assign(d, 0.0);
    lw.norm2_gain.assign(d, 1.0);
    lw.norm2_bias.assign(d, 0.0);
    lw.mlp_in = Matrix(d, m);
    lw.mlp_in_bias.assign(m, 0.0);
    lw.mlp_out = Matrix(m, d);
    lw.mlp_out_bias.assign(d, 0.0);
    layers.push_back(std::move(lw));
  }
  return EncoderWeights(cfg, std::move(patch), std::vector<double>(d, 0.0), std::vector<double>(d, 0.0),
                        std::nullopt, std::move(layers));
}

GridDims patch_grid(const ImageTensor& img, int patch_size) {
  if (patch_size <= 0) throw ShapeError("patch size must be positive");
  if (img.height() % patch_size != 0 || img.width() % patch_size != 0) {
    throw ShapeError("image " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                     " is not divisible by patch size " + std::to_string(patch_size));
  }
  return {img.height() / patch_size, img.width() / patch_size};
}

Matrix patchify(const ImageTensor& img, int patch_size) {
  const GridDims grid = patch_grid(img, patch_size);
  const int p = patch_size;
  Matrix out(static_cast<std::size_t>(grid.count()), static_cast<std::size_t>(img.channels() * p * p));
  for (int gy = 0; gy < grid.rows; ++gy) {
    for (int gx = 0; gx < grid.cols; ++gx) {
      auto row = out.row(static_cast<std::size_t>(gy * grid.cols + gx));
      std::size_t k = 0;
      for (int c = 0; c < img.channels(); ++c)
        for (int py = 0; py < p; ++py)
          for (int px = 0; px < p; ++px) row[k++] = img.at(c, gy * p + py, gx * p + px);
    }
  }
  return out;
}

Matrix embed(const Matrix& patches, const EncoderWeights& weights, bool with_position) {
  const auto& cfg = weights.config();
  if (patches.cols() != static_cast<std::size_t>(cfg.patch_len())) {
    throw ShapeError("embed: patch length " + std::to_string(patches.cols()) + " != C*P*P = " +
                     std::to_string(cfg.patch_len()));
  }
  Matrix input = patches;
  if (cfg.normalize_patches) {
    for (std::size_t r = 0; r < input.rows(); ++r) {
      auto row = input.row(r);
      double norm = 0.0;
      for (double v : row) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (double& v : row) v /= norm;
    }
  }
  Matrix projected = matmul(input, weights.patch_projection());
  add_row_bias(projected, weights.patch_bias());

  const std::size_t d = static_cast<std::size_t>(cfg.hidden_dim);
  Matrix tokens(patches.rows() + 1, d);
  std::copy(weights.class_token().begin(), weights.class_token().end(), tokens.row(0).begin());
  for (std::size_t r = 0; r < projected.rows(); ++r) {
    auto src = projected.row(r);
    std::copy(src.begin(), src.end(), tokens.row(r + 1).begin());
  }
  if (with_position) {
    const auto& pos = weights.position_embeddings();
    if (!pos) throw ShapeError("embed: position embeddings requested but the weights have none");
    if (pos->rows() != tokens.rows()) {
      throw ShapeError("embed: position table has " + std::to_string(pos->rows() - 1) + " patches, input has " +
                       std::to_string(patches.rows()));
    }
    add_in_place(tokens, *pos);
  }
  return tokens;
}

QKV project_qkv(const Matrix& x, const EncoderWeights& weights, int layer) {
  if (layer < 0 || layer >= weights.layer_count()) throw ShapeError("project_qkv: layer out of range");
  const auto& lw = weights.layer(layer);
  Matrix all = matmul(x, lw.qkv);
  add_row_bias(all, lw.qkv_bias);
  const auto d = static_cast<std::size_t>(weights.config().hidden_dim);
  const auto dh = static_cast<std::size_t>(weights.config().head_dim());
  QKV out;
  for (int h = 0; h < weights.config().heads; ++h) {
    const std::size_t off = static_cast<std::size_t>(h) * dh;
    out.q.push_back(all.col_block(off, dh));
    out.k.push_back(all.col_block(d + off, dh));
    out.v.push_back(all.col_block(2 * d + off, dh));
  }
  return out;
}

BlockOutput forward_block(const Matrix& hidden, const EncoderWeights& weights, int layer,
                          const BlockModulation& modulation) {
  const auto& cfg = weights.config();
  const auto& lw = weights.layer(layer);
  const auto dh = static_cast<std::size_t>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  BlockOutput out;
  LayerState& st = out.state;
  st.hidden = hidden;
  QKV qkv = project_qkv(normalize(hidden, lw.norm1_gain, lw.norm1_bias, cfg), weights, layer);

  std::vector<Matrix> modulated;
  const std::size_t patches = hidden.rows() - 1;
  for (int h = 0; h < cfg.heads; ++h) {
    const auto hi = static_cast<std::size_t>(h);
    Matrix sa = softmax_rows(matmul_transposed(qkv.q[hi], qkv.k[hi]), scale);
    if (modulation.target_queries != nullptr) {
      const auto& targets = *modulation.target_queries;
      if (targets.size() != static_cast<std::size_t>(cfg.heads)) {
        throw ShapeError("forward_block: target queries must be given per head");
      }
      const TargetModulator mod = compute_target_mask(targets[hi], qkv.q[hi].row_block(1, patches), dh);
      modulated.push_back(apply_target_mask(sa, mod.key_mask));
      st.key_masks.push_back(mod.key_mask);
    } else {
      modulated.push_back(sa);
    }
    st.attention.push_back(std::move(sa));
  }
  Matrix h1 = gated_residual(hidden, modulated, qkv.v, modulation.gain, lw.output_projection, lw.output_bias);
  st.q = std::move(qkv.q);
  st.k = std::move(qkv.k);
  st.v = std::move(qkv.v);

  Matrix m = mlp(normalize(h1, lw.norm2_gain, lw.norm2_bias, cfg), lw);
  add_in_place(h1, m);
  out.next_hidden = std::move(h1);
  return out;
}

EncoderRun encode(const Matrix& tokens, const EncoderWeights& weights, const ModulationConfig& modulation,
                  const TargetQueries* target, std::span<const double> gain, bool keep_states) {
  const int layers = weights.layer_count();
  modulation.validate(layers);
  if (!modulation.target_layers.empty()) {
    if (target == nullptr || target->size() != static_cast<std::size_t>(layers)) {
      throw ShapeError("encode: target modulation requires target queries for every layer");
    }
  }
  if (!gain.empty() && gain.size() + 1 != tokens.rows()) {
    throw ShapeError("encode: context gain length must equal the search patch count");
  }
  EncoderRun run;
  Matrix h = tokens;
  for (int l = 0; l < layers; ++l) {
    BlockModulation bm;
    if (modulation.targets(l + 1)) bm.target_queries = &(*target)[static_cast<std::size_t>(l)];
    if (modulation.contexts(l + 1)) bm.gain = gain;
    BlockOutput out = forward_block(h, weights, l, bm);
    if (l == layers - 1) run.final_attention = out.state.attention;
    if (keep_states) run.states.push_back(std::move(out.state));
    h = std::move(out.next_hidden);
  }
  run.final_hidden = std::move(h);
  run.class_map = class_attention_map(run.final_attention);
  return run;
}

EncoderRun plain_encode(const Matrix& tokens, const EncoderWeights& weights) {
  const auto& cfg = weights.config();
  const auto d = static_cast<std::size_t>(cfg.hidden_dim);
  const auto dh = static_cast<std::size_t>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  EncoderRun run;
  Matrix h = tokens;
  for (int l = 0; l < weights.layer_count(); ++l) {
    const auto& lw = weights.layer(l);
    Matrix qkv = matmul(normalize(h, lw.norm1_gain, lw.norm1_bias, cfg), lw.qkv);
    add_row_bias(qkv, lw.qkv_bias);
    Matrix heads_out(h.rows(), d);
    std::vector<Matrix> attention;
    for (std::size_t head = 0; head < static_cast<std::size_t>(cfg.heads); ++head) {
      const Matrix q = qkv.col_block(head * dh, dh);
      const Matrix k = qkv.col_block(d + head * dh, dh);
      const Matrix v = qkv.col_block(2 * d + head * dh, dh);
      Matrix sa = softmax_rows(matmul_transposed(q, k), scale);
      const Matrix o = matmul(sa, v);
      for (std::size_t r = 0; r < o.rows(); ++r)
        for (std::size_t c = 0; c < dh; ++c) heads_out(r, head * dh + c) = o(r, c);
      attention.push_back(std::move(sa));
    }
    Matrix attn = matmul(heads_out, lw.output_projection);
    add_row_bias(attn, lw.output_bias);
    Matrix h1 = h;
    add_in_place(h1, attn);
    add_in_place(h1, mlp(normalize(h1, lw.norm2_gain, lw.norm2_bias, cfg), lw));
    h = std::move(h1);
    if (l == weights.layer_count() - 1) run.final_attention = std::move(attention);
  }
  run.final_hidden = std::move(h);
  run.class_map = class_attention_map(run.final_attention);
  return run;
}

}  // namespace tct
