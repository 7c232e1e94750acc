#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tct/image.hpp"
#include "tct/numerics.hpp"
#include "tct/tcab.hpp"

namespace tct {

enum class WeightProfile { SeededRandom, PixelSimilarity, FileLoaded };
enum class NormKind { Layer, None };

std::string to_string(WeightProfile p);
WeightProfile parse_weight_profile(const std::string& s);
std::string to_string(NormKind n);
NormKind parse_norm_kind(const std::string& s);

/// Patch grid shape (rows x cols of patches).
struct GridDims {
  int rows = 0;
  int cols = 0;
  int count() const { return rows * cols; }
  bool operator==(const GridDims&) const = default;
};

struct EncoderConfig {
  int channels = 3;
  int patch_size = 16;
  int hidden_dim = 192;
  int heads = 3;
  int layers = 12;
  int mlp_dim = 768;
  NormKind norm = NormKind::Layer;
  double norm_eps = 1e-6;
  /// Search stream adds position embeddings; the target stream never does.
  bool use_position_embeddings = true;
  /// Patch grid the position table is sized for (only with position embeddings).
  GridDims position_grid{4, 4};
  /// L2-normalise each flattened patch before the patch projection.
  bool normalize_patches = false;
  WeightProfile profile = WeightProfile::SeededRandom;
  /// Pixel-similarity profile only: gain of the key block of U_QKV (attention
  /// temperature) and the scale of the attention write into the padded half.
  double key_gain = 1.0;
  double residual_write_scale = 1.0;

  int head_dim() const { return hidden_dim / heads; }
  int patch_len() const { return channels * patch_size * patch_size; }
  /// Throws InputError on inconsistent fields.
  void validate() const;

  /// Desk-scale pixel-similarity configuration (P = 4, one head, 12 layers).
  static EncoderConfig pixel_similarity_default();
};

struct LayerWeights {
  Matrix qkv;  // D x 3D; column blocks Q | K | V, each split per head.
  std::vector<double> qkv_bias;
  Matrix output_projection;  // D x D
  std::vector<double> output_bias;
  std::vector<double> norm1_gain, norm1_bias;
  std::vector<double> norm2_gain, norm2_bias;
  Matrix mlp_in;  // D x mlp_dim
  std::vector<double> mlp_in_bias;
  Matrix mlp_out;  // mlp_dim x D
  std::vector<double> mlp_out_bias;
};

/// Immutable encoder parameters. Construction validates every shape against
/// the config; afterwards the object is only read, so one instance can be
/// shared by concurrent trials.
class EncoderWeights {
 public:
  EncoderWeights(EncoderConfig config, Matrix patch_projection, std::vector<double> patch_bias,
                 std::vector<double> class_token, std::optional<Matrix> position_embeddings,
                 std::vector<LayerWeights> layers);

  static EncoderWeights seeded_random(const EncoderConfig& config, std::uint64_t seed);
  static EncoderWeights pixel_similarity(const EncoderConfig& config);

  const EncoderConfig& config() const { return config_; }
  const Matrix& patch_projection() const { return patch_projection_; }
  std::span<const double> patch_bias() const { return patch_bias_; }
  std::span<const double> class_token() const { return class_token_; }
  const std::optional<Matrix>& position_embeddings() const { return position_embeddings_; }
  const LayerWeights& layer(int index0) const { return layers_.at(static_cast<std::size_t>(index0)); }
  int layer_count() const { return static_cast<int>(layers_.size()); }

 private:
  EncoderConfig config_;
  Matrix patch_projection_;
  std::vector<double> patch_bias_;
  std::vector<double> class_token_;
  std::optional<Matrix> position_embeddings_;
  std::vector<LayerWeights> layers_;
};

/// Writes / reads the binary weight file (see README for the header grammar).
void save_weights(const EncoderWeights& weights, const std::filesystem::path& path);
EncoderWeights load_weights(const std::filesystem::path& path);

struct TensorEntry {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::uint64_t offset = 0;
};
struct WeightFileInfo {
  EncoderConfig config;
  std::vector<TensorEntry> tensors;
  std::uint64_t payload_bytes = 0;
};
/// Parses only the textual header.
WeightFileInfo inspect_weights(const std::filesystem::path& path);

/// Splits an image into P x P patches in row-major grid order. Each row is
/// the patch flattened channel-major ([c][py][px]).
Matrix patchify(const ImageTensor& img, int patch_size);
GridDims patch_grid(const ImageTensor& img, int patch_size);

/// Token matrix: row 0 is the class token, rows 1..N projected patches
/// (+ position embeddings iff with_position).
Matrix embed(const Matrix& patches, const EncoderWeights& weights, bool with_position);

struct QKV {
  std::vector<Matrix> q, k, v;  // one (N+1) x D_h matrix per head
};

/// [Q, K, V] = x U_QKV (+ bias), reshaped per head. x is the (normalised)
/// block input; layer is 0-based.
QKV project_qkv(const Matrix& x, const EncoderWeights& weights, int layer);

/// Modulation inputs for one block. A null target or empty gain means that
/// kind of modulation is off for the block.
struct BlockModulation {
  const std::vector<Matrix>* target_queries = nullptr;  // per head, N_T x D_h
  std::span<const double> gain;
};

struct LayerState {
  Matrix hidden;  // h_l, block input
  std::vector<Matrix> q, k, v;
  std::vector<Matrix> attention;  // SA_l per head, before modulation
  std::vector<std::vector<std::uint8_t>> key_masks;  // per head; empty without target modulation
};

struct BlockOutput {
  LayerState state;  // internals of this block
  Matrix next_hidden;  // h_{l+1}
};

/// One pre-norm block: norm -> modulated attention -> gated residual -> norm
/// -> MLP -> residual. layer is 0-based.
BlockOutput forward_block(const Matrix& hidden, const EncoderWeights& weights, int layer,
                          const BlockModulation& modulation);

/// Per-layer, per-head target queries used to modulate the search stream;
/// indexed [layer0][head].
using TargetQueries = std::vector<std::vector<Matrix>>;

struct EncoderRun {
  std::vector<double> class_map;        // length N_S
  std::vector<Matrix> final_attention;  // SA_L per head
  Matrix final_hidden;                  // h_{L+1}
  std::vector<LayerState> states;       // filled when keep_states
};

/// Full forward pass with TCAB modulation. gain may be empty.
EncoderRun encode(const Matrix& tokens, const EncoderWeights& weights, const ModulationConfig& modulation,
                  const TargetQueries* target, std::span<const double> gain, bool keep_states = false);

/// Reference transformer forward with no modulation hooks at all.
EncoderRun plain_encode(const Matrix& tokens, const EncoderWeights& weights);

}  // namespace tct
