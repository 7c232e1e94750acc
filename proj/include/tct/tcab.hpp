#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "tct/numerics.hpp"

namespace tct {

/// Result of target voting for one head at one layer.
struct TargetModulator {
  /// N_T x N_S binary matrix; row t has a single 1 at the search patch that
  /// target patch t votes for.
  Matrix votes;
  /// Length N_S; key_mask[j] = 1 iff some target patch voted for patch j.
  std::vector<std::uint8_t> key_mask;
};

/// Which layers (1-based) receive target and context modulation.
struct ModulationConfig {
  std::set<int> target_layers;
  std::set<int> context_layers;
  /// Upper bound of the context gain g.
  double g_max = 1.0;

  bool targets(int layer) const { return target_layers.contains(layer); }
  bool contexts(int layer) const { return context_layers.contains(layer); }
  bool empty() const { return target_layers.empty() && context_layers.empty(); }
  /// Throws InputError when an index lies outside [1, layers].
  void validate(int layers) const;

  /// Target at [6, 12] and context at 3, rescaled to the encoder depth.
  static ModulationConfig tct_default(int layers);
};

/// Per-patch context gate. g = 0 everywhere is an exact no-op.
struct ContextModulator {
  std::vector<double> gain;

  /// The N_S x D matrix form M_C (every column equal to gain).
  Matrix broadcast(std::size_t hidden_dim) const;
};

/// Votes each target query row for its most similar search query row
/// (keeptop of softmax(Q_T Q_S^T / sqrt(D_h))) and ORs the votes into a key
/// mask. search_queries must not contain the class-token row.
TargetModulator compute_target_mask(const Matrix& target_queries, const Matrix& search_queries,
                                    std::size_t head_dim);

/// Element-wise product of the patch block of a (N_S+1)x(N_S+1) attention
/// matrix with the broadcast key mask. Row 0 and column 0 (class token) are
/// copied unchanged. Rows are not renormalised.
Matrix apply_target_mask(const Matrix& attention, std::span<const std::uint8_t> key_mask);

/// h + concat_h(A_h V_h) W_o + b_o, then patch rows i >= 1 scaled by
/// (1 + gain[i-1]). The class row is never scaled. An empty gain span means
/// no context modulation.
Matrix gated_residual(const Matrix& hidden, std::span<const Matrix> attention,
                      std::span<const Matrix> values, std::span<const double> gain,
                      const Matrix& output_projection, std::span<const double> output_bias);

/// Mean over heads of the class-token attention row, patch columns only.
std::vector<double> class_attention_map(std::span<const Matrix> attention);

}  // namespace tct
