#include "tct/tcab.hpp"

#include <cmath>
#include <string>

#include "tct/errors.hpp"

namespace tct {

void ModulationConfig::validate(int layers) const {
  for (const auto* set : {&target_layers, &context_layers}) {
    for (int l : *set) {
      if (l < 1 || l > layers) {
        throw InputError("modulation layer " + std::to_string(l) + " outside [1, " + std::to_string(layers) + "]");
      }
    }
  }
  if (!(g_max >= 0.0) || !std::isfinite(g_max)) throw InputError("g_max must be finite and non-negative");
}

ModulationConfig ModulationConfig::tct_default(int layers) {
  ModulationConfig cfg;
  // Depth-relative placement: 6/12 onward for targets, 3/12 for context.
  const int first_target = std::max(1, (layers * 6 + 11) / 12);
  for (int l = first_target; l <= layers; ++l) cfg.target_layers.insert(l);
  cfg.context_layers.insert(std::max(1, (layers * 3 + 11) / 12));
  return cfg;
}

Matrix ContextModulator::broadcast(std::size_t hidden_dim) const {
  Matrix m(gain.size(), hidden_dim);
  for (std::size_t i = 0; i < gain.size(); ++i)
    for (std::size_t c = 0; c < hidden_dim; ++c) m(i, c) = gain[i];
  return m;
}

TargetModulator compute_target_mask(const Matrix& target_queries, const Matrix& search_queries,
                                    std::size_t head_dim) {
  if (target_queries.cols() != head_dim || search_queries.cols() != head_dim) {
    throw ShapeError("compute_target_mask: query width must equal head_dim");
  }
  if (target_queries.rows() == 0 || search_queries.rows() == 0) {
    throw ShapeError("compute_target_mask: empty query set");
  }
  const Matrix relevance = softmax_rows(matmul_transposed(target_queries, search_queries),
                                        1.0 / std::sqrt(static_cast<double>(head_dim)));
  TargetModulator mod{keeptop_rows(relevance), std::vector<std::uint8_t>(search_queries.rows(), 0)};
  for (std::size_t t = 0; t < mod.votes.rows(); ++t) {
    auto row = mod.votes.row(t);
    for (std::size_t j = 0; j < row.size(); ++j)
      if (row[j] != 0.0) mod.key_mask[j] = 1;
  }
  return mod;
}

Matrix apply_target_mask(const Matrix& attention, std::span<const std::uint8_t> key_mask) {
  if (attention.rows() != attention.cols() || attention.rows() != key_mask.size() + 1) {
    throw ShapeError("apply_target_mask: attention must be (N_S+1)x(N_S+1) for a mask of length N_S");
  }
  Matrix out = attention;
  for (std::size_t i = 1; i < out.rows(); ++i) {
    auto row = out.row(i);
    for (std::size_t j = 1; j < row.size(); ++j) row[j] *= static_cast<double>(key_mask[j - 1]);
  }
  return out;
}

Matrix gated_residual(const Matrix& hidden, std::span<const Matrix> attention,
                      std::span<const Matrix> values, std::span<const double> gain,
                      const Matrix& output_projection, std::span<const double> output_bias) {
  if (attention.size() != values.size() || attention.empty()) {
    throw ShapeError("gated_residual: need one attention matrix per value matrix");
  }
  const std::size_t tokens = hidden.rows();
  std::size_t width = 0;
  for (const auto& v : values) width += v.cols();
  if (width != output_projection.rows() || output_projection.cols() != hidden.cols()) {
    throw ShapeError("gated_residual: output projection shape mismatch");
  }
  if (!gain.empty() && gain.size() + 1 != tokens) {
    throw ShapeError("gated_residual: gain length must equal the patch count");
  }

  Matrix concat(tokens, width);
  std::size_t offset = 0;
  for (std::size_t h = 0; h < values.size(); ++h) {
    const Matrix head_out = matmul(attention[h], values[h]);
    if (head_out.rows() != tokens) throw ShapeError("gated_residual: token count mismatch");
    for (std::size_t r = 0; r < tokens; ++r) {
      auto src = head_out.row(r);
      std::copy(src.begin(), src.end(), concat.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += head_out.cols();
  }
  Matrix out = matmul(concat, output_projection);
  add_row_bias(out, output_bias);
  for (std::size_t r = 0; r < tokens; ++r) {
    auto dst = out.row(r);
    auto src = hidden.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = src[c] + dst[c];
  }
  if (!gain.empty()) {
    for (std::size_t r = 1; r < tokens; ++r) {
      const double scale = 1.0 + gain[r - 1];
      for (double& v : out.row(r)) v *= scale;
    }
  }
  return out;
}

std::vector<double> class_attention_map(std::span<const Matrix> attention) {
  if (attention.empty()) throw ShapeError("class_attention_map: no heads");
  const std::size_t patches = attention.front().cols() - 1;
  std::vector<double> map(patches, 0.0);
  for (const auto& head : attention) {
    if (head.cols() != patches + 1) throw ShapeError("class_attention_map: head shape mismatch");
    for (std::size_t j = 0; j < patches; ++j) map[j] += head(0, j + 1);
  }
  const double heads = static_cast<double>(attention.size());
  for (double& v : map) v /= heads;
  return map;
}

}  // namespace tct
