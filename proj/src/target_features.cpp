#include "tct/target_features.hpp"

namespace tct {

TargetFeatures extract_target_features(const ImageTensor& target, const EncoderWeights& weights,
                                       int target_size) {
  const ImageTensor sized = target_size > 0 ? resize_bilinear(target, target_size, target_size) : target;
  const Matrix tokens = embed(patchify(sized, weights.config().patch_size), weights, false);
  const EncoderRun run = encode(tokens, weights, ModulationConfig{}, nullptr, {}, true);

  TargetFeatures out;
  out.patch_count = tokens.rows() - 1;
  out.queries.reserve(run.states.size());
  for (const auto& st : run.states) {
    std::vector<Matrix> heads;
    for (const auto& q : st.q) heads.push_back(q.row_block(1, out.patch_count));
    out.queries.push_back(std::move(heads));
  }
  return out;
}

}  // namespace tct
