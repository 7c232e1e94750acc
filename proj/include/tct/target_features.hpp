#pragma once

#include "tct/encoder.hpp"
#include "tct/image.hpp"

namespace tct {

/// Target queries retained from an unmodulated pass over the target image.
struct TargetFeatures {
  TargetQueries queries;  // [layer0][head], N_T x D_h, class row dropped
  std::size_t patch_count = 0;
};

/// target_size > 0 resizes the target (bilinear) to target_size x target_size
/// first; 0 keeps its native resolution. Position embeddings are never added.
TargetFeatures extract_target_features(const ImageTensor& target, const EncoderWeights& weights,
                                       int target_size = 0);

}  // namespace tct
