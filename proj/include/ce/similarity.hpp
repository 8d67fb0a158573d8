#pragma once

#include <string>
#include <vector>

#include "ce/embedding.hpp"
#include "ce/model.hpp"

namespace ce {

class NoAvailableExpertError : public Error {
 public:
  using Error::Error;
};

class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

/// Drops the weights of unavailable experts and rescales the rest to sum to
/// one. Returns one weight per available expert, in expert order.
std::vector<double> renormalize_weights(const std::vector<double>& weights, const std::vector<bool>& mask);

/// Weighted sum of per-block inner products over the experts the video has,
/// with the text mixture weights renormalized to that subset. Unweighted
/// embeddings compare by plain inner product of the concatenations.
double similarity(const JointEmbedding& video, const TextEmbedding& text);

struct SimilarityMatrix {
  Matrix s;  // videos x captions
  std::vector<std::string> video_ids;
  std::vector<std::string> caption_ids;
};

SimilarityMatrix similarity_matrix(const std::vector<JointEmbedding>& videos, const std::vector<TextEmbedding>& texts);

/// Differentiable batch form used by the training loss: videos x texts.
Var similarity_matrix(const EncodedVideos& videos, const EncodedTexts& texts);

}  // namespace ce
