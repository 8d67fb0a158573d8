#include "ce/similarity.hpp"

namespace ce {

namespace {

constexpr double kMinWeightMass = 1e-12;

void check_pair(const JointEmbedding& v, const TextEmbedding& t) {
  if (v.num_experts() != t.num_experts() || v.available.size() != v.blocks.size()) {
    throw DimensionError("similarity: video has " + std::to_string(v.num_experts()) + " blocks, text has " +
                         std::to_string(t.num_experts()));
  }
  for (std::size_t i = 0; i < v.blocks.size(); ++i) {
    if (v.blocks[i].size() != t.blocks[i].size()) {
      throw DimensionError("similarity: block " + std::to_string(i) + " widths differ");
    }
  }
  if (t.mixture_weights && static_cast<std::size_t>(t.mixture_weights->size()) != t.num_experts()) {
    throw DimensionError("similarity: mixture weight count differs from block count");
  }
}

}  // namespace

std::vector<double> renormalize_weights(const std::vector<double>& weights, const std::vector<bool>& mask) {
  if (weights.size() != mask.size()) throw DimensionError("renormalize_weights: weights and mask lengths differ");
  double total = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!mask[i]) continue;
    any = true;
    total += weights[i];
  }
  if (!any) throw NoAvailableExpertError("renormalize_weights: no expert is available");
  if (total < kMinWeightMass) throw DegenerateWeightsError("renormalize_weights: available weight mass below 1e-12");
  std::vector<double> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (mask[i]) out.push_back(weights[i] / total);
  }
  return out;
}

double similarity(const JointEmbedding& video, const TextEmbedding& text) {
  check_pair(video, text);
  if (!text.mixture_weights) return video.concatenated().dot(text.concatenated());

  const RowVector& w = *text.mixture_weights;
  std::vector<double> weights(w.data(), w.data() + w.size());
  const std::vector<double> renorm = renormalize_weights(weights, video.available);
  double s = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < video.blocks.size(); ++i) {
    if (!video.available[i]) continue;
    s += renorm[k++] * video.blocks[i].dot(text.blocks[i]);
  }
  return s;
}

SimilarityMatrix similarity_matrix(const std::vector<JointEmbedding>& videos, const std::vector<TextEmbedding>& texts) {
  if (videos.empty() || texts.empty()) throw ContractError("similarity_matrix needs nonempty inputs");
  SimilarityMatrix out;
  out.s.resize(static_cast<Eigen::Index>(videos.size()), static_cast<Eigen::Index>(texts.size()));
  for (std::size_t i = 0; i < videos.size(); ++i) {
    for (std::size_t j = 0; j < texts.size(); ++j) {
      try {
        out.s(i, j) = similarity(videos[i], texts[j]);
      } catch (const Error& e) {
        throw Error("similarity(video " + std::to_string(i) + ", text " + std::to_string(j) + "): " + e.what());
      }
    }
  }
  return out;
}

Var similarity_matrix(const EncodedVideos& videos, const EncodedTexts& texts) {
  const std::size_t n = videos.blocks.size();
  if (n == 0 || texts.blocks.size() != n) throw DimensionError("similarity_matrix: expert counts differ");
  Tape& tape = *videos.blocks[0].tape();

  if (!texts.weighted()) {
    Var s;
    for (std::size_t i = 0; i < n; ++i) {
      Var term = matmul(videos.blocks[i], transpose(texts.blocks[i]));
      s = s.valid() ? add(s, term) : term;
    }
    return s;
  }

  const Matrix& mask = videos.mask;
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    if (!mask.row(r).any()) throw NoAvailableExpertError("similarity_matrix: video row " + std::to_string(r) + " has no experts");
  }
  // s[a][b] = sum_i w[b][i] <v_i[a], t_i[b]> / sum_i mask[a][i] w[b][i]
  Var numerator;
  for (std::size_t i = 0; i < n; ++i) {
    Var cos = matmul(videos.blocks[i], transpose(texts.blocks[i]));
    Var w = transpose(slice_cols(texts.weights, static_cast<Eigen::Index>(i), 1));
    Var term = scale_cols(cos, w);
    numerator = numerator.valid() ? add(numerator, term) : term;
  }
  Var mass = matmul(tape.constant(mask), transpose(texts.weights));
  if ((mass.value().array() < kMinWeightMass).any()) {
    throw DegenerateWeightsError("similarity_matrix: available weight mass below 1e-12");
  }
  return divide(numerator, mass);
}

}  // namespace ce
