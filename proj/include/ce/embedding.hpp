#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ce/tensor.hpp"

namespace ce {

/// Per-video input: expert name -> frame-level features (T x d). A missing
/// entry, std::nullopt, or a zero-row matrix all mean the expert is absent.
struct VideoRecord {
  std::string id;
  std::map<std::string, std::optional<Matrix>> experts;
  std::vector<std::string> caption_ids;

  bool has_expert(const std::string& name) const;
  const Matrix& features(const std::string& name) const;
};

/// Video side of the joint space: one block per configured expert, in
/// configured order. Available blocks are unit-norm, missing blocks are zero.
struct JointEmbedding {
  std::vector<RowVector> blocks;
  std::vector<bool> available;

  std::size_t num_experts() const { return blocks.size(); }
  RowVector concatenated() const;
};

/// Text side: unit-norm blocks plus softmax mixture weights. Variants without
/// learned fusion (plain concatenation) leave the weights empty and compare
/// with an unweighted inner product.
struct TextEmbedding {
  std::vector<RowVector> blocks;
  std::optional<RowVector> mixture_weights;

  std::size_t num_experts() const { return blocks.size(); }
  RowVector concatenated() const;
};

}  // namespace ce
