#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ce/aggregation.hpp"
#include "ce/autodiff.hpp"
#include "ce/embedding.hpp"

namespace ce {

/// Fusion variants, from plain concatenation up to the full model.
enum class Variant {
  concat,         // concatenated raw aggregates, unweighted inner product
  ce_no_mw_p_cg,  // native-dim GEMs, uniform weights
  moee,           // native-dim GEMs, mixture weights
  ce_no_cg,       // common projection, GEMs, mixture weights
  ce,             // + collaborative gating
};

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct VariantTraits {
  bool projection;
  bool gating;
  bool gem;
  bool mixture_weights;
};
VariantTraits traits(Variant v);

struct ExpertConfig {
  std::string name;
  int input_dim = 0;
  Aggregator aggregator = Aggregator::mean;
  int vlad_clusters = 8;
  int ghost_clusters = 1;

  int aggregated_dim() const { return aggregator == Aggregator::mean ? input_dim : vlad_clusters * input_dim; }
};

struct TextConfig {
  int word_dim = 300;
  int vlad_clusters = 28;
  int ghost_clusters = 1;

  int aggregated_dim() const { return vlad_clusters * word_dim; }
};

struct ModelConfig {
  std::vector<ExpertConfig> experts;
  TextConfig text;
  Variant variant = Variant::ce;
  int common_dim = 768;
  int gating_hidden = 0;  // 0 -> common_dim

  int num_experts() const { return static_cast<int>(experts.size()); }
  int gating_width() const { return gating_hidden > 0 ? gating_hidden : common_dim; }
  /// Width of expert i's block in the joint space.
  int block_dim(int i) const;
  int expert_index(const std::string& name) const;
  void validate() const;
};

using ModelParams = NamedMatrices;

class UnencodableRecordError : public Error {
 public:
  using Error::Error;
};

/// Seeded initialization of every parameter the variant uses.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);
/// Registers params as non-differentiable constants (inference).
ParamVars constant_params(Tape& tape, const ModelParams& params);

namespace param_names {
std::string expert(const std::string& expert, const std::string& leaf);
std::string text_gem(const std::string& expert, const std::string& leaf);
}  // namespace param_names

// ---------------------------------------------------------------------------
// Building blocks. Rows are samples; a single record is a batch of one.

/// One hidden ReLU layer: relu(x W1 + b1) W2 + b2.
Var mlp(Var x, Var w1, Var b1, Var w2, Var b2);

/// Affine map of an aggregated expert feature into the common space.
Var project_expert(Var aggregated, const ExpertConfig& expert, const ParamVars& params);

/// Attention vectors T_i = h(sum_{j != i, j available} g([P_i; P_j])) with
/// shared g and h. `mask` is batch x n with 1 for available experts. Pairs
/// involving an unavailable expert contribute nothing; experts that are
/// unavailable in every row get a zero attention vector without evaluation.
std::vector<Var> collaborative_attention(const std::vector<Var>& projections, const Matrix& mask,
                                         const ParamVars& params);

/// P_i <- P_i o sigmoid(T_i)
std::vector<Var> gate_experts(const std::vector<Var>& projections, const std::vector<Var>& attentions);

/// Gated embedding unit: y1 = x W1 + b1, y2 = y1 o sigmoid(y1 W2 + b2), l2-normalized.
Var gem(Var x, Var w1, Var b1, Var w2, Var b2);

/// Batched inputs for the video encoder.
struct VideoBatch {
  std::vector<const VideoRecord*> records;
  Matrix mask;  // batch x n
};
VideoBatch make_video_batch(const ModelConfig& config, std::vector<const VideoRecord*> records);

struct EncodedVideos {
  std::vector<Var> blocks;  // per expert, batch x block_dim
  Matrix mask;
};

struct EncodedTexts {
  std::vector<Var> blocks;  // per expert, batch x block_dim
  Var weights;              // batch x n; invalid when unweighted
  bool weighted() const { return weights.valid(); }
};

EncodedVideos encode_videos(Tape& tape, const ParamVars& params, const ModelConfig& config, const VideoBatch& batch);
EncodedTexts encode_texts(Tape& tape, const ParamVars& params, const ModelConfig& config,
                          const std::vector<const Matrix*>& captions);

/// Value-level encoders for a single record / caption.
JointEmbedding encode_video(const VideoRecord& record, const ModelConfig& config, const ModelParams& params);
TextEmbedding encode_text(const Matrix& caption, const ModelConfig& config, const ModelParams& params);

std::vector<JointEmbedding> to_embeddings(const EncodedVideos& encoded);
std::vector<TextEmbedding> to_embeddings(const EncodedTexts& encoded);

}  // namespace ce
