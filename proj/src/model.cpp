#include "ce/model.hpp"

#include <cmath>
#include <set>

namespace ce {

bool VideoRecord::has_expert(const std::string& name) const {
  auto it = experts.find(name);
  return it != experts.end() && it->second.has_value() && it->second->rows() > 0;
}

const Matrix& VideoRecord::features(const std::string& name) const {
  if (!has_expert(name)) throw Error("video '" + id + "' has no features for expert '" + name + "'");
  return *experts.at(name);
}

RowVector JointEmbedding::concatenated() const {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.size();
  RowVector out(total);
  Eigen::Index c = 0;
  for (const auto& b : blocks) {
    out.segment(c, b.size()) = b;
    c += b.size();
  }
  return out;
}

RowVector TextEmbedding::concatenated() const {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.size();
  RowVector out(total);
  Eigen::Index c = 0;
  for (const auto& b : blocks) {
    out.segment(c, b.size()) = b;
    c += b.size();
  }
  return out;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::concat: return "concat";
    case Variant::ce_no_mw_p_cg: return "ce_no_mw_p_cg";
    case Variant::moee: return "moee";
    case Variant::ce_no_cg: return "ce_no_cg";
    case Variant::ce: return "ce";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::concat, Variant::ce_no_mw_p_cg, Variant::moee, Variant::ce_no_cg, Variant::ce}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown model variant '" + s + "' (expected concat, ce_no_mw_p_cg, moee, ce_no_cg or ce)");
}

VariantTraits traits(Variant v) {
  switch (v) {
    case Variant::concat: return {false, false, false, false};
    case Variant::ce_no_mw_p_cg: return {false, false, true, false};
    case Variant::moee: return {false, false, true, true};
    case Variant::ce_no_cg: return {true, false, true, true};
    case Variant::ce: return {true, true, true, true};
  }
  return {};
}

int ModelConfig::block_dim(int i) const {
  return traits(variant).projection ? common_dim : experts.at(i).aggregated_dim();
}

int ModelConfig::expert_index(const std::string& name) const {
  for (int i = 0; i < num_experts(); ++i) {
    if (experts[i].name == name) return i;
  }
  return -1;
}

void ModelConfig::validate() const {
  if (experts.empty()) throw ConfigError("model needs at least one expert");
  std::set<std::string> names;
  for (const auto& e : experts) {
    if (e.name.empty()) throw ConfigError("expert with empty name");
    if (!names.insert(e.name).second) throw ConfigError("duplicate expert name '" + e.name + "'");
    if (e.input_dim < 1) throw ConfigError("expert '" + e.name + "': input_dim must be positive");
    if (e.aggregator == Aggregator::netvlad && (e.vlad_clusters < 1 || e.ghost_clusters < 0)) {
      throw ConfigError("expert '" + e.name + "': need vlad_clusters >= 1 and ghost_clusters >= 0");
    }
  }
  if (text.word_dim < 1 || text.vlad_clusters < 1 || text.ghost_clusters < 0) {
    throw ConfigError("text: need word_dim >= 1, vlad_clusters >= 1, ghost_clusters >= 0");
  }
  if (common_dim < 1) throw ConfigError("common_dim must be positive");
  if (gating_hidden < 0) throw ConfigError("gating_hidden must be >= 0");
}

namespace param_names {
std::string expert(const std::string& e, const std::string& leaf) { return "video." + e + "." + leaf; }
std::string text_gem(const std::string& e, const std::string& leaf) { return "text." + e + ".gem." + leaf; }
}  // namespace param_names

namespace {

class Initializer {
 public:
  Initializer(ModelParams& out, std::uint64_t seed) : out_(out), rng_(seed) {}

  void linear(const std::string& prefix, const std::string& w, const std::string& b, int in, int out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix wm(in, out);
    for (Eigen::Index i = 0; i < wm.size(); ++i) wm.data()[i] = u(rng_);
    Matrix bm(1, out);
    for (Eigen::Index i = 0; i < bm.size(); ++i) bm.data()[i] = u(rng_);
    out_[prefix + w] = std::move(wm);
    out_[prefix + b] = std::move(bm);
  }

  void gem(const std::string& prefix, int in, int out) {
    linear(prefix, "w1", "b1", in, out);
    linear(prefix, "w2", "b2", out, out);
  }

  void netvlad(const std::string& prefix, int clusters, int ghosts, int dim) {
    NetVladParams p = NetVladParams::init(clusters, ghosts, dim, rng_);
    out_[prefix + "centroids"] = std::move(p.centroids);
    out_[prefix + "assign_w"] = std::move(p.assign_w);
    out_[prefix + "assign_b"] = std::move(p.assign_b);
  }

 private:
  ModelParams& out_;
  std::mt19937_64 rng_;
};

const Var& param(const ParamVars& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ContractError("missing model parameter '" + name + "'");
  return it->second;
}

Var gem_from(const ParamVars& params, const std::string& prefix, Var x) {
  return gem(x, param(params, prefix + "w1"), param(params, prefix + "b1"), param(params, prefix + "w2"),
             param(params, prefix + "b2"));
}

Var netvlad_from(const ParamVars& params, const std::string& prefix, Var seq) {
  return netvlad(seq, param(params, prefix + "centroids"), param(params, prefix + "assign_w"),
                 param(params, prefix + "assign_b"));
}

Var mask_column(Tape& tape, const Matrix& mask, int i) { return tape.constant(Matrix(mask.col(i))); }

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const VariantTraits tr = traits(config.variant);
  ModelParams params;
  Initializer init(params, seed);
  const int n = config.num_experts();

  for (int i = 0; i < n; ++i) {
    const ExpertConfig& e = config.experts[i];
    if (e.aggregator == Aggregator::netvlad) {
      init.netvlad(param_names::expert(e.name, "vlad."), e.vlad_clusters, e.ghost_clusters, e.input_dim);
    }
    if (tr.projection) init.linear(param_names::expert(e.name, "proj."), "w", "b", e.aggregated_dim(), config.common_dim);
    if (tr.gem) init.gem(param_names::expert(e.name, "gem."), config.block_dim(i), config.block_dim(i));
  }
  if (tr.gating) {
    const int d = config.common_dim;
    const int h = config.gating_width();
    init.linear("gating.g.", "w1", "b1", 2 * d, h);
    init.linear("gating.g.", "w2", "b2", h, d);
    init.linear("gating.h.", "w1", "b1", d, h);
    init.linear("gating.h.", "w2", "b2", h, d);
  }

  const int text_dim = config.text.aggregated_dim();
  init.netvlad("text.vlad.", config.text.vlad_clusters, config.text.ghost_clusters, config.text.word_dim);
  if (tr.gem) {
    for (int i = 0; i < n; ++i) init.gem(param_names::text_gem(config.experts[i].name, ""), text_dim, config.block_dim(i));
  }
  if (tr.mixture_weights) init.linear("text.mix.", "w", "b", text_dim, n);
  if (config.variant == Variant::concat) {
    int total = 0;
    for (const auto& e : config.experts) total += e.aggregated_dim();
    init.linear("text.concat.", "w", "b", text_dim, total);
  }
  return params;
}

ParamVars constant_params(Tape& tape, const ModelParams& params) {
  ParamVars out;
  for (const auto& [name, value] : params) out.emplace(name, tape.constant(value));
  return out;
}

Var mlp(Var x, Var w1, Var b1, Var w2, Var b2) { return affine(relu(affine(x, w1, b1)), w2, b2); }

Var project_expert(Var aggregated, const ExpertConfig& expert, const ParamVars& params) {
  if (aggregated.cols() != expert.aggregated_dim()) {
    throw ConfigError("expert '" + expert.name + "': aggregated feature has " + std::to_string(aggregated.cols()) +
                      " dims, expected " + std::to_string(expert.aggregated_dim()));
  }
  return affine(aggregated, param(params, param_names::expert(expert.name, "proj.w")),
                param(params, param_names::expert(expert.name, "proj.b")));
}

std::vector<Var> collaborative_attention(const std::vector<Var>& projections, const Matrix& mask,
                                         const ParamVars& params) {
  const int n = static_cast<int>(projections.size());
  if (n < 1) throw ContractError("collaborative_attention needs at least one expert");
  if (mask.cols() != n) throw DimensionError("collaborative_attention: mask has wrong expert count");
  Tape& tape = *projections[0].tape();
  const Eigen::Index batch = projections[0].rows();
  const Eigen::Index d = projections[0].cols();
  for (const Var& p : projections) {
    if (p.rows() != batch || p.cols() != d) throw DimensionError("collaborative_attention: projection shapes differ");
  }
  if (mask.rows() != batch) throw DimensionError("collaborative_attention: mask has wrong batch size");

  const Var& gw1 = param(params, "gating.g.w1");
  if (gw1.rows() != 2 * d) throw DimensionError("collaborative_attention: g expects " + std::to_string(gw1.rows() / 2) + " dims");
  // g([a; b]) = relu(a W_top + b W_bottom + b1) W2 + b2
  Var w_top = slice_rows(gw1, 0, d);
  Var w_bottom = slice_rows(gw1, d, d);
  const Var& gb1 = param(params, "gating.g.b1");
  const Var& gw2 = param(params, "gating.g.w2");
  const Var& gb2 = param(params, "gating.g.b2");

  std::vector<bool> present(n);
  std::vector<Var> left(n), right(n);
  for (int i = 0; i < n; ++i) {
    present[i] = mask.col(i).any();
    if (!present[i]) continue;
    left[i] = matmul(projections[i], w_top);
    right[i] = matmul(projections[i], w_bottom);
  }

  std::vector<Var> out(n);
  for (int i = 0; i < n; ++i) {
    if (!present[i]) {
      out[i] = tape.constant(Matrix::Zero(batch, d));
      continue;
    }
    Var acc;
    for (int j = 0; j < n; ++j) {
      if (j == i || !present[j]) continue;
      Matrix pair_mask = mask.col(i).cwiseProduct(mask.col(j));
      Var rel = affine(relu(add_row(add(left[i], right[j]), gb1)), gw2, gb2);
      rel = scale_rows(rel, tape.constant(std::move(pair_mask)));
      acc = acc.valid() ? add(acc, rel) : rel;
    }
    if (!acc.valid()) acc = tape.constant(Matrix::Zero(batch, d));
    out[i] = mlp(acc, param(params, "gating.h.w1"), param(params, "gating.h.b1"), param(params, "gating.h.w2"),
                 param(params, "gating.h.b2"));
  }
  return out;
}

std::vector<Var> gate_experts(const std::vector<Var>& projections, const std::vector<Var>& attentions) {
  if (projections.size() != attentions.size()) throw DimensionError("gate_experts: list lengths differ");
  std::vector<Var> out;
  out.reserve(projections.size());
  for (std::size_t i = 0; i < projections.size(); ++i) out.push_back(hadamard(projections[i], sigmoid(attentions[i])));
  return out;
}

Var gem(Var x, Var w1, Var b1, Var w2, Var b2) {
  Var y1 = affine(x, w1, b1);
  Var y2 = hadamard(y1, sigmoid(affine(y1, w2, b2)));
  return l2_normalize_rows(y2);
}

VideoBatch make_video_batch(const ModelConfig& config, std::vector<const VideoRecord*> records) {
  VideoBatch batch;
  const int n = config.num_experts();
  batch.mask = Matrix::Zero(static_cast<Eigen::Index>(records.size()), n);
  for (std::size_t r = 0; r < records.size(); ++r) {
    for (int i = 0; i < n; ++i) {
      if (records[r]->has_expert(config.experts[i].name)) batch.mask(r, i) = 1.0;
    }
    if (!batch.mask.row(r).any()) {
      throw UnencodableRecordError("video '" + records[r]->id + "' has none of the configured experts");
    }
  }
  batch.records = std::move(records);
  return batch;
}

EncodedVideos encode_videos(Tape& tape, const ParamVars& params, const ModelConfig& config, const VideoBatch& batch) {
  const int n = config.num_experts();
  const VariantTraits tr = traits(config.variant);
  const Eigen::Index rows = static_cast<Eigen::Index>(batch.records.size());

  std::vector<Var> features(n);
  for (int i = 0; i < n; ++i) {
    const ExpertConfig& e = config.experts[i];
    if (e.aggregator == Aggregator::mean) {
      Matrix pooled = Matrix::Zero(rows, e.input_dim);
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (batch.mask(r, i) == 0.0) continue;
        const Matrix& seq = batch.records[r]->features(e.name);
        if (seq.cols() != e.input_dim) {
          throw ConfigError("expert '" + e.name + "': video '" + batch.records[r]->id + "' has " +
                            std::to_string(seq.cols()) + " dims, expected " + std::to_string(e.input_dim));
        }
        pooled.row(r) = mean_pool(seq);
      }
      features[i] = tape.constant(std::move(pooled));
    } else {
      const std::string prefix = param_names::expert(e.name, "vlad.");
      std::vector<Var> pooled_rows;
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (batch.mask(r, i) == 0.0) {
          pooled_rows.push_back(tape.constant(Matrix::Zero(1, e.aggregated_dim())));
          continue;
        }
        const Matrix& seq = batch.records[r]->features(e.name);
        if (seq.cols() != e.input_dim) {
          throw ConfigError("expert '" + e.name + "': video '" + batch.records[r]->id + "' has " +
                            std::to_string(seq.cols()) + " dims, expected " + std::to_string(e.input_dim));
        }
        pooled_rows.push_back(netvlad_from(params, prefix, tape.constant(seq)));
      }
      features[i] = concat_rows(pooled_rows);
    }
  }

  EncodedVideos out;
  out.mask = batch.mask;
  if (config.variant == Variant::concat) {
    Var joint = l2_normalize_rows(concat_cols(features));
    Eigen::Index c = 0;
    for (int i = 0; i < n; ++i) {
      out.blocks.push_back(slice_cols(joint, c, features[i].cols()));
      c += features[i].cols();
    }
    return out;
  }

  if (tr.projection) {
    for (int i = 0; i < n; ++i) features[i] = project_expert(features[i], config.experts[i], params);
  }
  if (tr.gating) features = gate_experts(features, collaborative_attention(features, batch.mask, params));
  for (int i = 0; i < n; ++i) {
    Var block = gem_from(params, param_names::expert(config.experts[i].name, "gem."), features[i]);
    out.blocks.push_back(scale_rows(block, mask_column(tape, batch.mask, i)));
  }
  return out;
}

EncodedTexts encode_texts(Tape& tape, const ParamVars& params, const ModelConfig& config,
                          const std::vector<const Matrix*>& captions) {
  if (captions.empty()) throw ContractError("encode_texts on an empty batch");
  const int n = config.num_experts();
  const VariantTraits tr = traits(config.variant);

  std::vector<Var> rows;
  rows.reserve(captions.size());
  for (const Matrix* c : captions) {
    if (c->rows() == 0) throw EmptySequenceError("caption with no tokens");
    if (c->cols() != config.text.word_dim) {
      throw DimensionError("caption word vectors have " + std::to_string(c->cols()) + " dims, expected " +
                           std::to_string(config.text.word_dim));
    }
    rows.push_back(netvlad_from(params, "text.vlad.", tape.constant(*c)));
  }
  Var h = concat_rows(rows);

  EncodedTexts out;
  if (config.variant == Variant::concat) {
    Var joint = l2_normalize_rows(affine(h, param(params, "text.concat.w"), param(params, "text.concat.b")));
    Eigen::Index c = 0;
    for (int i = 0; i < n; ++i) {
      const int w = config.experts[i].aggregated_dim();
      out.blocks.push_back(slice_cols(joint, c, w));
      c += w;
    }
    return out;
  }

  for (int i = 0; i < n; ++i) out.blocks.push_back(gem_from(params, param_names::text_gem(config.experts[i].name, ""), h));
  if (tr.mixture_weights) {
    out.weights = softmax_rows(affine(h, param(params, "text.mix.w"), param(params, "text.mix.b")));
  } else {
    out.weights = tape.constant(Matrix::Constant(h.rows(), n, 1.0 / n));
  }
  return out;
}

std::vector<JointEmbedding> to_embeddings(const EncodedVideos& encoded) {
  const Eigen::Index rows = encoded.mask.rows();
  std::vector<JointEmbedding> out(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < encoded.blocks.size(); ++i) {
      out[r].blocks.push_back(encoded.blocks[i].value().row(r));
      out[r].available.push_back(encoded.mask(r, static_cast<Eigen::Index>(i)) != 0.0);
    }
  }
  return out;
}

std::vector<TextEmbedding> to_embeddings(const EncodedTexts& encoded) {
  const Eigen::Index rows = encoded.blocks.at(0).rows();
  std::vector<TextEmbedding> out(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (const Var& b : encoded.blocks) out[r].blocks.push_back(b.value().row(r));
    if (encoded.weighted()) out[r].mixture_weights = encoded.weights.value().row(r);
  }
  return out;
}

JointEmbedding encode_video(const VideoRecord& record, const ModelConfig& config, const ModelParams& params) {
  Tape tape;
  ParamVars vars = constant_params(tape, params);
  VideoBatch batch = make_video_batch(config, {&record});
  return to_embeddings(encode_videos(tape, vars, config, batch)).front();
}

TextEmbedding encode_text(const Matrix& caption, const ModelConfig& config, const ModelParams& params) {
  Tape tape;
  ParamVars vars = constant_params(tape, params);
  return to_embeddings(encode_texts(tape, vars, config, {&caption})).front();
}

}  // namespace ce
