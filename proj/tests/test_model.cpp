#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ce/model.hpp"
#include "support.hpp"

using namespace ce;
using ce::testing::randn;
using ce::testing::random_record;
using ce::testing::small_model;
using ce::testing::uniform_int;

namespace {

const Variant kAllVariants[] = {Variant::concat, Variant::ce_no_mw_p_cg, Variant::moee, Variant::ce_no_cg, Variant::ce};
const Variant kGemVariants[] = {Variant::ce_no_mw_p_cg, Variant::moee, Variant::ce_no_cg, Variant::ce};

RowVector affine_oracle(const RowVector& x, const Matrix& w, const Matrix& b) { return x * w + b.row(0); }

RowVector sigmoid_oracle(const RowVector& x) {
  RowVector y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y(i) = 1.0 / (1.0 + std::exp(-x(i)));
  return y;
}

RowVector mlp_oracle(const RowVector& x, const ModelParams& p, const std::string& prefix) {
  const RowVector hidden = affine_oracle(x, p.at(prefix + "w1"), p.at(prefix + "b1")).cwiseMax(0.0);
  return affine_oracle(hidden, p.at(prefix + "w2"), p.at(prefix + "b2"));
}

RowVector gem_oracle(const RowVector& x, const ModelParams& p, const std::string& prefix) {
  const RowVector y1 = affine_oracle(x, p.at(prefix + "w1"), p.at(prefix + "b1"));
  const RowVector y2 = y1.cwiseProduct(sigmoid_oracle(affine_oracle(y1, p.at(prefix + "w2"), p.at(prefix + "b2"))));
  return y2 / y2.norm();
}

RowVector aggregate_oracle(const VideoRecord& r, const ExpertConfig& e, const ModelParams& p) {
  const Matrix& seq = *r.experts.at(e.name);
  if (e.aggregator == Aggregator::mean) return seq.colwise().mean();
  NetVladParams vp{p.at("video." + e.name + ".vlad.centroids"), p.at("video." + e.name + ".vlad.assign_w"),
                   p.at("video." + e.name + ".vlad.assign_b")};
  return netvlad(seq, vp);
}

// Written straight from the definition: one record, explicit pair loop over
// the experts it actually has.
std::vector<RowVector> ce_video_oracle(const VideoRecord& r, const ModelConfig& cfg, const ModelParams& p) {
  const int n = cfg.num_experts();
  std::vector<RowVector> proj(n);
  std::vector<bool> have(n);
  for (int i = 0; i < n; ++i) {
    const auto& e = cfg.experts[i];
    have[i] = r.has_expert(e.name);
    if (have[i]) proj[i] = affine_oracle(aggregate_oracle(r, e, p), p.at("video." + e.name + ".proj.w"),
                                         p.at("video." + e.name + ".proj.b"));
  }
  std::vector<RowVector> out(n);
  for (int i = 0; i < n; ++i) {
    if (!have[i]) {
      out[i] = RowVector::Zero(cfg.common_dim);
      continue;
    }
    RowVector acc = RowVector::Zero(cfg.common_dim);
    for (int j = 0; j < n; ++j) {
      if (j == i || !have[j]) continue;
      RowVector pair(2 * cfg.common_dim);
      pair << proj[i], proj[j];
      acc += mlp_oracle(pair, p, "gating.g.");
    }
    const RowVector t = mlp_oracle(acc, p, "gating.h.");
    const RowVector gated = proj[i].cwiseProduct(sigmoid_oracle(t));
    out[i] = gem_oracle(gated, p, "video." + cfg.experts[i].name + ".gem.");
  }
  return out;
}

std::vector<bool> random_mask(std::mt19937_64& rng, int n) {
  std::vector<bool> m(n);
  do {
    for (int i = 0; i < n; ++i) m[i] = uniform_int(rng, 0, 1) == 1;
  } while (std::none_of(m.begin(), m.end(), [](bool b) { return b; }));
  return m;
}

}  // namespace

TEST(Variant, TraitsLadder) {
  EXPECT_FALSE(traits(Variant::concat).projection || traits(Variant::concat).gating || traits(Variant::concat).gem ||
               traits(Variant::concat).mixture_weights);
  EXPECT_TRUE(traits(Variant::ce_no_mw_p_cg).gem && !traits(Variant::ce_no_mw_p_cg).mixture_weights &&
              !traits(Variant::ce_no_mw_p_cg).projection);
  EXPECT_TRUE(traits(Variant::moee).gem && traits(Variant::moee).mixture_weights && !traits(Variant::moee).projection &&
              !traits(Variant::moee).gating);
  EXPECT_TRUE(traits(Variant::ce_no_cg).projection && !traits(Variant::ce_no_cg).gating);
  EXPECT_TRUE(traits(Variant::ce).projection && traits(Variant::ce).gating && traits(Variant::ce).mixture_weights);
  for (Variant v : kAllVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("moe"), ConfigError);
}

TEST(InitParams, ParameterSetFollowsVariant) {
  for (Variant v : kAllVariants) {
    const ModelConfig cfg = small_model(v);
    const ModelParams p = init_params(cfg, 0);
    const VariantTraits t = traits(v);
    EXPECT_EQ(p.count("video.scene.proj.w") == 1, t.projection) << to_string(v);
    EXPECT_EQ(p.count("gating.g.w1") == 1, t.gating) << to_string(v);
    EXPECT_EQ(p.count("video.scene.gem.w1") == 1, t.gem) << to_string(v);
    EXPECT_EQ(p.count("text.mix.w") == 1, t.mixture_weights) << to_string(v);
    EXPECT_EQ(p.count("text.concat.w") == 1, v == Variant::concat) << to_string(v);
    EXPECT_EQ(p.count("video.audio.vlad.centroids"), 1u);
    EXPECT_EQ(p.count("text.vlad.centroids"), 1u);
  }
}

TEST(InitParams, NativeDimGemsWithoutProjection) {
  const ModelConfig cfg = small_model(Variant::moee, 8);
  const ModelParams p = init_params(cfg, 1);
  EXPECT_EQ(p.at("video.scene.gem.w1").rows(), 6);
  EXPECT_EQ(p.at("video.audio.gem.w1").rows(), 12);  // 3 clusters x 4 dims
  EXPECT_EQ(p.at("text.audio.gem.w1").cols(), 12);
  const ModelParams q = init_params(small_model(Variant::ce, 8), 1);
  EXPECT_EQ(q.at("video.audio.gem.w1").rows(), 8);
  EXPECT_EQ(q.at("gating.g.w1").rows(), 16);
}

TEST(InitParams, DeterministicPerSeed) {
  const ModelConfig cfg = small_model();
  const ModelParams a = init_params(cfg, 42), b = init_params(cfg, 42), c = init_params(cfg, 43);
  for (const auto& [name, m] : a) {
    EXPECT_EQ(m, b.at(name)) << name;
  }
  EXPECT_NE(a.at("gating.g.w1"), c.at("gating.g.w1"));
}

TEST(ModelConfig, ValidateRejectsBadConfigs) {
  ModelConfig cfg = small_model();
  cfg.experts.push_back(cfg.experts.front());
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_model();
  cfg.experts.clear();
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_model();
  cfg.common_dim = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(VideoEncoder, MatchesPairLoopOracle) {
  std::mt19937_64 rng(7);
  const ModelConfig cfg = small_model(Variant::ce);
  for (int trial = 0; trial < 40; ++trial) {
    const ModelParams p = init_params(cfg, trial);
    const VideoRecord r = random_record(rng, cfg, random_mask(rng, 3));
    const JointEmbedding got = encode_video(r, cfg, p);
    const auto want = ce_video_oracle(r, cfg, p);
    for (int i = 0; i < 3; ++i) {
      EXPECT_LT((got.blocks[i] - want[i]).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial << " expert " << i;
    }
  }
}

TEST(VideoEncoder, SingleExpertSeesEmptyPairSum) {
  std::mt19937_64 rng(8);
  ModelConfig cfg = small_model(Variant::ce);
  cfg.experts.resize(1);
  const ModelParams p = init_params(cfg, 3);
  const VideoRecord r = random_record(rng, cfg, {true});
  EXPECT_LT((encode_video(r, cfg, p).blocks[0] - ce_video_oracle(r, cfg, p)[0]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(VideoEncoder, BlocksUnitNormOrExactlyZero) {
  std::mt19937_64 rng(9);
  for (Variant v : kGemVariants) {
    const ModelConfig cfg = small_model(v);
    const ModelParams p = init_params(cfg, 5);
    for (int trial = 0; trial < 20; ++trial) {
      const auto mask = random_mask(rng, 3);
      const JointEmbedding e = encode_video(random_record(rng, cfg, mask), cfg, p);
      for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(e.available[i], mask[i]);
        if (mask[i]) {
          EXPECT_NEAR(e.blocks[i].norm(), 1.0, 1e-12);
        } else {
          EXPECT_TRUE((e.blocks[i].array() == 0.0).all());
        }
        EXPECT_EQ(e.blocks[i].size(), cfg.block_dim(i));
      }
    }
  }
}

TEST(VideoEncoder, ConcatVariantZeroPadsAndNormalizesJointly) {
  std::mt19937_64 rng(10);
  const ModelConfig cfg = small_model(Variant::concat);
  const ModelParams p = init_params(cfg, 0);
  const VideoRecord r = random_record(rng, cfg, {true, false, true});
  const JointEmbedding e = encode_video(r, cfg, p);
  EXPECT_TRUE((e.blocks[1].array() == 0.0).all());
  EXPECT_NEAR(e.concatenated().norm(), 1.0, 1e-12);
  RowVector raw(6 + 5 + 12);
  raw << r.features("scene").colwise().mean(), RowVector::Zero(5),
      aggregate_oracle(r, cfg.experts[2], p);
  EXPECT_LT((e.concatenated() - raw / raw.norm()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(VideoEncoder, BatchEqualsPerRecord) {
  std::mt19937_64 rng(12);
  for (Variant v : kAllVariants) {
    const ModelConfig cfg = small_model(v);
    const ModelParams p = init_params(cfg, 2);
    std::vector<VideoRecord> records;
    for (int i = 0; i < 6; ++i) records.push_back(random_record(rng, cfg, random_mask(rng, 3)));
    std::vector<const VideoRecord*> ptrs;
    for (const auto& r : records) ptrs.push_back(&r);

    Tape tape;
    const auto batch = to_embeddings(encode_videos(tape, constant_params(tape, p), cfg, make_video_batch(cfg, ptrs)));
    for (std::size_t r = 0; r < records.size(); ++r) {
      const JointEmbedding single = encode_video(records[r], cfg, p);
      EXPECT_LT((batch[r].concatenated() - single.concatenated()).cwiseAbs().maxCoeff(), 1e-12) << to_string(v);
    }
  }
}

TEST(VideoEncoder, MissingExpertDoesNotInfluenceOthers) {
  // A present expert's block depends only on the experts the video has.
  std::mt19937_64 rng(13);
  const ModelConfig cfg = small_model(Variant::ce);
  const ModelParams p = init_params(cfg, 4);
  VideoRecord r = random_record(rng, cfg, {true, true, false});
  VideoRecord zero_rows = r;
  zero_rows.experts["audio"] = Matrix(0, 4);
  VideoRecord absent = r;
  absent.experts.erase("audio");
  const RowVector a = encode_video(r, cfg, p).concatenated();
  EXPECT_EQ(a, encode_video(zero_rows, cfg, p).concatenated());
  EXPECT_EQ(a, encode_video(absent, cfg, p).concatenated());
}

TEST(VideoEncoder, Errors) {
  std::mt19937_64 rng(14);
  const ModelConfig cfg = small_model(Variant::ce);
  const ModelParams p = init_params(cfg, 0);
  EXPECT_THROW(encode_video(random_record(rng, cfg, {false, false, false}), cfg, p), UnencodableRecordError);

  VideoRecord bad = random_record(rng, cfg, {true, true, true});
  bad.experts["object"] = randn(rng, 3, 9);
  try {
    encode_video(bad, cfg, p);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("object"), std::string::npos);
  }
}

TEST(TextEncoder, BlocksAndMixtureWeights) {
  std::mt19937_64 rng(15);
  for (Variant v : kAllVariants) {
    const ModelConfig cfg = small_model(v);
    const ModelParams p = init_params(cfg, 6);
    for (int trial = 0; trial < 10; ++trial) {
      const TextEmbedding t = encode_text(randn(rng, uniform_int(rng, 1, 8), 7), cfg, p);
      ASSERT_EQ(t.num_experts(), 3u);
      if (v == Variant::concat) {
        EXPECT_FALSE(t.mixture_weights.has_value());
        EXPECT_NEAR(t.concatenated().norm(), 1.0, 1e-12);
        continue;
      }
      for (int i = 0; i < 3; ++i) EXPECT_NEAR(t.blocks[i].norm(), 1.0, 1e-12);
      ASSERT_TRUE(t.mixture_weights.has_value());
      EXPECT_NEAR(t.mixture_weights->sum(), 1.0, 1e-12);
      EXPECT_TRUE((t.mixture_weights->array() > 0.0).all());
      if (v == Variant::ce_no_mw_p_cg) {
        EXPECT_LT((t.mixture_weights->array() - 1.0 / 3.0).abs().maxCoeff(), 1e-15);
      }
    }
  }
}

TEST(TextEncoder, Errors) {
  const ModelConfig cfg = small_model();
  const ModelParams p = init_params(cfg, 0);
  EXPECT_THROW(encode_text(Matrix(0, 7), cfg, p), EmptySequenceError);
  EXPECT_THROW(encode_text(Matrix::Ones(3, 5), cfg, p), DimensionError);
}

TEST(TextEncoder, IndependentOfVideoSide) {
  // Same caption, same parameters: identical embedding regardless of what
  // else is in the batch.
  std::mt19937_64 rng(16);
  const ModelConfig cfg = small_model();
  const ModelParams p = init_params(cfg, 0);
  const Matrix c0 = randn(rng, 4, 7), c1 = randn(rng, 6, 7);
  Tape tape;
  const auto both = to_embeddings(encode_texts(tape, constant_params(tape, p), cfg, {&c0, &c1}));
  EXPECT_LT((both[0].concatenated() - encode_text(c0, cfg, p).concatenated()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((both[1].concatenated() - encode_text(c1, cfg, p).concatenated()).cwiseAbs().maxCoeff(), 1e-12);
}
