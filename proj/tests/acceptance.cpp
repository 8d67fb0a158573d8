// Acceptance checks, one PASS/FAIL line each. Exit status is nonzero if any
// check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ce/checkpoint.hpp"
#include "ce/gradcheck.hpp"
#include "ce/loss.hpp"
#include "ce/metrics.hpp"
#include "ce/runner.hpp"
#include "ce/similarity.hpp"
#include "ce/train.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ce;
using ce::testing::randn;
using ce::testing::uniform_int;

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& why) {
    if (!ok && pass) detail = why;
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

ModelConfig three_expert_model(Variant variant, int word_dim, int text_clusters) {
  ModelConfig m;
  m.experts = {{"a", 64, Aggregator::mean, 1, 0}, {"b", 32, Aggregator::mean, 1, 0}, {"c", 16, Aggregator::mean, 1, 0}};
  m.text = {word_dim, text_clusters, 1};
  m.variant = variant;
  m.common_dim = 64;
  return m;
}

SyntheticSpec three_expert_data(std::uint64_t seed, int latent, int word_dim, int train, int test, double noise) {
  SyntheticSpec s;
  s.seed = seed;
  s.latent_dim = latent;
  s.word_dim = word_dim;
  s.noise = noise;
  s.videos = {{Split::train, train}, {Split::val, 0}, {Split::test, test}};
  s.experts = {{"a", 64, 1.0}, {"b", 32, 0.7}, {"c", 16, 0.5}};
  return s;
}

RetrievalResult evaluate_on(const Dataset& data, const ModelConfig& model, const ModelParams& params) {
  return evaluate(score_dataset(data, model, params).s, data.caption_video);
}

// 1 -------------------------------------------------------------------------
Outcome gradient_suite() {
  Outcome o;
  const auto start = Clock::now();
  const auto results = run_gradient_suite(20);
  const double elapsed = seconds_since(start);
  const std::vector<std::string> required{"matmul",      "softmax",    "sigmoid", "l2_normalize",
                                          "hadamard",    "netvlad",    "projection", "gating_mlps",
                                          "gem",         "mixture_head", "ranking_loss"};
  std::set<std::string> covered;
  double worst = 0.0;
  for (const auto& r : results) {
    covered.insert(r.op);
    worst = std::max(worst, r.worst_error);
    o.require(r.passed && r.seeds >= 20, r.op + " failed: " + fmt("%.3e", r.worst_error));
  }
  for (const auto& op : required) o.require(covered.count(op) == 1, "missing op " + op);
  o.require(elapsed < 120.0, fmt("took %.1fs", elapsed));
  if (o.pass) o.detail = std::to_string(results.size()) + " ops x 20 seeds, worst rel err " + fmt("%.2e", worst) +
                         ", " + fmt("%.1fs", elapsed);
  return o;
}

// 2 -------------------------------------------------------------------------
Outcome normalization_invariants() {
  Outcome o;
  std::mt19937_64 rng(2);
  const ModelConfig cfg = ce::testing::small_model(Variant::ce);
  const ModelParams params = init_params(cfg, 2);
  const int n = cfg.num_experts();
  double worst_norm = 0.0, worst_sum = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<bool> mask(n);
    do {
      for (int i = 0; i < n; ++i) mask[i] = uniform_int(rng, 0, 1) == 1;
    } while (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }));
    const VideoRecord rec = ce::testing::random_record(rng, cfg, mask);
    const JointEmbedding v = encode_video(rec, cfg, params);
    const TextEmbedding t = encode_text(randn(rng, uniform_int(rng, 1, 8), cfg.text.word_dim), cfg, params);
    for (int i = 0; i < n; ++i) {
      if (mask[i]) {
        worst_norm = std::max(worst_norm, std::abs(v.blocks[i].norm() - 1.0));
      } else {
        o.require(v.available[i] == false && (v.blocks[i].array() == 0.0).all(), "missing block not exactly zero");
      }
      worst_norm = std::max(worst_norm, std::abs(t.blocks[i].norm() - 1.0));
    }
    const RowVector& w = *t.mixture_weights;
    worst_sum = std::max(worst_sum, std::abs(w.sum() - 1.0));
    const std::vector<double> weights(w.data(), w.data() + n);
    for (unsigned bits = 1; bits < (1u << n); ++bits) {
      std::vector<bool> m(n);
      for (int i = 0; i < n; ++i) m[i] = (bits >> i) & 1u;
      double s = 0.0;
      for (double x : renormalize_weights(weights, m)) s += x;
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
  }
  o.require(worst_norm <= 1e-9, fmt("block norm off by %.3e", worst_norm));
  o.require(worst_sum <= 1e-12, fmt("weights sum off by %.3e", worst_sum));
  if (o.pass) o.detail = "1000 records, max |norm-1| " + fmt("%.1e", worst_norm) + ", max |sum-1| " + fmt("%.1e", worst_sum);
  return o;
}

// 3 -------------------------------------------------------------------------
Outcome missing_expert_equivalence() {
  Outcome o;
  std::mt19937_64 rng(3);
  const ModelConfig cfg = ce::testing::small_model(Variant::ce);
  const ModelParams params = init_params(cfg, 3);
  const int n = cfg.num_experts();
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<bool> mask(n);
    do {
      for (int i = 0; i < n; ++i) mask[i] = uniform_int(rng, 0, 1) == 1;
    } while (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }));
    const JointEmbedding v = encode_video(ce::testing::random_record(rng, cfg, mask), cfg, params);
    const TextEmbedding t = encode_text(randn(rng, uniform_int(rng, 1, 8), cfg.text.word_dim), cfg, params);
    const RowVector& w = *t.mixture_weights;
    double mass = 0.0;
    for (int i = 0; i < n; ++i) mass += mask[i] ? w(i) : 0.0;
    RowVector scaled(t.concatenated().size());
    Eigen::Index c = 0;
    for (int i = 0; i < n; ++i) {
      scaled.segment(c, t.blocks[i].size()) = t.blocks[i] * (w(i) / mass);
      c += t.blocks[i].size();
    }
    worst = std::max(worst, std::abs(similarity(v, t) - v.concatenated().dot(scaled)));
  }
  o.require(worst <= 1e-12, fmt("max deviation %.3e", worst));
  if (o.pass) o.detail = "1000 pairs, max deviation " + fmt("%.1e", worst);
  return o;
}

// 4 -------------------------------------------------------------------------
Outcome loss_cases() {
  Outcome o;
  Matrix dominant = Matrix::Constant(5, 5, 0.1);
  dominant.diagonal().setConstant(0.9);
  o.require(ranking_loss(dominant, 0.2) == 0.0, "margin-satisfied loss is not exactly 0");
  o.require(ranking_loss(Matrix::Constant(2, 2, 0.5), 0.2) == 0.4, "uniform 2x2 loss is not exactly 0.4");
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = uniform_int(rng, 1, 12);
    const double m = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    o.require(ranking_loss(randn(rng, n, n), m) >= 0.0, "negative loss");
  }
  if (o.pass) o.detail = "exact 0 and 0.4 cases, 1000 random matrices nonnegative";
  return o;
}

// 5 -------------------------------------------------------------------------
Outcome metrics_oracle() {
  Outcome o;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto [s, owner] = ce::testing::random_retrieval_case(rng, 50, trial % 2 == 0);
    const auto got = evaluate(s, owner);
    const auto want = ce::testing::oracle_ranks(s, owner);
    o.require(got.text_to_video.ranks == want.t2v, "t2v ranks differ on matrix " + std::to_string(trial));
    o.require(got.video_to_text.ranks == want.v2t, "v2t ranks differ on matrix " + std::to_string(trial));
    const auto mapped = evaluate(s.unaryExpr([](double x) { return 2.0 * std::tanh(x) + 1.0; }), owner);
    o.require(mapped.text_to_video.ranks == got.text_to_video.ranks &&
                  mapped.video_to_text.ranks == got.video_to_text.ranks,
              "monotone transform changed ranks on matrix " + std::to_string(trial));
  }
  if (o.pass) o.detail = "200 matrices (half tie-laden), both directions, monotone invariant";
  return o;
}

// 6 -------------------------------------------------------------------------
Outcome untrained_sanity() {
  Outcome o;
  const Dataset test = synthesize(three_expert_data(6, 16, 32, 0, 500, 0.5)).subset(Split::test);
  const ModelConfig cfg = three_expert_model(Variant::ce, 32, 4);
  const double n = static_cast<double>(test.num_videos());
  const double q = static_cast<double>(test.num_captions());
  const double sigma = std::sqrt((n * n - 1.0) / 12.0 / q);
  std::string detail;
  for (std::uint64_t seed : {0, 1, 2}) {
    const double mnr = evaluate_on(test, cfg, init_params(cfg, seed)).text_to_video.mean_rank;
    const double z = (mnr - (n + 1.0) / 2.0) / sigma;
    o.require(std::abs(z) <= 3.0, fmt("seed %.0f: MnR %.2f is %.2f sigma from chance", double(seed), mnr, z));
    detail += fmt(" %.1f", mnr);
  }
  if (o.pass) o.detail = "N=500, chance MnR 250.5, sigma " + fmt("%.2f", sigma) + ", seeds:" + detail;
  return o;
}

// 7 -------------------------------------------------------------------------
Outcome overfit() {
  Outcome o;
  const auto start = Clock::now();
  const Dataset train_data = synthesize(three_expert_data(7, 16, 32, 64, 0, 0.1)).subset(Split::train);
  const ModelConfig cfg = three_expert_model(Variant::ce, 32, 4);
  std::string detail;
  for (std::uint64_t seed : {0, 1, 2}) {
    OptimConfig opt;
    opt.seed = seed;
    opt.batch_size = 32;
    opt.max_steps = 600;
    const TrainResult r = train(train_data, cfg, opt, LossConfig{0.2});
    const double r1 = evaluate_on(train_data, cfg, r.params).text_to_video.recall_at.at(1);
    o.require(r1 >= 0.95, fmt("seed %.0f: R@1 %.3f", double(seed), r1));
    detail += fmt(" %.3f", r1);
  }
  const double elapsed = seconds_since(start);
  o.require(elapsed < 300.0, fmt("took %.1fs", elapsed));
  if (o.pass) o.detail = "600 steps, train R@1 per seed:" + detail + ", " + fmt("%.1fs", elapsed);
  return o;
}

// 8 -------------------------------------------------------------------------
Outcome gating_ablation() {
  Outcome o;
  const Dataset all = synthesize(three_expert_data(100, 64, 16, 4000, 500, 0.5));
  const Dataset train_data = all.subset(Split::train);
  const Dataset test = all.subset(Split::test);
  std::map<Variant, std::vector<double>> score;
  for (Variant v : {Variant::ce, Variant::ce_no_cg, Variant::concat}) {
    const ModelConfig cfg = three_expert_model(v, 16, 4);
    for (std::uint64_t seed : {0, 1, 2}) {
      OptimConfig opt;
      opt.seed = seed;
      opt.batch_size = 64;
      opt.max_steps = 1500;
      const TrainResult r = train(train_data, cfg, opt, LossConfig{0.2});
      score[v].push_back(recall_geometric_mean(evaluate_on(test, cfg, r.params).text_to_video));
    }
  }
  int ce_wins = 0;
  bool beat_concat = true;
  std::string detail = "geo-mean R@{1,5,10} t2v";
  for (int s = 0; s < 3; ++s) {
    ce_wins += score[Variant::ce][s] >= score[Variant::ce_no_cg][s];
    beat_concat = beat_concat && score[Variant::ce][s] > score[Variant::concat][s] &&
                  score[Variant::ce_no_cg][s] > score[Variant::concat][s];
    detail += fmt(" | seed %.0f: ce %.4f, ce_no_cg %.4f", s, score[Variant::ce][s], score[Variant::ce_no_cg][s]) +
              fmt(", concat %.4f", score[Variant::concat][s]);
  }
  o.require(ce_wins >= 2, "ce >= ce_no_cg in " + std::to_string(ce_wins) + " of 3 seeds");
  o.require(beat_concat, "a fused variant did not beat concat in every seed");
  o.detail = (o.pass ? "" : o.detail + "; ") + detail;
  return o;
}

// 9 -------------------------------------------------------------------------
bool bitwise_equal(const NamedMatrices& a, const NamedMatrices& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, m] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second.rows() != m.rows() || it->second.cols() != m.cols()) return false;
    if (std::memcmp(m.data(), it->second.data(), sizeof(double) * m.size()) != 0) return false;
  }
  return true;
}

Outcome determinism() {
  Outcome o;
  ce::testing::TempDir tmp;
  const Dataset data = synthesize(three_expert_data(9, 16, 32, 96, 0, 0.3)).subset(Split::train);
  const ModelConfig cfg = three_expert_model(Variant::ce, 32, 4);
  OptimConfig opt;
  opt.seed = 9;
  opt.batch_size = 32;
  opt.max_steps = 40;
  const LossConfig loss{0.2};

  const TrainResult a = train(data, cfg, opt, loss);
  const TrainResult b = train(data, cfg, opt, loss);
  o.require(std::memcmp(a.losses.data(), b.losses.data(), sizeof(double) * a.losses.size()) == 0 &&
                a.losses.size() == b.losses.size(),
            "loss trajectories differ");
  o.require(bitwise_equal(a.params, b.params), "parameters differ between identical runs");

  OptimConfig half = opt;
  half.max_steps = 17;
  Trainer first(data, cfg, half, loss);
  std::vector<double> losses = first.run({});
  save_checkpoint(tmp / "ck", first.checkpoint("acceptance"));
  Trainer second(data, cfg, opt, loss, load_checkpoint(tmp / "ck"));
  for (double l : second.run({})) losses.push_back(l);
  o.require(losses.size() == a.losses.size() &&
                std::memcmp(losses.data(), a.losses.data(), sizeof(double) * losses.size()) == 0,
            "resumed loss trajectory differs");
  o.require(bitwise_equal(second.params(), a.params), "resumed parameters differ");

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix m = randn(rng, uniform_int(rng, 0, 7), uniform_int(rng, 1, 9));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(m.data()[i]);
    cef1::write_matrix(tmp / "m.cef1", m);
    const auto bytes = cef1::read_file(tmp / "m.cef1");
    const Matrix back = cef1::read_matrix(tmp / "m.cef1");
    o.require(back.rows() == m.rows() && back.cols() == m.cols() &&
                  std::memcmp(back.data(), m.data(), sizeof(double) * m.size()) == 0 && cef1::encode(back) == bytes,
              "CEF1 round trip not bitwise");
  }
  if (o.pass) o.detail = "40-step trajectories identical, resume at step 17 identical, 50 CEF1 files round-trip";
  return o;
}

// 10 ------------------------------------------------------------------------
Outcome multi_seed_report() {
  Outcome o;
  ce::testing::TempDir tmp;
  SyntheticSpec spec = three_expert_data(10, 8, 16, 24, 20, 0.3);
  generate_synthetic(spec, tmp / "data");
  RunConfig cfg;
  cfg.manifest = tmp / "data" / "manifest.jsonl";
  cfg.model = three_expert_model(Variant::ce, 16, 4);
  cfg.model.common_dim = 16;
  cfg.optim.batch_size = 8;
  cfg.optim.max_steps = 5;
  cfg.seeds = {0, 1, 2};
  cfg.output_dir = tmp / "runs";
  run_train(cfg);
  const EvalOutput out = run_eval(cfg, cfg.output_dir);
  const auto names = flatten_metrics(out.runs.at(0));
  o.require(out.summary.size() == names.size(), "summary does not cover every metric");
  for (std::size_t i = 0; i < std::min(names.size(), out.summary.size()); ++i) {
    const MetricSummary& m = out.summary[i];
    o.require(m.name == names[i].first && m.values.size() == 3 && std::isfinite(m.mean) && std::isfinite(m.std),
              "bad summary row " + m.name);
    double mean = 0.0;
    for (double v : m.values) mean += v / 3.0;
    o.require(std::abs(mean - m.mean) < 1e-12, "mean mismatch for " + m.name);
    o.require(out.text.find(m.name) != std::string::npos, "text report lacks " + m.name);
  }
  o.require(out.text.find("mean") != std::string::npos && out.text.find("std") != std::string::npos,
            "text report lacks mean/std columns");
  if (o.pass) o.detail = std::to_string(out.summary.size()) + " metrics with mean and std over seeds 0, 1, 2";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"normalization invariants", normalization_invariants},
      {"missing-expert equivalence", missing_expert_equivalence},
      {"ranking loss", loss_cases},
      {"metrics oracle", metrics_oracle},
      {"untrained model at chance", untrained_sanity},
      {"synthetic overfit", overfit},
      {"gating ablation", gating_ablation},
      {"determinism and persistence", determinism},
      {"multi-seed report", multi_seed_report},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto start = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s %2zu %-28s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
