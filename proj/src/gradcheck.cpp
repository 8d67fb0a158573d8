#include "ce/gradcheck.hpp"

#include <cmath>
#include <memory>
#include <random>

#include "ce/aggregation.hpp"
#include "ce/loss.hpp"
#include "ce/model.hpp"
#include "ce/similarity.hpp"

namespace ce {

namespace {

Var reduce(Tape& tape, Var out, const Matrix& weights) {
  if (out.value().size() == 1) return out;
  return sum(hadamard(out, tape.constant(weights)));
}

double evaluate(const GraphFn& f, const std::vector<Matrix>& inputs, const Matrix& weights) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.constant(m));
  return reduce(tape, f(tape, vars), weights).scalar();
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double stddev = 1.0) {
  std::normal_distribution<double> n(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

int pick(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

struct Case {
  GraphFn f;
  std::vector<Matrix> inputs;
};

ParamVars as_params(const std::vector<std::string>& names, const std::vector<Var>& vars, std::size_t offset = 0) {
  ParamVars out;
  for (std::size_t i = 0; i < names.size(); ++i) out.emplace(names[i], vars[offset + i]);
  return out;
}

Case make_case(const std::string& op, std::mt19937_64& rng) {
  if (op == "matmul") {
    const int m = pick(rng, 1, 4), k = pick(rng, 1, 4), n = pick(rng, 1, 4);
    return {[](Tape&, const std::vector<Var>& v) { return matmul(v[0], v[1]); },
            {random_matrix(rng, m, k), random_matrix(rng, k, n)}};
  }
  if (op == "softmax") {
    return {[](Tape&, const std::vector<Var>& v) { return softmax_rows(v[0]); },
            {random_matrix(rng, pick(rng, 1, 3), pick(rng, 1, 5), 2.0)}};
  }
  if (op == "sigmoid") {
    return {[](Tape&, const std::vector<Var>& v) { return sigmoid(v[0]); },
            {random_matrix(rng, pick(rng, 1, 3), pick(rng, 1, 5), 2.0)}};
  }
  if (op == "l2_normalize") {
    return {[](Tape&, const std::vector<Var>& v) { return l2_normalize_rows(v[0]); },
            {random_matrix(rng, pick(rng, 1, 3), pick(rng, 2, 6))}};
  }
  if (op == "hadamard") {
    const int r = pick(rng, 1, 3), c = pick(rng, 1, 5);
    return {[](Tape&, const std::vector<Var>& v) { return hadamard(v[0], v[1]); },
            {random_matrix(rng, r, c), random_matrix(rng, r, c)}};
  }
  if (op == "netvlad") {
    const int t = pick(rng, 1, 5), d = pick(rng, 2, 4), k = pick(rng, 1, 3), g = pick(rng, 0, 2);
    NetVladParams p = NetVladParams::init(k, g, d, rng);
    p.assign_w += random_matrix(rng, p.assign_w.rows(), p.assign_w.cols(), 0.3);
    return {[](Tape&, const std::vector<Var>& v) { return netvlad(v[0], v[1], v[2], v[3]); },
            {random_matrix(rng, t, d), p.centroids, p.assign_w, p.assign_b}};
  }
  if (op == "projection") {
    ExpertConfig e{"probe", pick(rng, 1, 5), Aggregator::mean, 1, 0};
    const int b = pick(rng, 1, 3), out = pick(rng, 1, 4);
    return {[e](Tape&, const std::vector<Var>& v) {
              return project_expert(v[0], e, as_params({"video.probe.proj.b", "video.probe.proj.w"}, v, 1));
            },
            {random_matrix(rng, b, e.input_dim), random_matrix(rng, 1, out), random_matrix(rng, e.input_dim, out)}};
  }
  if (op == "gating_mlps") {
    const int n = 3, d = pick(rng, 2, 4), h = pick(rng, 2, 5), b = pick(rng, 1, 3);
    Matrix mask = Matrix::Ones(b, n);
    for (Eigen::Index r = 0; r < b; ++r) mask(r, pick(rng, 0, n - 1)) = 0.0;
    const std::vector<std::string> names{"gating.g.b1", "gating.g.b2", "gating.g.w1", "gating.g.w2",
                                         "gating.h.b1", "gating.h.b2", "gating.h.w1", "gating.h.w2"};
    std::vector<Matrix> inputs;
    for (int i = 0; i < n; ++i) inputs.push_back(random_matrix(rng, b, d));
    inputs.push_back(random_matrix(rng, 1, h, 0.5));
    inputs.push_back(random_matrix(rng, 1, d, 0.5));
    inputs.push_back(random_matrix(rng, 2 * d, h, 0.7));
    inputs.push_back(random_matrix(rng, h, d, 0.7));
    inputs.push_back(random_matrix(rng, 1, h, 0.5));
    inputs.push_back(random_matrix(rng, 1, d, 0.5));
    inputs.push_back(random_matrix(rng, d, h, 0.7));
    inputs.push_back(random_matrix(rng, h, d, 0.7));
    return {[names, mask, n](Tape& tape, const std::vector<Var>& v) {
              std::vector<Var> proj(v.begin(), v.begin() + n);
              auto gated = gate_experts(proj, collaborative_attention(proj, mask, as_params(names, v, n)));
              std::vector<Var> masked;
              for (int i = 0; i < n; ++i) masked.push_back(scale_rows(gated[i], tape.constant(Matrix(mask.col(i)))));
              return concat_cols(masked);
            },
            inputs};
  }
  if (op == "gem") {
    const int b = pick(rng, 1, 3), in = pick(rng, 1, 4), out = pick(rng, 2, 4);
    return {[](Tape&, const std::vector<Var>& v) { return gem(v[0], v[1], v[2], v[3], v[4]); },
            {random_matrix(rng, b, in), random_matrix(rng, in, out), random_matrix(rng, 1, out),
             random_matrix(rng, out, out), random_matrix(rng, 1, out)}};
  }
  if (op == "mixture_head") {
    const int b = pick(rng, 1, 3), in = pick(rng, 1, 5), n = pick(rng, 1, 4);
    return {[](Tape&, const std::vector<Var>& v) { return softmax_rows(affine(v[0], v[1], v[2])); },
            {random_matrix(rng, b, in), random_matrix(rng, in, n), random_matrix(rng, 1, n)}};
  }
  if (op == "ranking_loss") {
    const int n = pick(rng, 2, 5);
    const double margin = 0.2;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix s(n, n);
    // Keep every hinge argument away from its kink.
    for (bool ok = false; !ok;) {
      for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = u(rng);
      ok = true;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (i == j) continue;
          ok = ok && std::abs(margin + s(i, j) - s(i, i)) > 1e-3 && std::abs(margin + s(j, i) - s(i, i)) > 1e-3;
        }
      }
    }
    return {[margin](Tape&, const std::vector<Var>& v) { return ranking_loss(v[0], margin); }, {s}};
  }
  if (op == "similarity") {
    const int n = pick(rng, 1, 3), nv = pick(rng, 1, 3), nt = pick(rng, 1, 3), d = pick(rng, 2, 3);
    Matrix mask = Matrix::Ones(nv, n);
    for (Eigen::Index r = 0; r < nv; ++r) {
      if (n > 1) mask(r, pick(rng, 0, n - 1)) = 0.0;
    }
    std::vector<Matrix> inputs;
    for (int i = 0; i < n; ++i) inputs.push_back(random_matrix(rng, nv, d));
    for (int i = 0; i < n; ++i) inputs.push_back(random_matrix(rng, nt, d));
    inputs.push_back(random_matrix(rng, nt, n));
    return {[n, mask](Tape& tape, const std::vector<Var>& v) {
              EncodedVideos ev;
              ev.mask = mask;
              EncodedTexts et;
              for (int i = 0; i < n; ++i) {
                ev.blocks.push_back(scale_rows(l2_normalize_rows(v[i]), tape.constant(Matrix(mask.col(i)))));
                et.blocks.push_back(l2_normalize_rows(v[n + i]));
              }
              et.weights = softmax_rows(v[2 * n]);
              return similarity_matrix(ev, et);
            },
            inputs};
  }
  if (op == "end_to_end") {
    ModelConfig cfg;
    cfg.experts = {{"slow", 3, Aggregator::mean, 1, 0}, {"dyn", 2, Aggregator::netvlad, 2, 1}};
    cfg.text = {2, 2, 1};
    cfg.common_dim = 3;
    cfg.gating_hidden = 4;
    cfg.variant = Variant::ce;
    const ModelParams params = init_params(cfg, rng());

    auto records = std::make_shared<std::vector<VideoRecord>>(3);
    auto captions = std::make_shared<std::vector<Matrix>>();
    for (int r = 0; r < 3; ++r) {
      (*records)[r].id = "r" + std::to_string(r);
      (*records)[r].experts["slow"] = random_matrix(rng, pick(rng, 1, 3), 3);
      if (r != 1) (*records)[r].experts["dyn"] = random_matrix(rng, pick(rng, 1, 3), 2);
      captions->push_back(random_matrix(rng, pick(rng, 1, 3), 2));
    }
    std::vector<std::string> names;
    std::vector<Matrix> inputs;
    for (const auto& [name, m] : params) {
      names.push_back(name);
      inputs.push_back(m);
    }
    return {[cfg, names, records, captions](Tape& tape, const std::vector<Var>& v) {
              ParamVars pv = as_params(names, v);
              VideoBatch vb = make_video_batch(cfg, {&(*records)[0], &(*records)[1], &(*records)[2]});
              EncodedVideos ev = encode_videos(tape, pv, cfg, vb);
              EncodedTexts et = encode_texts(tape, pv, cfg, {&(*captions)[0], &(*captions)[1], &(*captions)[2]});
              return ranking_loss(similarity_matrix(ev, et), 0.2);
            },
            inputs};
  }
  throw ContractError("gradient suite has no case for '" + op + "'");
}

}  // namespace

double gradient_error(const GraphFn& f, const std::vector<Matrix>& inputs, double h, double analytic_scale) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.variable(m));
  Var out = f(tape, vars);

  std::mt19937_64 wrng(0x5eed);
  Matrix weights = random_matrix(wrng, out.rows(), out.cols());
  Var loss = reduce(tape, out, weights);
  tape.backward(loss);

  double diff = 0.0, scale = 0.0;
  std::vector<Matrix> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix analytic = tape.gradient(vars[k]) * analytic_scale;
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k].data()[i];
      probe[k].data()[i] = orig + h;
      const double up = evaluate(f, probe, weights);
      probe[k].data()[i] = orig - h;
      const double down = evaluate(f, probe, weights);
      probe[k].data()[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      diff = std::max(diff, std::abs(analytic.data()[i] - numeric));
      scale = std::max(scale, std::abs(numeric));
    }
  }
  return diff / (scale + 1e-8);
}

std::vector<std::string> gradient_suite_ops() {
  return {"matmul",     "softmax",     "sigmoid",      "l2_normalize", "hadamard",   "netvlad",   "projection",
          "gating_mlps", "gem",        "mixture_head", "ranking_loss", "similarity", "end_to_end"};
}

std::vector<GradCheckResult> run_gradient_suite(int seeds, const std::string& corrupt_op, double tolerance) {
  std::vector<GradCheckResult> out;
  for (const auto& op : gradient_suite_ops()) {
    GradCheckResult r;
    r.op = op;
    r.seeds = seeds;
    for (int s = 0; s < seeds; ++s) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(s) * 7919 + std::hash<std::string>{}(op));
      Case c = make_case(op, rng);
      const double err = gradient_error(c.f, c.inputs, 1e-6, op == corrupt_op ? 1.01 : 1.0);
      if (err > r.worst_error || s == 0) {
        r.worst_error = err;
        r.worst_seed = static_cast<std::uint64_t>(s);
      }
    }
    r.passed = r.worst_error < tolerance;
    out.push_back(r);
  }
  return out;
}

}  // namespace ce
