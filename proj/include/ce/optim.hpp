#pragma once

#include <cstdint>
#include <string>

#include "ce/autodiff.hpp"

namespace ce {

enum class OptimizerKind { adam, radam, radam_lookahead };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& s);

struct OptimConfig {
  OptimizerKind optimizer = OptimizerKind::radam_lookahead;
  double learning_rate = 0.01;
  double weight_decay = 5e-5;
  int batch_size = 32;
  int max_steps = 1000;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // RAdam uses the adaptive step once the variance length exceeds this.
  double rectify_threshold = 5.0;
  int lookahead_k = 5;
  double lookahead_alpha = 0.5;

  void validate() const;
};

/// Per-parameter optimizer state. Everything needed to resume bitwise.
struct OptimState {
  std::int64_t step = 0;        // inner optimizer steps taken
  NamedMatrices first_moment;   // m
  NamedMatrices second_moment;  // v
  NamedMatrices slow_weights;   // lookahead anchor, empty unless enabled
};

/// Adam / RAdam with decoupled weight decay, optionally wrapped in Lookahead.
class Optimizer {
 public:
  Optimizer(const OptimConfig& config, const NamedMatrices& params);
  Optimizer(const OptimConfig& config, OptimState state);

  /// One inner update followed, every k steps, by the Lookahead sync.
  void step(NamedMatrices& params, const NamedGradients& grads);

  const OptimState& state() const { return state_; }
  const OptimConfig& config() const { return config_; }

 private:
  void inner_step(NamedMatrices& params, const NamedGradients& grads);
  void lookahead_sync(NamedMatrices& params);

  OptimConfig config_;
  OptimState state_;
};

/// Rectification term r_t of RAdam, or 0 when the variance estimate is not
/// yet tractable (falls back to momentum SGD).
double radam_rectification(std::int64_t step, double beta2, double threshold);

}  // namespace ce
