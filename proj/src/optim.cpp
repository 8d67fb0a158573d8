#include "ce/optim.hpp"

#include <cmath>

namespace ce {

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::radam: return "radam";
    case OptimizerKind::radam_lookahead: return "radam+lookahead";
  }
  return "?";
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "radam") return OptimizerKind::radam;
  if (s == "radam+lookahead") return OptimizerKind::radam_lookahead;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam, radam or radam+lookahead)");
}

void OptimConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (lookahead_k < 1) throw ConfigError("lookahead_k must be >= 1");
  if (!(lookahead_alpha > 0.0 && lookahead_alpha <= 1.0)) throw ConfigError("lookahead_alpha must lie in (0, 1]");
}

double radam_rectification(std::int64_t step, double beta2, double threshold) {
  const double t = static_cast<double>(step);
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double beta2_t = std::pow(beta2, t);
  const double rho_t = rho_inf - 2.0 * t * beta2_t / (1.0 - beta2_t);
  if (rho_t < threshold) return 0.0;
  return std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
}

Optimizer::Optimizer(const OptimConfig& config, const NamedMatrices& params) : config_(config) {
  config_.validate();
  for (const auto& [name, value] : params) {
    state_.first_moment[name] = Matrix::Zero(value.rows(), value.cols());
    state_.second_moment[name] = Matrix::Zero(value.rows(), value.cols());
    if (config_.optimizer == OptimizerKind::radam_lookahead) state_.slow_weights[name] = value;
  }
}

Optimizer::Optimizer(const OptimConfig& config, OptimState state) : config_(config), state_(std::move(state)) {
  config_.validate();
}

void Optimizer::step(NamedMatrices& params, const NamedGradients& grads) {
  inner_step(params, grads);
  if (config_.optimizer == OptimizerKind::radam_lookahead && state_.step % config_.lookahead_k == 0) {
    lookahead_sync(params);
  }
}

void Optimizer::inner_step(NamedMatrices& params, const NamedGradients& grads) {
  ++state_.step;
  const double lr = config_.learning_rate;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double t = static_cast<double>(state_.step);
  const double bias1 = 1.0 - std::pow(b1, t);
  const double bias2 = 1.0 - std::pow(b2, t);
  const bool rectified = config_.optimizer != OptimizerKind::adam;
  const double r = rectified ? radam_rectification(state_.step, b2, config_.rectify_threshold) : 1.0;

  for (auto& [name, theta] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) throw ContractError("optimizer: no gradient for parameter '" + name + "'");
    const Matrix& g = git->second;
    if (g.rows() != theta.rows() || g.cols() != theta.cols()) {
      throw DimensionError("optimizer: gradient shape mismatch for '" + name + "'");
    }
    Matrix& m = state_.first_moment.at(name);
    Matrix& v = state_.second_moment.at(name);
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);

    // Decoupled weight decay.
    if (config_.weight_decay > 0.0) theta -= (lr * config_.weight_decay) * theta;

    if (!rectified || r > 0.0) {
      const Matrix denom = ((v / bias2).array().sqrt() + config_.eps).matrix();
      theta -= ((lr * r / bias1) * m.array() / denom.array()).matrix();
    } else {
      theta -= (lr / bias1) * m;
    }
  }
}

void Optimizer::lookahead_sync(NamedMatrices& params) {
  const double a = config_.lookahead_alpha;
  for (auto& [name, fast] : params) {
    Matrix& slow = state_.slow_weights.at(name);
    // (1 - a) slow + a fast is exactly `fast` when a == 1.
    slow = (1.0 - a) * slow + a * fast;
    fast = slow;
  }
}

}  // namespace ce
