#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ce/autodiff.hpp"

namespace ce {

using GraphFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Central-difference check of reverse-mode gradients with respect to every
/// input. Non-scalar outputs are reduced with a fixed random weighting.
/// Returns ||analytic - numeric||_inf / (||numeric||_inf + 1e-8) over all
/// inputs. `analytic_scale` != 1 deliberately corrupts the analytic side.
double gradient_error(const GraphFn& f, const std::vector<Matrix>& inputs, double h = 1e-6, double analytic_scale = 1.0);

struct GradCheckResult {
  std::string op;
  double worst_error = 0.0;
  std::uint64_t worst_seed = 0;
  int seeds = 0;
  bool passed = false;
};

inline constexpr double kGradTolerance = 1e-5;

/// Names of every differentiable operation the suite covers, in report order.
std::vector<std::string> gradient_suite_ops();

/// Runs each op over seeds 0..seeds-1 with random small shapes.
std::vector<GradCheckResult> run_gradient_suite(int seeds = 20, const std::string& corrupt_op = "",
                                                double tolerance = kGradTolerance);

}  // namespace ce
