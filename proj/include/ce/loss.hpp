#pragma once

#include "ce/autodiff.hpp"

namespace ce {

struct LossConfig {
  double margin = 0.2;
};

/// Bidirectional max-margin ranking loss over a square batch similarity
/// matrix whose diagonal holds the matched pairs:
///   (1/N) sum_i sum_{j != i} [m + s(i,j) - s(i,i)]_+ + [m + s(j,i) - s(i,i)]_+
/// The hinge subgradient at exactly zero is 0.
Var ranking_loss(Var similarities, double margin);
double ranking_loss(const Matrix& similarities, double margin);

}  // namespace ce
