#pragma once

#include <random>
#include <string>

#include "ce/autodiff.hpp"

namespace ce {

enum class Aggregator { mean, netvlad };

std::string to_string(Aggregator a);
Aggregator parse_aggregator(const std::string& s);

/// Soft-assignment VLAD parameters. The first `clusters` columns of the
/// assignment map belong to real clusters; the remaining `ghosts` columns
/// only absorb assignment mass and never produce an output block.
struct NetVladParams {
  Matrix centroids;  // clusters x dim
  Matrix assign_w;   // dim x (clusters + ghosts)
  Matrix assign_b;   // 1 x (clusters + ghosts)

  int clusters() const { return static_cast<int>(centroids.rows()); }
  int ghosts() const { return static_cast<int>(assign_w.cols() - centroids.rows()); }
  int dim() const { return static_cast<int>(centroids.cols()); }
  int output_dim() const { return clusters() * dim(); }

  /// Centroids ~ N(0, 1/dim); assignment tied to centroids with alpha:
  /// w_k = 2 alpha c_k, b_k = -alpha |c_k|^2. Ghost centroids are drawn the
  /// same way and only seed the assignment columns.
  static NetVladParams init(int clusters, int ghosts, int dim, std::mt19937_64& rng, double alpha = 1.0);
};

RowVector mean_pool(const Matrix& seq);
Var mean_pool(Var seq);

/// NetVLAD over a T x d sequence; output is 1 x (clusters * d), each cluster
/// block intra-normalized and the concatenation l2-normalized.
Var netvlad(Var seq, Var centroids, Var assign_w, Var assign_b);
RowVector netvlad(const Matrix& seq, const NetVladParams& p);

}  // namespace ce
