#include "ce/aggregation.hpp"

#include <cmath>

namespace ce {

std::string to_string(Aggregator a) { return a == Aggregator::mean ? "mean" : "netvlad"; }

Aggregator parse_aggregator(const std::string& s) {
  if (s == "mean") return Aggregator::mean;
  if (s == "netvlad") return Aggregator::netvlad;
  throw ConfigError("unknown aggregator '" + s + "' (expected mean or netvlad)");
}

NetVladParams NetVladParams::init(int clusters, int ghosts, int dim, std::mt19937_64& rng, double alpha) {
  if (clusters < 1 || ghosts < 0 || dim < 1) throw ConfigError("netvlad needs clusters >= 1, ghosts >= 0, dim >= 1");
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  const int total = clusters + ghosts;
  Matrix all(total, dim);
  for (Eigen::Index i = 0; i < all.size(); ++i) all.data()[i] = normal(rng);

  NetVladParams p;
  p.centroids = all.topRows(clusters);
  p.assign_w = 2.0 * alpha * all.transpose();
  p.assign_b = -alpha * all.rowwise().squaredNorm().transpose();
  return p;
}

RowVector mean_pool(const Matrix& seq) {
  if (seq.rows() == 0) throw EmptySequenceError("mean_pool over an empty sequence");
  return ce::mean_rows(seq);
}

Var mean_pool(Var seq) { return mean_rows(seq); }

Var netvlad(Var seq, Var centroids, Var assign_w, Var assign_b) {
  if (seq.rows() == 0) throw EmptySequenceError("netvlad over an empty sequence");
  if (seq.cols() != centroids.cols() || assign_w.rows() != seq.cols()) {
    throw DimensionError("netvlad: sequence " + shape_string(seq.rows(), seq.cols()) + " vs centroids " +
                         shape_string(centroids.rows(), centroids.cols()));
  }
  const Eigen::Index clusters = centroids.rows();
  if (assign_w.cols() < clusters) throw DimensionError("netvlad: fewer assignment columns than clusters");

  Var assign = softmax_rows(affine(seq, assign_w, assign_b));
  Var real = slice_cols(assign, 0, clusters);                      // T x K
  Var weighted = matmul(transpose(real), seq);                     // K x d
  Var mass = transpose(col_sums(real));                            // K x 1
  Var residual = sub(weighted, scale_rows(centroids, mass));       // sum_t a_k(x_t) (x_t - c_k)
  Var intra = l2_normalize_rows(residual);
  return l2_normalize_rows(reshape(intra, 1, clusters * seq.cols()));
}

RowVector netvlad(const Matrix& seq, const NetVladParams& p) {
  Tape tape;
  Var out = netvlad(tape.constant(seq), tape.constant(p.centroids), tape.constant(p.assign_w),
                    tape.constant(p.assign_b));
  return out.value().row(0);
}

}  // namespace ce
