#include "ce/loss.hpp"

namespace ce {

namespace {

void check_square(Eigen::Index rows, Eigen::Index cols) {
  if (rows != cols || rows == 0) throw DimensionError("ranking_loss needs a nonempty square matrix, got " + shape_string(rows, cols));
}

}  // namespace

Var ranking_loss(Var s, double margin) {
  check_square(s.rows(), s.cols());
  if (margin < 0.0) throw ConfigError("ranking_loss: margin must be nonnegative");
  Tape& tape = *s.tape();
  const Eigen::Index n = s.rows();
  Var positives = diag(s);  // n x 1
  Matrix off_diagonal = Matrix::Ones(n, n);
  off_diagonal.diagonal().setZero();
  Var off = tape.constant(off_diagonal);

  // [i][j]: m + s(i,j) - s(i,i)
  Var rows = relu(add_scalar(add_col(s, scale(positives, -1.0)), margin));
  // [j][i]: m + s(j,i) - s(i,i), i.e. column i against its diagonal entry
  Var cols = relu(add_scalar(add_row(s, scale(transpose(positives), -1.0)), margin));
  Var total = add(sum(hadamard(rows, off)), sum(hadamard(cols, off)));
  return scale(total, 1.0 / static_cast<double>(n));
}

double ranking_loss(const Matrix& s, double margin) {
  Tape tape;
  return ranking_loss(tape.constant(s), margin).scalar();
}

}  // namespace ce
