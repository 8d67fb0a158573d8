#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ce/tensor.hpp"

namespace ce {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

using NamedMatrices = std::map<std::string, Matrix>;
using NamedGradients = NamedMatrices;
using ParamVars = std::map<std::string, Var>;

/// Reverse-mode tape. Nodes are appended in evaluation order, which is a
/// topological order, so backward is a single reverse sweep. One tape per
/// step; nothing persists between steps.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);
  Var parameter(const std::string& name, Matrix value);
  ParamVars parameters(const NamedMatrices& params);

  /// Records an op result. `parents` decide whether the node needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, Backprop backprop);
  Var record(Matrix value, const std::vector<Var>& parents, Backprop backprop);

  void backward(Var loss);

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  /// Gradient of `v`, zero-filled if the sweep never reached it.
  Matrix gradient(Var v) const;
  NamedGradients parameter_gradients() const;

  /// Adds `g` into the gradient slot of `v` (used by backprop closures).
  void accumulate(Var v, const Matrix& g);
  template <typename Expr>
  void accumulate(Var v, const Eigen::MatrixBase<Expr>& g) {
    accumulate(v, Matrix(g));
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backprop backprop;
  };
  std::vector<Node> nodes_;
  std::map<std::string, int> params_;
};

// ---------------------------------------------------------------------------
// Differentiable ops. All shapes are checked; mismatches throw DimensionError.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var divide(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// a (MxN) + row (1xN) broadcast down the rows.
Var add_row(Var a, Var row);
/// a (MxN) + col (Mx1) broadcast across the columns.
Var add_col(Var a, Var col);
/// Multiplies row r of a by col(r); col is Mx1.
Var scale_rows(Var a, Var col);
/// Multiplies column c of a by row(c); row is 1xN.
Var scale_cols(Var a, Var row);
/// x W + b with W (in x out) and b (1 x out).
Var affine(Var x, Var w, Var b);

Var sigmoid(Var x);
Var relu(Var x);
Var softmax_rows(Var x);
Var l2_normalize_rows(Var x, double eps = kNormEps);

Var sum(Var x);
Var mean_rows(Var x);
Var col_sums(Var x);
Var transpose(Var x);
Var diag(Var x);
Var slice_cols(Var x, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var x, Eigen::Index start, Eigen::Index count);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
/// Row-major reinterpretation.
Var reshape(Var x, Eigen::Index rows, Eigen::Index cols);

/// Evaluates `loss_fn` on a fresh tape with every entry of `params`
/// registered as a named leaf and returns d loss / d param for all of them.
/// Parameters the loss never touches get an exact zero gradient.
using LossFn = std::function<Var(Tape&, const ParamVars&)>;
NamedGradients gradients(const LossFn& loss_fn, const NamedMatrices& params, double* loss_value = nullptr);

}  // namespace ce
