#include "ce/autodiff.hpp"

#include <sstream>

namespace ce {

std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << "[" << rows << "x" << cols << "]";
  return os.str();
}

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractError("scalar() on non-scalar value " + shape_string(v));
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, {}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), true, {}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(const std::string& name, Matrix value) {
  if (params_.count(name)) throw ContractError("parameter registered twice: " + name);
  Var v = variable(std::move(value));
  params_[name] = v.id();
  return v;
}

ParamVars Tape::parameters(const NamedMatrices& params) {
  ParamVars out;
  for (const auto& [name, value] : params) out.emplace(name, parameter(name, value));
  return out;
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backprop backprop) {
  return record(std::move(value), std::vector<Var>(parents), std::move(backprop));
}

Var Tape::record(Matrix value, const std::vector<Var>& parents, Backprop backprop) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw ContractError("op mixes values from different tapes");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs, needs ? std::move(backprop) : Backprop{}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("backward on a value from another tape");
  const Matrix& lv = nodes_[loss.id()].value;
  if (lv.size() != 1) throw ContractError("backward needs a scalar loss, got " + shape_string(lv));
  for (Node& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0 || !n.backprop) continue;
    n.backprop(*this, id);
  }
}

Matrix Tape::gradient(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

NamedGradients Tape::parameter_gradients() const {
  NamedGradients out;
  for (const auto& [name, id] : params_) out.emplace(name, gradient(Var(const_cast<Tape*>(this), id)));
  return out;
}

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("op on an empty Var");
  return *a.tape();
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ " + shape_string(a.rows(), a.cols()) + " * " +
                         shape_string(b.rows(), b.cols()));
  }
  Tape& t = tape_of(a);
  return t.record(a.value() * b.value(), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b.id())) t.accumulate(b, a.value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tape& t = tape_of(a);
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& t, int self) {
    t.accumulate(a, t.grad(self));
    t.accumulate(b, t.grad(self));
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tape& t = tape_of(a);
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& t, int self) {
    t.accumulate(a, t.grad(self));
    t.accumulate(b, -t.grad(self));
  });
}

Var hadamard(Var a, Var b) {
  require_same_shape("hadamard", a, b);
  Tape& t = tape_of(a);
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.requires_grad(b.id())) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var divide(Var a, Var b) {
  require_same_shape("divide", a, b);
  Tape& t = tape_of(a);
  return t.record(a.value().cwiseQuotient(b.value()), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix gb = g.cwiseQuotient(b.value());
    if (t.requires_grad(a.id())) t.accumulate(a, gb);
    if (t.requires_grad(b.id())) {
      t.accumulate(b, -gb.cwiseProduct(a.value()).cwiseQuotient(b.value()));
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  return t.record(a.value() * s, {a}, [a, s](Tape& t, int self) { t.accumulate(a, t.grad(self) * s); });
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a);
  return t.record((a.value().array() + s).matrix(), {a},
                  [a](Tape& t, int self) { t.accumulate(a, t.grad(self)); });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: " + shape_string(a.rows(), a.cols()) + " + row " +
                         shape_string(row.rows(), row.cols()));
  }
  Tape& t = tape_of(a);
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return t.record(std::move(out), {a, row}, [a, row](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    t.accumulate(a, g);
    if (t.requires_grad(row.id())) t.accumulate(row, g.colwise().sum());
  });
}

Var add_col(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw DimensionError("add_col: " + shape_string(a.rows(), a.cols()) + " + col " +
                         shape_string(col.rows(), col.cols()));
  }
  Tape& t = tape_of(a);
  Matrix out = a.value();
  out.colwise() += col.value().col(0);
  return t.record(std::move(out), {a, col}, [a, col](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    t.accumulate(a, g);
    if (t.requires_grad(col.id())) t.accumulate(col, g.rowwise().sum());
  });
}

Var scale_rows(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw DimensionError("scale_rows: " + shape_string(a.rows(), a.cols()) + " by " +
                         shape_string(col.rows(), col.cols()));
  }
  Tape& t = tape_of(a);
  Matrix out = col.value().col(0).asDiagonal() * a.value();
  return t.record(std::move(out), {a, col}, [a, col](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) t.accumulate(a, col.value().col(0).asDiagonal() * g);
    if (t.requires_grad(col.id())) t.accumulate(col, g.cwiseProduct(a.value()).rowwise().sum());
  });
}

Var scale_cols(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("scale_cols: " + shape_string(a.rows(), a.cols()) + " by " +
                         shape_string(row.rows(), row.cols()));
  }
  Tape& t = tape_of(a);
  Matrix out = a.value() * row.value().row(0).asDiagonal();
  return t.record(std::move(out), {a, row}, [a, row](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) t.accumulate(a, g * row.value().row(0).asDiagonal());
    if (t.requires_grad(row.id())) t.accumulate(row, g.cwiseProduct(a.value()).colwise().sum());
  });
}

Var affine(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

Var sigmoid(Var x) {
  Tape& t = tape_of(x);
  Matrix y = ce::sigmoid(x.value());
  return t.record(y, {x}, [x, y](Tape& t, int self) {
    t.accumulate(x, t.grad(self).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var relu(Var x) {
  Tape& t = tape_of(x);
  // Subgradient at exactly zero is taken as 0.
  return t.record(ce::relu(x.value()), {x}, [x](Tape& t, int self) {
    t.accumulate(x, t.grad(self).cwiseProduct(
                        x.value().unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; })));
  });
}

Var softmax_rows(Var x) {
  Tape& t = tape_of(x);
  Matrix y = ce::softmax_rows(x.value());
  return t.record(y, {x}, [x, y](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      dx.row(r) = y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    t.accumulate(x, dx);
  });
}

Var l2_normalize_rows(Var x, double eps) {
  if (!(eps > 0.0)) throw ContractError("l2_normalize: eps must be positive");
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  Vector norms(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) norms(r) = xv.row(r).norm();
  Matrix y = ce::l2_normalize_rows(xv, eps);
  return t.record(y, {x}, [x, y, norms, eps](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      if (norms(r) >= eps) {
        // d(x/|x|) = (g - y (y.g)) / |x|
        dx.row(r) = (g.row(r) - y.row(r) * y.row(r).dot(g.row(r))) / norms(r);
      } else {
        dx.row(r) = g.row(r) / eps;
      }
    }
    t.accumulate(x, dx);
  });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return t.record(std::move(out), {x}, [x](Tape& t, int self) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
  });
}

Var mean_rows(Var x) {
  if (x.rows() == 0) throw EmptySequenceError("mean over zero rows");
  Tape& t = tape_of(x);
  return t.record(Matrix(ce::mean_rows(x.value())), {x}, [x](Tape& t, int self) {
    Matrix dx = t.grad(self).replicate(x.rows(), 1) / static_cast<double>(x.rows());
    t.accumulate(x, dx);
  });
}

Var col_sums(Var x) {
  Tape& t = tape_of(x);
  return t.record(Matrix(x.value().colwise().sum()), {x},
                  [x](Tape& t, int self) { t.accumulate(x, t.grad(self).replicate(x.rows(), 1)); });
}

Var transpose(Var x) {
  Tape& t = tape_of(x);
  return t.record(Matrix(x.value().transpose()), {x},
                  [x](Tape& t, int self) { t.accumulate(x, t.grad(self).transpose()); });
}

Var diag(Var x) {
  if (x.rows() != x.cols()) throw DimensionError("diag: non-square " + shape_string(x.rows(), x.cols()));
  Tape& t = tape_of(x);
  return t.record(Matrix(x.value().diagonal()), {x}, [x](Tape& t, int self) {
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    dx.diagonal() = t.grad(self).col(0);
    t.accumulate(x, dx);
  });
}

Var slice_cols(Var x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw DimensionError("slice_cols out of range on " + shape_string(x.rows(), x.cols()));
  }
  Tape& t = tape_of(x);
  return t.record(Matrix(x.value().middleCols(start, count)), {x}, [x, start, count](Tape& t, int self) {
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    dx.middleCols(start, count) = t.grad(self);
    t.accumulate(x, dx);
  });
}

Var slice_rows(Var x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.rows()) {
    throw DimensionError("slice_rows out of range on " + shape_string(x.rows(), x.cols()));
  }
  Tape& t = tape_of(x);
  return t.record(Matrix(x.value().middleRows(start, count)), {x}, [x, start, count](Tape& t, int self) {
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    dx.middleRows(start, count) = t.grad(self);
    t.accumulate(x, dx);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols of nothing");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return tape_of(parts[0]).record(std::move(out), parts, [parts](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Eigen::Index c = 0;
    for (const Var& p : parts) {
      if (t.requires_grad(p.id())) t.accumulate(p, g.middleCols(c, p.cols()));
      c += p.cols();
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows of nothing");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw DimensionError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return tape_of(parts[0]).record(std::move(out), parts, [parts](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Eigen::Index r = 0;
    for (const Var& p : parts) {
      if (t.requires_grad(p.id())) t.accumulate(p, g.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var reshape(Var x, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != x.value().size()) {
    throw DimensionError("reshape " + shape_string(x.rows(), x.cols()) + " to " + shape_string(rows, cols));
  }
  Tape& t = tape_of(x);
  Matrix out = Eigen::Map<const Matrix>(x.value().data(), rows, cols);
  return t.record(std::move(out), {x}, [x](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    t.accumulate(x, Matrix(Eigen::Map<const Matrix>(g.data(), x.rows(), x.cols())));
  });
}

NamedGradients gradients(const LossFn& loss_fn, const NamedMatrices& params, double* loss_value) {
  Tape tape;
  ParamVars vars = tape.parameters(params);
  Var loss = loss_fn(tape, vars);
  if (loss.value().size() != 1) {
    throw ContractError("gradients: loss must be scalar, got " + shape_string(loss.rows(), loss.cols()));
  }
  if (loss_value) *loss_value = loss.scalar();
  tape.backward(loss);
  return tape.parameter_gradients();
}

}  // namespace ce
