#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ce {

// Row-major dense storage for every tensor in the model. Vectors are 1xN rows,
// batches stack one sample per row.
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;
using Vector = Eigen::VectorXd;

inline constexpr double kNormEps = 1e-12;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class EmptySequenceError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

std::string shape_string(Eigen::Index rows, Eigen::Index cols);

template <typename A>
std::string shape_string(const Eigen::MatrixBase<A>& m) {
  return shape_string(m.rows(), m.cols());
}

// ---------------------------------------------------------------------------
// Forward kernels. Expression-friendly, templated on the scalar type; the
// autodiff layer and the inference path both go through these.

template <typename Derived>
MatrixX<typename Derived::Scalar> sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  // Split on sign so exp never overflows.
  return x.unaryExpr([](S v) {
    if (v >= S(0)) return S(1) / (S(1) + std::exp(-v));
    const S e = std::exp(v);
    return e / (S(1) + e);
  });
}

template <typename Derived>
MatrixX<typename Derived::Scalar> relu(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.cwiseMax(S(0));
}

/// Row-wise softmax with max subtraction.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  MatrixX<S> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const S mx = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

/// Divides each row by max(||row||, eps); rows shorter than eps are
/// scaled by 1/eps, so an exact zero row stays zero.
template <typename Derived>
MatrixX<typename Derived::Scalar> l2_normalize_rows(const Eigen::MatrixBase<Derived>& x,
                                                    typename Derived::Scalar eps = kNormEps) {
  using S = typename Derived::Scalar;
  MatrixX<S> out = x;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const S n = x.row(r).norm();
    out.row(r) /= std::max(n, eps);
  }
  return out;
}

template <typename Derived>
RowVectorX<typename Derived::Scalar> mean_rows(const Eigen::MatrixBase<Derived>& x) {
  return x.colwise().sum() / static_cast<typename Derived::Scalar>(x.rows());
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& x) {
  return x.allFinite();
}

}  // namespace ce
