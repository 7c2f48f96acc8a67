#pragma once

#include <cmath>
#include <numbers>

#include "lqgcn/dense.hpp"
#include "lqgcn/sparse.hpp"

// Dense and sparse products plus the scalar functions the model needs.
// Every reduction runs in a fixed order so results are bitwise reproducible.

namespace lqgcn {

enum class Transpose { no, yes };

/// a * b for CSR a.
inline DenseMatrix spmm(const CsrMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) detail::shape_mismatch("spmm", a.cols(), b.rows());
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    const auto cols = a.row_cols(i);
    const auto vals = a.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto src = b.row(cols[k]);
      const double v = vals[k];
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += v * src[j];
    }
  }
  return out;
}

/// transpose(a) * b for CSR a, without materializing the transpose.
inline DenseMatrix spmm_transposed(const CsrMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) detail::shape_mismatch("spmm_transposed", a.rows(), b.rows());
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto src = b.row(i);
    const auto cols = a.row_cols(i);
    const auto vals = a.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      auto dst = out.row(cols[k]);
      const double v = vals[k];
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += v * src[j];
    }
  }
  return out;
}

inline DenseMatrix gemm(const DenseMatrix& a, const DenseMatrix& b, Transpose ta = Transpose::no,
                        Transpose tb = Transpose::no) {
  const bool at = ta == Transpose::yes;
  const bool bt = tb == Transpose::yes;
  const std::size_t m = at ? a.cols() : a.rows();
  const std::size_t inner = at ? a.rows() : a.cols();
  const std::size_t inner_b = bt ? b.cols() : b.rows();
  const std::size_t n = bt ? b.rows() : b.cols();
  if (inner != inner_b) detail::shape_mismatch("gemm", inner, inner_b);

  DenseMatrix out(m, n);
  if (!at && !bt) {
    for (std::size_t i = 0; i < m; ++i) {
      auto dst = out.row(i);
      for (std::size_t k = 0; k < inner; ++k) {
        const double v = a(i, k);
        const auto src = b.row(k);
        for (std::size_t j = 0; j < n; ++j) dst[j] += v * src[j];
      }
    }
  } else if (at && !bt) {
    for (std::size_t k = 0; k < inner; ++k) {
      const auto arow = a.row(k);
      const auto src = b.row(k);
      for (std::size_t i = 0; i < m; ++i) {
        const double v = arow[i];
        auto dst = out.row(i);
        for (std::size_t j = 0; j < n; ++j) dst[j] += v * src[j];
      }
    }
  } else if (!at && bt) {
    for (std::size_t i = 0; i < m; ++i) {
      const auto arow = a.row(i);
      for (std::size_t j = 0; j < n; ++j) {
        const auto brow = b.row(j);
        double s = 0.0;
        for (std::size_t k = 0; k < inner; ++k) s += arow[k] * brow[k];
        out(i, j) = s;
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < inner; ++k) s += a(k, i) * b(j, k);
        out(i, j) = s;
      }
  }
  return out;
}

inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(sigmoid(x)) without overflow for large |x|.
inline double log_sigmoid(double x) noexcept {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

/// log(1 - exp(-x)) for x > 0.
inline double log1mexp(double x) noexcept {
  return x < std::numbers::ln2 ? std::log(-std::expm1(-x)) : std::log1p(-std::exp(-x));
}

enum class Elementwise { tanh, relu, sigmoid, tanh_grad, relu_grad, sigmoid_grad };

inline double apply_scalar(Elementwise fn, double x) noexcept {
  switch (fn) {
    case Elementwise::tanh:
      return std::tanh(x);
    case Elementwise::relu:
      return x > 0.0 ? x : 0.0;
    case Elementwise::sigmoid:
      return sigmoid(x);
    case Elementwise::tanh_grad: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Elementwise::relu_grad:
      return x > 0.0 ? 1.0 : 0.0;
    case Elementwise::sigmoid_grad: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
  }
  return x;
}

inline DenseMatrix apply_elementwise(const DenseMatrix& m, Elementwise fn) {
  DenseMatrix out = m;
  for (double& v : out.values()) v = apply_scalar(fn, v);
  return out;
}

}  // namespace lqgcn
