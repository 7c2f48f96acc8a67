#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

#include "lqgcn/dense.hpp"
#include "lqgcn/error.hpp"

namespace lqgcn {

using Index = std::uint32_t;

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Compressed sparse row matrix with sorted, unique column indices per row.
class CsrMatrix {
 public:
  CsrMatrix() : row_ptr_(1, 0) {}

  /// Builds from unordered triplets; duplicate coordinates are summed.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries) {
    for (const auto& t : entries) {
      if (t.row >= rows) detail::shape_mismatch("CsrMatrix::from_triplets(row)", t.row, rows);
      if (t.col >= cols) detail::shape_mismatch("CsrMatrix::from_triplets(col)", t.col, cols);
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    CsrMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_ptr_.assign(rows + 1, 0);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& t = entries[k];
      if (!m.col_idx_.empty() && k > 0 && entries[k - 1].row == t.row &&
          entries[k - 1].col == t.col) {
        m.values_.back() += t.value;
        continue;
      }
      m.col_idx_.push_back(t.col);
      m.values_.push_back(t.value);
      ++m.row_ptr_[t.row + 1];
    }
    for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
    return m;
  }

  static CsrMatrix from_dense(const DenseMatrix& d) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < d.rows(); ++i)
      for (std::size_t j = 0; j < d.cols(); ++j)
        if (d(i, j) != 0.0) t.push_back({static_cast<Index>(i), static_cast<Index>(j), d(i, j)});
    return from_triplets(d.rows(), d.cols(), std::move(t));
  }

  static CsrMatrix identity(std::size_t n) {
    std::vector<Triplet> t;
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.push_back({static_cast<Index>(i), static_cast<Index>(i), 1.0});
    return from_triplets(n, n, std::move(t));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const Index> row_cols(std::size_t r) const noexcept {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const noexcept {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<double> row_values(std::size_t r) noexcept {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  /// Stored value at (r, c), or 0 when absent.
  double at(std::size_t r, std::size_t c) const noexcept {
    const auto cols = row_cols(r);
    const auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<Index>(c));
    if (it == cols.end() || *it != c) return 0.0;
    return row_values(r)[static_cast<std::size_t>(it - cols.begin())];
  }

  bool contains(std::size_t r, std::size_t c) const noexcept {
    const auto cols = row_cols(r);
    return std::binary_search(cols.begin(), cols.end(), static_cast<Index>(c));
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
      const auto c = row_cols(r);
      const auto v = row_values(r);
      for (std::size_t k = 0; k < c.size(); ++k) d(r, c[k]) = v[k];
    }
    return d;
  }

  // Same sparsity pattern, new values.
  CsrMatrix with_values(std::vector<double> values) const {
    if (values.size() != values_.size()) detail::shape_mismatch("CsrMatrix::with_values", values.size(), values_.size());
    CsrMatrix m = *this;
    m.values_ = std::move(values);
    return m;
  }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<Index> col_idx_;
  std::vector<double> values_;
};

/// Column-wise concatenation [a | b].
inline CsrMatrix hstack(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.rows() != b.rows()) detail::shape_mismatch("hstack", a.rows(), b.rows());
  std::vector<Triplet> t;
  t.reserve(a.nnz() + b.nnz());
  const auto offset = static_cast<Index>(a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto ri = static_cast<Index>(r);
    for (std::size_t k = 0; k < a.row_cols(r).size(); ++k)
      t.push_back({ri, a.row_cols(r)[k], a.row_values(r)[k]});
    for (std::size_t k = 0; k < b.row_cols(r).size(); ++k)
      t.push_back({ri, static_cast<Index>(b.row_cols(r)[k] + offset), b.row_values(r)[k]});
  }
  return CsrMatrix::from_triplets(a.rows(), a.cols() + b.cols(), std::move(t));
}

}  // namespace lqgcn
