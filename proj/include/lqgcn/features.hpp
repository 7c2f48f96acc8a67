#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "lqgcn/dense.hpp"
#include "lqgcn/error.hpp"
#include "lqgcn/graph.hpp"
#include "lqgcn/sparse.hpp"

namespace lqgcn {

/// N x d node-attribute matrix. Stored sparse: attribute data (keywords,
/// one-hot profiles, adjacency rows) is mostly zeros, and the model only
/// needs X*W and transpose(X)*G.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(CsrMatrix data) : data_(std::move(data)) {
    for (double v : data_.values())
      if (!std::isfinite(v)) throw NumericError("feature matrix contains a non-finite entry");
  }

  static FeatureMatrix from_dense(const DenseMatrix& d) {
    if (!d.all_finite()) throw NumericError("feature matrix contains a non-finite entry");
    return FeatureMatrix(CsrMatrix::from_dense(d));
  }

  std::size_t rows() const noexcept { return data_.rows(); }
  std::size_t cols() const noexcept { return data_.cols(); }
  const CsrMatrix& csr() const noexcept { return data_; }
  DenseMatrix to_dense() const { return data_.to_dense(); }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  CsrMatrix data_;
};

/// Scales each nonzero row to unit Euclidean norm; zero rows are left alone.
inline FeatureMatrix row_l2_normalize(const FeatureMatrix& x) {
  const CsrMatrix& m = x.csr();
  std::vector<double> vals(m.values().begin(), m.values().end());
  std::size_t offset = 0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row_values(r);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    if (sq > 0.0) {
      const double inv = 1.0 / std::sqrt(sq);
      for (std::size_t k = 0; k < row.size(); ++k) vals[offset + k] = row[k] * inv;
    }
    offset += row.size();
  }
  return FeatureMatrix(m.with_values(std::move(vals)));
}

/// What the encoder sees as node features.
enum class InputMode {
  attributes,    // X
  adjacency,     // rows of A
  concatenated,  // [A | X]
};

inline std::optional<InputMode> parse_input_mode(const std::string& s) {
  if (s == "x") return InputMode::attributes;
  if (s == "g") return InputMode::adjacency;
  if (s == "u") return InputMode::concatenated;
  return std::nullopt;
}

inline FeatureMatrix assemble_input(const Graph& g, const FeatureMatrix* attrs, InputMode mode) {
  if (mode != InputMode::adjacency) {
    if (!attrs) throw DataError("input mode requires an attribute matrix");
    if (attrs->rows() != g.n_nodes())
      throw DataError("attribute rows (" + std::to_string(attrs->rows()) +
                      ") do not match node count (" + std::to_string(g.n_nodes()) + ")");
  }
  switch (mode) {
    case InputMode::attributes:
      return *attrs;
    case InputMode::adjacency:
      return FeatureMatrix(g.adjacency());
    case InputMode::concatenated:
      return FeatureMatrix(hstack(g.adjacency(), attrs->csr()));
  }
  return *attrs;
}

}  // namespace lqgcn
