#pragma once

#include <cmath>

#include "lqgcn/dense.hpp"
#include "lqgcn/error.hpp"

namespace lqgcn {

/// N x K node-community affiliation strengths; entries are finite and >= 0.
class AffiliationMatrix {
 public:
  AffiliationMatrix() = default;
  explicit AffiliationMatrix(DenseMatrix values) : values_(std::move(values)) {
    for (double v : values_.values()) {
      if (!std::isfinite(v)) throw NumericError("affiliation matrix contains a non-finite entry");
      if (v < 0.0) throw DataError("affiliation matrix contains a negative entry");
    }
  }

  std::size_t n_nodes() const noexcept { return values_.rows(); }
  std::size_t n_communities() const noexcept { return values_.cols(); }
  double operator()(std::size_t i, std::size_t s) const noexcept { return values_(i, s); }
  const DenseMatrix& matrix() const noexcept { return values_; }

  friend bool operator==(const AffiliationMatrix&, const AffiliationMatrix&) = default;

 private:
  DenseMatrix values_;
};

}  // namespace lqgcn
