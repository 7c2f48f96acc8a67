#pragma once

#include <cmath>
#include <string>

#include "lqgcn/affiliation.hpp"
#include "lqgcn/dense.hpp"
#include "lqgcn/features.hpp"
#include "lqgcn/graph.hpp"
#include "lqgcn/kernels.hpp"
#include "lqgcn/rng.hpp"

// Two-layer graph-convolutional encoder producing the affiliation matrix.
//
//   main:      F = ReLU(P_out * tanh(Abar X W1 + X W1) * W2)
//   ablation:  F = ReLU(Abar  * tanh(Abar X W1) * W2)
//
// where Abar = I + D^{-1/2} A D^{-1/2}. P_out defaults to the renormalized
// D~^{-1/2} (A + I) D~^{-1/2}; plain A + I and the raw adjacency A are also
// available. Gradients are derived by hand in backward().

namespace lqgcn {

enum class Variant { main, ablation };
enum class OuterPropagation { augmented, raw, renormalized };

struct ModelParams {
  DenseMatrix w1;  // d x h
  DenseMatrix w2;  // h x K

  std::size_t feature_dim() const noexcept { return w1.rows(); }
  std::size_t hidden_dim() const noexcept { return w1.cols(); }
  std::size_t n_communities() const noexcept { return w2.cols(); }

  double squared_norm() const noexcept { return w1.squared_norm() + w2.squared_norm(); }
  bool all_finite() const noexcept { return w1.all_finite() && w2.all_finite(); }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Glorot-uniform draw in +-sqrt(6 / (fan_in + fan_out)).
inline DenseMatrix xavier_init(std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
  if (fan_in == 0 || fan_out == 0) throw ShapeError("xavier_init: dimensions must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  DenseMatrix m(fan_in, fan_out);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

inline ModelParams init_params(std::size_t feature_dim, std::size_t hidden, std::size_t k,
                               RngStream& rng) {
  ModelParams p;
  p.w1 = xavier_init(feature_dim, hidden, rng);
  p.w2 = xavier_init(hidden, k, rng);
  return p;
}

/// Propagation matrices derived once per graph.
struct GraphOperators {
  NormalizedAdjacency normalized;
  CsrMatrix augmented;
  CsrMatrix raw;
  CsrMatrix renormalized;

  explicit GraphOperators(const Graph& g)
      : normalized(normalize_adjacency(g)),
        augmented(augment_adjacency(g)),
        raw(g.adjacency()),
        renormalized(renormalize_augmented(g)) {}

  std::size_t n_nodes() const noexcept { return raw.rows(); }

  const CsrMatrix& outer(Variant v, OuterPropagation o) const noexcept {
    if (v == Variant::ablation) return normalized.matrix;
    switch (o) {
      case OuterPropagation::augmented:
        return augmented;
      case OuterPropagation::raw:
        return raw;
      case OuterPropagation::renormalized:
        return renormalized;
    }
    return augmented;
  }
};

struct ForwardOptions {
  Variant variant = Variant::main;
  OuterPropagation outer = OuterPropagation::renormalized;
  double dropout = 0.0;
  bool training = false;
};

/// Activations kept for the reverse pass. Only valid for the parameters and
/// inputs of the forward call that produced it.
struct ForwardCache {
  Variant variant = Variant::main;
  OuterPropagation outer = OuterPropagation::renormalized;
  CsrMatrix x_in;            // features after dropout
  DenseMatrix hidden;        // tanh output
  DenseMatrix hidden_scale;  // dropout multipliers on hidden; empty without dropout
  DenseMatrix hidden_in;     // second-layer input
  DenseMatrix pre_relu;
};

struct ForwardResult {
  AffiliationMatrix f;
  ForwardCache cache;
};

struct ParamGrads {
  DenseMatrix w1;
  DenseMatrix w2;
};

namespace detail {

inline void check_model_shapes(const ModelParams& p, const GraphOperators& ops,
                               const FeatureMatrix& x) {
  if (x.rows() != ops.n_nodes()) shape_mismatch("forward(features vs nodes)", x.rows(), ops.n_nodes());
  if (p.w1.rows() != x.cols()) shape_mismatch("forward(W1 rows vs feature dim)", p.w1.rows(), x.cols());
  if (p.w2.rows() != p.w1.cols()) shape_mismatch("forward(W2 rows vs hidden)", p.w2.rows(), p.w1.cols());
}

}  // namespace detail

inline ForwardResult forward(const ModelParams& params, const GraphOperators& ops,
                             const FeatureMatrix& x, const ForwardOptions& opts, RngStream& rng) {
  detail::check_model_shapes(params, ops, x);
  if (!params.all_finite()) throw NumericError("forward: non-finite model parameters");
  if (!(opts.dropout >= 0.0 && opts.dropout < 1.0))
    throw ShapeError("forward: dropout rate must lie in [0, 1)");

  const bool drop = opts.training && opts.dropout > 0.0;
  const double keep_scale = drop ? 1.0 / (1.0 - opts.dropout) : 1.0;

  ForwardCache cache;
  cache.variant = opts.variant;
  cache.outer = opts.outer;

  if (drop) {
    std::vector<double> vals(x.csr().values().begin(), x.csr().values().end());
    for (double& v : vals) v = rng.bernoulli(opts.dropout) ? 0.0 : v * keep_scale;
    cache.x_in = x.csr().with_values(std::move(vals));
  } else {
    cache.x_in = x.csr();
  }

  const DenseMatrix projected = spmm(cache.x_in, params.w1);
  DenseMatrix z1 = spmm(ops.normalized.matrix, projected);
  if (opts.variant == Variant::main) z1 += projected;
  cache.hidden = apply_elementwise(z1, Elementwise::tanh);

  if (drop) {
    cache.hidden_scale = DenseMatrix(cache.hidden.rows(), cache.hidden.cols());
    for (double& s : cache.hidden_scale.values()) s = rng.bernoulli(opts.dropout) ? 0.0 : keep_scale;
    cache.hidden_in = cache.hidden;
    for (std::size_t i = 0; i < cache.hidden_in.size(); ++i)
      cache.hidden_in.values()[i] *= cache.hidden_scale.values()[i];
  } else {
    cache.hidden_in = cache.hidden;
  }

  const DenseMatrix mixed = gemm(cache.hidden_in, params.w2);
  cache.pre_relu = spmm(ops.outer(opts.variant, opts.outer), mixed);
  AffiliationMatrix f(apply_elementwise(cache.pre_relu, Elementwise::relu));
  return {std::move(f), std::move(cache)};
}

/// Reverse pass: maps dL/dF to dL/dW1, dL/dW2, reusing the cached dropout masks.
inline ParamGrads backward(const ModelParams& params, const ForwardCache& cache,
                           const DenseMatrix& grad_f, const GraphOperators& ops) {
  if (!grad_f.same_shape(cache.pre_relu))
    detail::shape_mismatch("backward(grad_f vs cache)", grad_f.size(), cache.pre_relu.size());
  if (params.w2.cols() != grad_f.cols())
    detail::shape_mismatch("backward(W2 cols vs K)", params.w2.cols(), grad_f.cols());
  if (params.w1.cols() != cache.hidden.cols())
    detail::shape_mismatch("backward(W1 cols vs hidden)", params.w1.cols(), cache.hidden.cols());

  DenseMatrix g_pre = grad_f;
  for (std::size_t i = 0; i < g_pre.size(); ++i)
    if (!(cache.pre_relu.values()[i] > 0.0)) g_pre.values()[i] = 0.0;

  const DenseMatrix g_mixed = spmm_transposed(ops.outer(cache.variant, cache.outer), g_pre);
  ParamGrads grads;
  grads.w2 = gemm(cache.hidden_in, g_mixed, Transpose::yes, Transpose::no);

  DenseMatrix g_z1 = gemm(g_mixed, params.w2, Transpose::no, Transpose::yes);
  const bool dropped = !cache.hidden_scale.empty();
  for (std::size_t i = 0; i < g_z1.size(); ++i) {
    const double h = cache.hidden.values()[i];
    double g = g_z1.values()[i];
    if (dropped) g *= cache.hidden_scale.values()[i];
    g_z1.values()[i] = g * (1.0 - h * h);
  }

  DenseMatrix g_projected = spmm_transposed(ops.normalized.matrix, g_z1);
  if (cache.variant == Variant::main) g_projected += g_z1;
  grads.w1 = spmm_transposed(cache.x_in, g_projected);
  return grads;
}

}  // namespace lqgcn
