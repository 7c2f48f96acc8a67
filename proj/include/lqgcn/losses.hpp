#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lqgcn/affiliation.hpp"
#include "lqgcn/cover.hpp"
#include "lqgcn/dense.hpp"
#include "lqgcn/graph.hpp"
#include "lqgcn/kernels.hpp"
#include "lqgcn/model.hpp"
#include "lqgcn/rng.hpp"

namespace lqgcn {

/// Lower clamp applied to F_i . F_j inside log(1 - exp(-x)).
inline constexpr double kEdgeDotFloor = 1e-10;
/// Floor on the neighborhood edge mass in the local scaling.
inline constexpr double kNeighborhoodFloor = 1e-9;
/// bp_loss_bruteforce refuses graphs larger than this.
inline constexpr std::size_t kBruteForceMaxNodes = 2000;

struct LossEval {
  double value = 0.0;
  DenseMatrix grad;  // dL/dF, same shape as F
};

namespace detail {

inline double row_dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline void axpy(std::span<double> dst, double a, std::span<const double> x) noexcept {
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += a * x[k];
}

// -log(1 - exp(-x)) at the clamped argument, and its derivative there.
inline double edge_nll(double x) noexcept { return -log1mexp(std::max(x, kEdgeDotFloor)); }
inline double edge_nll_grad(double x) noexcept { return -1.0 / std::expm1(std::max(x, kEdgeDotFloor)); }

inline void check_nodes(const AffiliationMatrix& f, const Graph& g, const char* op) {
  if (f.n_nodes() != g.n_nodes()) shape_mismatch(op, f.n_nodes(), g.n_nodes());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bernoulli-Poisson reconstruction loss
// ---------------------------------------------------------------------------

/// Unweighted sum over all unordered pairs:
///   sum_{E} -log(1 - exp(-F_i.F_j)) + sum_{non-edges} F_i.F_j
/// O(N^2 K); meant as a reference for small graphs.
inline LossEval bp_loss_bruteforce(const AffiliationMatrix& f, const Graph& g) {
  detail::check_nodes(f, g, "bp_loss_bruteforce");
  if (g.n_nodes() > kBruteForceMaxNodes)
    throw ShapeError("bp_loss_bruteforce: graph has " + std::to_string(g.n_nodes()) +
                     " nodes, limit is " + std::to_string(kBruteForceMaxNodes));
  const DenseMatrix& F = f.matrix();
  LossEval out{0.0, DenseMatrix(F.rows(), F.cols())};
  for (std::size_t i = 0; i < F.rows(); ++i) {
    for (std::size_t j = i + 1; j < F.rows(); ++j) {
      const double x = detail::row_dot(F.row(i), F.row(j));
      double gx = 1.0;
      if (g.has_edge(i, j)) {
        out.value += detail::edge_nll(x);
        gx = detail::edge_nll_grad(x);
      } else {
        out.value += x;
      }
      detail::axpy(out.grad.row(i), gx, F.row(j));
      detail::axpy(out.grad.row(j), gx, F.row(i));
    }
  }
  return out;
}

struct ExactEstimator {};

/// Monte-Carlo estimate from `samples` uniform edges and `samples` uniform
/// non-edges (rejection sampled).
struct SampledEstimator {
  std::size_t samples = 0;
  RngStream* rng = nullptr;
};

using BpEstimator = std::variant<ExactEstimator, SampledEstimator>;

/// Class-balanced loss: mean edge term plus mean non-edge term.
///
/// The exact estimator uses sum_{i != j} F_i.F_j = |sum_i F_i|^2 - sum_i |F_i|^2
/// so that the non-edge mean costs O(NK + |E|K) rather than O(N^2 K).
inline LossEval bp_loss_balanced(const AffiliationMatrix& f, const Graph& g,
                                 const BpEstimator& estimator = ExactEstimator{}) {
  detail::check_nodes(f, g, "bp_loss_balanced");
  if (g.n_edges() == 0) throw DataError("bp_loss_balanced: graph has no edges");
  if (g.n_non_edges() == 0) throw DataError("bp_loss_balanced: graph has no non-edges");

  const DenseMatrix& F = f.matrix();
  const std::size_t n = F.rows();
  const std::size_t k = F.cols();
  LossEval out{0.0, DenseMatrix(n, k)};

  if (const auto* sampled = std::get_if<SampledEstimator>(&estimator)) {
    if (sampled->samples == 0 || sampled->rng == nullptr)
      throw ShapeError("bp_loss_balanced: sampled estimator needs samples > 0 and an rng");
    RngStream& rng = *sampled->rng;
    const double w = 1.0 / static_cast<double>(sampled->samples);
    const auto edges = g.edges();
    for (std::size_t s = 0; s < sampled->samples; ++s) {
      const auto [i, j] = edges[rng.uniform_index(edges.size())];
      const double x = detail::row_dot(F.row(i), F.row(j));
      out.value += w * detail::edge_nll(x);
      const double gx = w * detail::edge_nll_grad(x);
      detail::axpy(out.grad.row(i), gx, F.row(j));
      detail::axpy(out.grad.row(j), gx, F.row(i));
    }
    for (std::size_t s = 0; s < sampled->samples; ++s) {
      std::uint64_t i = 0;
      std::uint64_t j = 0;
      do {
        i = rng.uniform_index(n);
        j = rng.uniform_index(n);
      } while (i == j || g.has_edge(i, j));
      out.value += w * detail::row_dot(F.row(i), F.row(j));
      detail::axpy(out.grad.row(i), w, F.row(j));
      detail::axpy(out.grad.row(j), w, F.row(i));
    }
    return out;
  }

  const double inv_edges = 1.0 / static_cast<double>(g.n_edges());
  const double inv_non_edges = 1.0 / static_cast<double>(g.n_non_edges());

  double edge_dot_sum = 0.0;
  double edge_term = 0.0;
  for (const auto& [i, j] : g.edges()) {
    const double x = detail::row_dot(F.row(i), F.row(j));
    edge_dot_sum += x;
    edge_term += detail::edge_nll(x);
    const double gx = inv_edges * detail::edge_nll_grad(x);
    detail::axpy(out.grad.row(i), gx, F.row(j));
    detail::axpy(out.grad.row(j), gx, F.row(i));
  }

  std::vector<double> total(k, 0.0);
  double self_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    detail::axpy(total, 1.0, F.row(i));
    self_sq += detail::row_dot(F.row(i), F.row(i));
  }
  const double all_pairs = 0.5 * (detail::row_dot(total, total) - self_sq);
  const double non_edge_sum = all_pairs - edge_dot_sum;

  // d/dF_i of the non-edge sum: (total - F_i) - sum_{j in N(i)} F_j
  for (std::size_t i = 0; i < n; ++i) {
    auto gi = out.grad.row(i);
    detail::axpy(gi, inv_non_edges, total);
    detail::axpy(gi, -inv_non_edges, F.row(i));
    for (Index j : g.neighbors(i)) detail::axpy(gi, -inv_non_edges, F.row(j));
  }

  out.value = inv_edges * edge_term + inv_non_edges * non_edge_sum;
  return out;
}

// ---------------------------------------------------------------------------
// Local modularity
// ---------------------------------------------------------------------------

/// How the modularity matrix B is normalized.
///   literal: B_ij = A_ij/|E| - d_i d_j/|E|, with an extra 1/(4|E|) on LQ_M.
///   newman:  B_ij = A_ij/(2|E|) - d_i d_j/(2|E|)^2, so that
///            trace(C^T B C) is Newman's Q for a hard partition C.
enum class NullModelScaling { literal, newman };

/// Implicit B = a_scale * A - d_scale * d d^T. Never densified except on request.
/// Holds a reference to the graph, which must outlive it.
class ModularityMatrix {
 public:
  ModularityMatrix(const Graph& g, NullModelScaling scaling) : graph_(&g), scaling_(scaling) {
    if (g.n_edges() == 0) throw DataError("modularity matrix: graph has no edges");
    const double m = static_cast<double>(g.n_edges());
    if (scaling == NullModelScaling::literal) {
      a_scale_ = 1.0 / m;
      d_scale_ = 1.0 / m;
    } else {
      a_scale_ = 1.0 / (2.0 * m);
      d_scale_ = 1.0 / (4.0 * m * m);
    }
  }

  NullModelScaling scaling() const noexcept { return scaling_; }
  double adjacency_scale() const noexcept { return a_scale_; }
  double degree_scale() const noexcept { return d_scale_; }
  std::size_t n_edges() const noexcept { return graph_->n_edges(); }

  /// B * v for an N x c block v. O(|E| c + N c).
  DenseMatrix apply(const DenseMatrix& v) const {
    if (v.rows() != graph_->n_nodes()) detail::shape_mismatch("ModularityMatrix::apply", v.rows(), graph_->n_nodes());
    DenseMatrix out = spmm(graph_->adjacency(), v);
    out *= a_scale_;
    std::vector<double> dv(v.cols(), 0.0);
    const auto deg = graph_->degree();
    for (std::size_t i = 0; i < v.rows(); ++i)
      detail::axpy(dv, static_cast<double>(deg[i]), v.row(i));
    for (std::size_t i = 0; i < v.rows(); ++i)
      detail::axpy(out.row(i), -d_scale_ * static_cast<double>(deg[i]), dv);
    return out;
  }

  double entry(std::size_t i, std::size_t j) const noexcept {
    const auto deg = graph_->degree();
    return a_scale_ * graph_->adjacency().at(i, j) -
           d_scale_ * static_cast<double>(deg[i]) * static_cast<double>(deg[j]);
  }

  DenseMatrix dense() const {
    const std::size_t n = graph_->n_nodes();
    DenseMatrix b(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) b(i, j) = entry(i, j);
    return b;
  }

 private:
  const Graph* graph_;
  NullModelScaling scaling_;
  double a_scale_ = 0.0;
  double d_scale_ = 0.0;
};

inline ModularityMatrix build_B(const Graph& g, NullModelScaling scaling = NullModelScaling::newman) {
  return ModularityMatrix(g, scaling);
}

/// Diagonal S with S_ss = |E| / max(L_sN, eps).
struct LocalScaling {
  std::vector<double> diag;
  std::vector<double> neighborhood_mass;  // L_sN
  std::vector<bool> floored;              // L_sN fell below the floor

  bool any_floored() const noexcept {
    return std::find(floored.begin(), floored.end(), true) != floored.end();
  }
};

/// L_sN is the affiliation-weighted incident-edge mass of community s,
///   L_sN = sum_{(i,j) in E} max(Fh_is, Fh_js),
/// where Fh is F with each nonzero row divided by its maximum entry.
inline LocalScaling build_S(const AffiliationMatrix& f, const Graph& g) {
  detail::check_nodes(f, g, "build_S");
  const DenseMatrix& F = f.matrix();
  const std::size_t k = F.cols();
  std::vector<double> row_scale(F.rows(), 1.0);
  for (std::size_t i = 0; i < F.rows(); ++i) {
    double mx = 0.0;
    for (double v : F.row(i)) mx = std::max(mx, v);
    if (mx > 0.0) row_scale[i] = 1.0 / mx;
  }
  LocalScaling s;
  s.neighborhood_mass.assign(k, 0.0);
  for (const auto& [i, j] : g.edges())
    for (std::size_t c = 0; c < k; ++c)
      s.neighborhood_mass[c] += std::max(F(i, c) * row_scale[i], F(j, c) * row_scale[j]);
  const double m = static_cast<double>(g.n_edges());
  s.diag.resize(k);
  s.floored.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    s.floored[c] = s.neighborhood_mass[c] < kNeighborhoodFloor;
    s.diag[c] = m / std::max(s.neighborhood_mass[c], kNeighborhoodFloor);
  }
  return s;
}

/// Which off-diagonal entry each community is contrasted with.
///   successor: community (s + 1) mod K
///   strongest: the other community with the largest LQ_M[s, t]
enum class ContrastRule { successor, strongest };

struct LqOptions {
  NullModelScaling scaling = NullModelScaling::newman;
  ContrastRule contrast = ContrastRule::successor;
};

inline double lq_prefactor(const Graph& g, NullModelScaling scaling) {
  return scaling == NullModelScaling::literal ? 1.0 / (4.0 * static_cast<double>(g.n_edges())) : 1.0;
}

/// K x K local-modularity matrix LQ_M = c * S * F^T (B F).
/// Diagonal: intra-community scores; off-diagonal: inter-community scores.
struct LqMatrix {
  DenseMatrix values;
  LocalScaling scaling;
  double prefactor = 1.0;
};

namespace detail {

struct LqParts {
  LqMatrix lq;
  DenseMatrix bf;  // B F, reused by the gradient
};

inline LqParts lq_parts(const AffiliationMatrix& f, const Graph& g, const LqOptions& opts,
                        const LocalScaling* frozen) {
  check_nodes(f, g, "lq_matrix");
  const ModularityMatrix b = build_B(g, opts.scaling);
  LqParts p;
  p.lq.scaling = frozen ? *frozen : build_S(f, g);
  if (p.lq.scaling.diag.size() != f.n_communities())
    shape_mismatch("lq_matrix(S vs K)", p.lq.scaling.diag.size(), f.n_communities());
  p.lq.prefactor = lq_prefactor(g, opts.scaling);
  p.bf = b.apply(f.matrix());
  p.lq.values = gemm(f.matrix(), p.bf, Transpose::yes, Transpose::no);
  for (std::size_t s = 0; s < p.lq.values.rows(); ++s)
    for (double& v : p.lq.values.row(s)) v *= p.lq.prefactor * p.lq.scaling.diag[s];
  return p;
}

}  // namespace detail

/// `frozen` replaces S computed from f (used to hold S constant across a step).
inline LqMatrix lq_matrix(const AffiliationMatrix& f, const Graph& g, const LqOptions& opts = {},
                          const LocalScaling* frozen = nullptr) {
  return detail::lq_parts(f, g, opts, frozen).lq;
}

/// Index of the community that community s is contrasted with (k >= 2).
inline std::size_t contrast_partner(const DenseMatrix& lq, std::size_t s, ContrastRule rule) noexcept {
  const std::size_t k = lq.rows();
  if (rule == ContrastRule::successor) return (s + 1) % k;
  std::size_t best = (s + 1) % k;
  for (std::size_t t = 0; t < k; ++t)
    if (t != s && lq(s, t) > lq(s, best)) best = t;
  return best;
}

/// Binary cross-entropy on the logistic-squashed LQ_M:
///   -(1/2K) sum_s [ log sig(M_ss) + log(1 - sig(M_{s,s+1 mod K})) ]
/// S is treated as a constant in the gradient.
inline LossEval lq_loss(const AffiliationMatrix& f, const Graph& g, const LqOptions& opts = {},
                        const LocalScaling* frozen = nullptr) {
  const std::size_t k = f.n_communities();
  if (k < 2) throw ShapeError("lq_loss: needs at least 2 communities");
  auto parts = detail::lq_parts(f, g, opts, frozen);
  const DenseMatrix& m = parts.lq.values;
  const double w = 1.0 / (2.0 * static_cast<double>(k));

  LossEval out;
  DenseMatrix gm(k, k);  // dL/dLQ_M
  for (std::size_t s = 0; s < k; ++s) {
    const std::size_t t = contrast_partner(m, s, opts.contrast);
    out.value -= w * (log_sigmoid(m(s, s)) + log_sigmoid(-m(s, t)));
    gm(s, s) -= w * (1.0 - sigmoid(m(s, s)));
    gm(s, t) += w * sigmoid(m(s, t));
  }
  // M = c diag(S) F^T B F  =>  dL/dF = c B F (G~ + G~^T),  G~ = diag(S) G
  DenseMatrix sym(k, k);
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t t = 0; t < k; ++t)
      sym(s, t) = parts.lq.scaling.diag[s] * gm(s, t) + parts.lq.scaling.diag[t] * gm(t, s);
  out.grad = gemm(parts.bf, sym);
  out.grad *= parts.lq.prefactor;
  return out;
}

/// Newman modularity of a (possibly overlapping) cover:
///   Q = 1/(2m) sum_s sum_{ij} (A_ij - d_i d_j / (2m)) C_is C_js,  m = |E|.
inline double modularity_q(const Cover& cover, const Graph& g) {
  if (g.n_edges() == 0) throw DataError("modularity_q: graph has no edges");
  if (cover.n_nodes() != g.n_nodes()) detail::shape_mismatch("modularity_q", cover.n_nodes(), g.n_nodes());
  const double two_m = 2.0 * static_cast<double>(g.n_edges());
  std::vector<char> in(g.n_nodes(), 0);
  double q = 0.0;
  for (const auto& c : cover.communities()) {
    for (Index v : c) in[v] = 1;
    double internal = 0.0;  // ordered pairs
    double volume = 0.0;
    for (Index v : c) {
      volume += static_cast<double>(g.degree()[v]);
      for (Index u : g.neighbors(v)) internal += in[u];
    }
    q += internal / two_m - (volume / two_m) * (volume / two_m);
    for (Index v : c) in[v] = 0;
  }
  return q;
}

// ---------------------------------------------------------------------------
// Combined objective
// ---------------------------------------------------------------------------

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double weight_decay = 1e-2;
  bool include_lq = true;
};

struct TotalLoss {
  double value = 0.0;
  double bp = 0.0;
  std::optional<double> lq;
  double reg = 0.0;
  DenseMatrix grad_f;
  ParamGrads grad_reg;
};

/// alpha * L_BP + [include_lq] beta * L_LQ + lambda (|W1|^2 + |W2|^2).
inline TotalLoss total_loss(const AffiliationMatrix& f, const Graph& g, const LossWeights& w,
                            const ModelParams& params, const BpEstimator& estimator = ExactEstimator{},
                            const LqOptions& lq_opts = {}, const LocalScaling* frozen = nullptr) {
  if (!(w.alpha >= 0.0 && w.beta >= 0.0 && w.weight_decay >= 0.0))
    throw ShapeError("total_loss: weights must be non-negative");
  TotalLoss out;
  LossEval bp = bp_loss_balanced(f, g, estimator);
  out.bp = bp.value;
  out.grad_f = std::move(bp.grad);
  out.grad_f *= w.alpha;
  out.value = w.alpha * out.bp;
  if (w.include_lq) {
    LossEval lq = lq_loss(f, g, lq_opts, frozen);
    out.lq = lq.value;
    out.value += w.beta * lq.value;
    out.grad_f.add_scaled(lq.grad, w.beta);
  }
  out.reg = w.weight_decay * params.squared_norm();
  out.value += out.reg;
  out.grad_reg.w1 = params.w1;
  out.grad_reg.w1 *= 2.0 * w.weight_decay;
  out.grad_reg.w2 = params.w2;
  out.grad_reg.w2 *= 2.0 * w.weight_decay;
  return out;
}

}  // namespace lqgcn
