#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lqgcn/error.hpp"
#include "lqgcn/sparse.hpp"

namespace lqgcn {

using Edge = std::pair<Index, Index>;

struct EdgeListStats {
  std::size_t self_loops = 0;
  std::size_t duplicates = 0;  // repeated or reversed copies merged away
};

/// Immutable undirected, unweighted graph. The adjacency holds both (i,j) and
/// (j,i) with value 1; self-loops are never stored.
class Graph {
 public:
  Graph() = default;

  static Graph from_edges(std::size_t n_nodes, std::span<const Edge> edges,
                          EdgeListStats* stats = nullptr) {
    EdgeListStats local;
    std::vector<Edge> canon;
    canon.reserve(edges.size());
    for (auto [u, v] : edges) {
      if (u >= n_nodes || v >= n_nodes)
        throw DataError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                        ") references a node >= " + std::to_string(n_nodes));
      if (u == v) {
        ++local.self_loops;
        continue;
      }
      canon.emplace_back(std::min(u, v), std::max(u, v));
    }
    std::sort(canon.begin(), canon.end());
    const auto last = std::unique(canon.begin(), canon.end());
    local.duplicates = static_cast<std::size_t>(canon.end() - last);
    canon.erase(last, canon.end());

    std::vector<Triplet> t;
    t.reserve(2 * canon.size());
    for (auto [u, v] : canon) {
      t.push_back({u, v, 1.0});
      t.push_back({v, u, 1.0});
    }
    Graph g;
    g.adjacency_ = CsrMatrix::from_triplets(n_nodes, n_nodes, std::move(t));
    g.edges_ = std::move(canon);
    g.degree_.resize(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) g.degree_[i] = g.adjacency_.row_cols(i).size();
    if (stats) *stats = local;
    return g;
  }

  std::size_t n_nodes() const noexcept { return adjacency_.rows(); }
  /// Undirected edge count |E|.
  std::size_t n_edges() const noexcept { return edges_.size(); }

  const CsrMatrix& adjacency() const noexcept { return adjacency_; }
  /// Edges with first < second, sorted.
  std::span<const Edge> edges() const noexcept { return edges_; }
  std::span<const std::size_t> degree() const noexcept { return degree_; }
  std::span<const Index> neighbors(std::size_t i) const noexcept { return adjacency_.row_cols(i); }

  bool has_edge(std::size_t i, std::size_t j) const noexcept { return adjacency_.contains(i, j); }

  /// Number of unordered node pairs that are not edges.
  std::size_t n_non_edges() const noexcept {
    const std::size_t n = n_nodes();
    return n * (n - (n > 0 ? 1 : 0)) / 2 - n_edges();
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n_nodes() == b.n_nodes() && a.edges_ == b.edges_;
  }

 private:
  CsrMatrix adjacency_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> degree_;
};

inline std::vector<std::size_t> degree_vector(const Graph& g) {
  return {g.degree().begin(), g.degree().end()};
}

enum class AdjacencyTransform { symmetric_normalized_plus_identity };

/// I + D^{-1/2} A D^{-1/2}. Isolated nodes keep only their diagonal 1.
struct NormalizedAdjacency {
  CsrMatrix matrix;
  AdjacencyTransform provenance = AdjacencyTransform::symmetric_normalized_plus_identity;
};

inline NormalizedAdjacency normalize_adjacency(const Graph& g) {
  const std::size_t n = g.n_nodes();
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (g.degree()[i] > 0) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree()[i]));

  std::vector<Triplet> t;
  t.reserve(g.adjacency().nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ri = static_cast<Index>(i);
    t.push_back({ri, ri, 1.0});
    for (Index j : g.neighbors(i)) t.push_back({ri, j, inv_sqrt[i] * inv_sqrt[j]});
  }
  return {CsrMatrix::from_triplets(n, n, std::move(t))};
}

/// A + I.
inline CsrMatrix augment_adjacency(const Graph& g) {
  const std::size_t n = g.n_nodes();
  std::vector<Triplet> t;
  t.reserve(g.adjacency().nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ri = static_cast<Index>(i);
    t.push_back({ri, ri, 1.0});
    for (Index j : g.neighbors(i)) t.push_back({ri, j, 1.0});
  }
  return CsrMatrix::from_triplets(n, n, std::move(t));
}

/// D~^{-1/2} (A + I) D~^{-1/2} with D~ the degree matrix of A + I.
inline CsrMatrix renormalize_augmented(const Graph& g) {
  const CsrMatrix aug = augment_adjacency(g);
  std::vector<double> inv_sqrt(g.n_nodes());
  for (std::size_t i = 0; i < g.n_nodes(); ++i)
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree()[i] + 1));
  std::vector<double> vals;
  vals.reserve(aug.nnz());
  for (std::size_t i = 0; i < aug.rows(); ++i)
    for (Index j : aug.row_cols(i)) vals.push_back(inv_sqrt[i] * inv_sqrt[j]);
  return aug.with_values(std::move(vals));
}

}  // namespace lqgcn
