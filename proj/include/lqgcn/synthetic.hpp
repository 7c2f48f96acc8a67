#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "lqgcn/affiliation.hpp"
#include "lqgcn/cover.hpp"
#include "lqgcn/features.hpp"
#include "lqgcn/graph.hpp"
#include "lqgcn/rng.hpp"

namespace lqgcn {

/// Samples A_ij ~ Bernoulli(1 - exp(-F_i . F_j)) independently per unordered pair.
///
/// Since exp(-sum_c F_ic F_jc) = prod_c exp(-F_ic F_jc), an edge is the union
/// of independent per-community events, so only pairs sharing a community are
/// visited. `background` adds an independent uniform noise edge with that
/// probability on every pair (P(no edge) = (1 - background) exp(-F_i . F_j)).
inline Graph sample_bp_graph(const AffiliationMatrix& f, RngStream& rng, double background = 0.0) {
  if (!(background >= 0.0 && background < 1.0))
    throw ShapeError("sample_bp_graph: background rate must lie in [0, 1)");
  const std::size_t n = f.n_nodes();
  std::vector<Edge> edges;

  std::vector<Index> members;
  for (std::size_t c = 0; c < f.n_communities(); ++c) {
    members.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (f(i, c) > 0.0) members.push_back(static_cast<Index>(i));
    for (std::size_t a = 0; a < members.size(); ++a) {
      const double fa = f(members[a], c);
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        const double p = -std::expm1(-fa * f(members[b], c));
        if (rng.bernoulli(p)) edges.emplace_back(members[a], members[b]);
      }
    }
  }

  if (background > 0.0 && n > 1) {
    // Walk the N(N-1)/2 pairs in row order with geometric skips.
    const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    std::uint64_t pos = rng.geometric(background);
    std::size_t row = 0;
    std::uint64_t row_start = 0;  // linear index of pair (row, row + 1)
    while (pos < total) {
      while (pos >= row_start + (n - 1 - row)) {
        row_start += n - 1 - row;
        ++row;
      }
      const auto col = static_cast<Index>(row + 1 + (pos - row_start));
      edges.emplace_back(static_cast<Index>(row), col);
      const std::uint64_t skip = rng.geometric(background);
      if (skip >= total) break;
      pos += 1 + skip;
    }
  }
  return Graph::from_edges(n, edges);
}

struct PlantedInstance {
  AffiliationMatrix f_true;
  Cover cover_true;
  Graph graph;
  std::uint64_t seed = 0;
};

struct PlantedSpec {
  std::size_t n = 0;
  std::size_t k = 0;
  double overlap_fraction = 0.0;
  double strength = 1.5;
  double background = 0.01;
};

/// Nodes split into k contiguous, near-equal groups; floor(overlap * n)
/// uniformly chosen nodes join one additional, uniformly chosen group. Every
/// membership has strength c.
inline PlantedInstance make_planted(const PlantedSpec& spec, std::uint64_t seed) {
  if (spec.k == 0 || spec.n < spec.k) throw ShapeError("make_planted: need n >= k >= 1");
  if (!(spec.overlap_fraction >= 0.0 && spec.overlap_fraction < 1.0))
    throw ShapeError("make_planted: overlap fraction must lie in [0, 1)");
  if (spec.overlap_fraction > 0.0 && spec.k < 2) throw ShapeError("make_planted: overlap needs k >= 2");
  if (!(spec.strength > 0.0)) throw ShapeError("make_planted: strength must be positive");

  RngStream rng(seed);
  const std::size_t n = spec.n;
  std::vector<Community> comms(spec.k);
  std::vector<std::size_t> primary(n);
  for (std::size_t i = 0; i < n; ++i) {
    primary[i] = i * spec.k / n;
    comms[primary[i]].push_back(static_cast<Index>(i));
  }

  const auto n_overlap = static_cast<std::size_t>(std::floor(spec.overlap_fraction * static_cast<double>(n)));
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  for (std::size_t i = 0; i < n_overlap; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(order[i], order[j]);
    const Index v = order[i];
    const std::size_t second = (primary[v] + 1 + rng.uniform_index(spec.k - 1)) % spec.k;
    comms[second].push_back(v);
  }

  DenseMatrix f(n, spec.k);
  for (std::size_t c = 0; c < spec.k; ++c)
    for (Index v : comms[c]) f(v, c) = spec.strength;
  AffiliationMatrix fa(std::move(f));
  Graph g = sample_bp_graph(fa, rng, spec.background);
  return {std::move(fa), Cover(n, std::move(comms)), std::move(g), seed};
}

/// One-hot membership indicators, N x K.
inline FeatureMatrix membership_features(const Cover& cover) {
  std::vector<Triplet> t;
  for (std::size_t c = 0; c < cover.size(); ++c)
    for (Index v : cover[c]) t.push_back({v, static_cast<Index>(c), 1.0});
  return FeatureMatrix(CsrMatrix::from_triplets(cover.n_nodes(), cover.size(), std::move(t)));
}

}  // namespace lqgcn
