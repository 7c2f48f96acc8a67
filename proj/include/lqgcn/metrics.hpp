#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lqgcn/cover.hpp"
#include "lqgcn/error.hpp"

// Cover-comparison scores.
//
// onmi() follows the overlapping NMI of McDaid, Greene & Hurley: every
// community is a binary membership variable; H(X_i | Y) is the smallest
// admissible conditional entropy H(X_i | Y_j) over j, falling back to H(X_i)
// when no Y_j is admissible; and I(X:Y) = (H(X) - H(X|Y) + H(Y) - H(Y|X)) / 2
// is normalized by max(H(X), H(Y)).

namespace lqgcn {
namespace detail {

// -w log2(w / n), with the 1/n factor dropped (it cancels in the ratio).
inline double h_term(std::size_t w, std::size_t n) noexcept {
  if (w == 0) return 0.0;
  return -static_cast<double>(w) * (std::log2(static_cast<double>(w)) - std::log2(static_cast<double>(n)));
}

inline double community_entropy(std::size_t size, std::size_t n) noexcept {
  return h_term(size, n) + h_term(n - size, n);
}

// H(X_i | Y_j) from the 2x2 contingency table, or H(X_i) when the pair is
// not admissible (h(a) + h(d) < h(b) + h(c)).
//   a: in neither, b: only in Y_j, c: only in X_i, d: in both
inline double conditional_entropy(std::size_t a, std::size_t b, std::size_t c, std::size_t d,
                                  std::size_t n) noexcept {
  const double ha = h_term(a, n), hb = h_term(b, n), hc = h_term(c, n), hd = h_term(d, n);
  if (ha + hd >= hb + hc) {
    const double h = ha + hb + hc + hd - h_term(b + d, n) - h_term(a + c, n);
    return std::max(h, 0.0);
  }
  return h_term(c + d, n) + h_term(a + b, n);
}

// Intersection sizes |X_i cap Y_j|, row-major |X| x |Y|.
inline std::vector<std::size_t> intersection_table(const Cover& x, const Cover& y) {
  std::vector<std::size_t> table(x.size() * y.size(), 0);
  const auto y_of = y.memberships();
  for (std::size_t i = 0; i < x.size(); ++i)
    for (Index v : x[i])
      for (Index j : y_of[v]) ++table[i * y.size() + j];
  return table;
}

inline double cover_conditional_entropy(const Cover& x, const Cover& y,
                                        const std::vector<std::size_t>& table, bool transposed) {
  const std::size_t n = x.n_nodes();
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t xs = x[i].size();
    double best = community_entropy(xs, n);
    for (std::size_t j = 0; j < y.size(); ++j) {
      const std::size_t d = transposed ? table[j * x.size() + i] : table[i * y.size() + j];
      const std::size_t ys = y[j].size();
      const std::size_t c = xs - d;
      const std::size_t b = ys - d;
      const std::size_t a = n - b - c - d;
      best = std::min(best, conditional_entropy(a, b, c, d, n));
    }
    total += best;
  }
  return total;
}

}  // namespace detail

/// Overlapping NMI in [0, 1]; 1 for identical covers, 0 when neither cover
/// carries information (all communities empty or full).
inline double onmi(const Cover& truth, const Cover& pred) {
  if (truth.n_nodes() != pred.n_nodes())
    throw DataError("onmi: covers disagree on node count (" + std::to_string(truth.n_nodes()) +
                    " vs " + std::to_string(pred.n_nodes()) + ")");
  const std::size_t n = truth.n_nodes();
  if (n == 0) return 0.0;
  double h_truth = 0.0;
  for (const auto& c : truth.communities()) h_truth += detail::community_entropy(c.size(), n);
  double h_pred = 0.0;
  for (const auto& c : pred.communities()) h_pred += detail::community_entropy(c.size(), n);
  const double norm = std::max(h_truth, h_pred);
  if (norm <= 0.0) return 0.0;

  const auto table = detail::intersection_table(truth, pred);
  const double h_truth_given_pred = detail::cover_conditional_entropy(truth, pred, table, false);
  const double h_pred_given_truth = detail::cover_conditional_entropy(pred, truth, table, true);
  const double mi = 0.5 * (h_truth - h_truth_given_pred + h_pred - h_pred_given_truth);
  return std::clamp(mi / norm, 0.0, 1.0);
}

/// Mean over truth communities of |C_i cap P_g(i)| / |C_i|, where g(i) is the
/// predicted community with the largest overlap (lowest index on ties).
inline double recall_best_match(const Cover& truth, const Cover& pred) {
  if (truth.size() == 0) throw DataError("recall_best_match: truth cover has no communities");
  if (truth.n_nodes() != pred.n_nodes())
    throw DataError("recall_best_match: covers disagree on node count (" + std::to_string(truth.n_nodes()) +
                    " vs " + std::to_string(pred.n_nodes()) + ")");
  const auto table = detail::intersection_table(truth, pred);
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].empty()) continue;
    std::size_t best = 0;
    for (std::size_t j = 0; j < pred.size(); ++j) best = std::max(best, table[i * pred.size() + j]);
    sum += static_cast<double>(best) / static_cast<double>(truth[i].size());
  }
  return sum / static_cast<double>(truth.size());
}

/// Index of the best-matching predicted community for each truth community,
/// or pred.size() when there is no predicted community.
inline std::vector<std::size_t> best_matches(const Cover& truth, const Cover& pred) {
  const auto table = detail::intersection_table(truth, pred);
  std::vector<std::size_t> match(truth.size(), pred.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 0; j < pred.size(); ++j) {
      const std::size_t v = table[i * pred.size() + j];
      if (match[i] == pred.size() || v > best) {
        best = v;
        match[i] = j;
      }
    }
  }
  return match;
}

}  // namespace lqgcn
