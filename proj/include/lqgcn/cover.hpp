#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "lqgcn/error.hpp"
#include "lqgcn/sparse.hpp"

namespace lqgcn {

using Community = std::vector<Index>;

/// A collection of possibly overlapping node sets over nodes [0, n_nodes).
/// Members are kept sorted and unique; community order carries no meaning.
class Cover {
 public:
  Cover() = default;
  Cover(std::size_t n_nodes, std::vector<Community> communities)
      : n_nodes_(n_nodes), communities_(std::move(communities)) {
    for (auto& c : communities_) {
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
      if (!c.empty() && c.back() >= n_nodes_)
        throw DataError("cover references node " + std::to_string(c.back()) + " but only " +
                        std::to_string(n_nodes_) + " nodes exist");
    }
  }

  std::size_t n_nodes() const noexcept { return n_nodes_; }
  std::size_t size() const noexcept { return communities_.size(); }
  const std::vector<Community>& communities() const noexcept { return communities_; }
  const Community& operator[](std::size_t s) const noexcept { return communities_[s]; }

  std::size_t empty_communities() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(communities_.begin(), communities_.end(), [](const Community& c) { return c.empty(); }));
  }

  /// For each node, the indices of the communities containing it.
  std::vector<std::vector<Index>> memberships() const {
    std::vector<std::vector<Index>> m(n_nodes_);
    for (std::size_t s = 0; s < communities_.size(); ++s)
      for (Index v : communities_[s]) m[v].push_back(static_cast<Index>(s));
    return m;
  }

  friend bool operator==(const Cover&, const Cover&) = default;

 private:
  std::size_t n_nodes_ = 0;
  std::vector<Community> communities_;
};

}  // namespace lqgcn
