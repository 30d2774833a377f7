#pragma once

#include <span>
#include <unordered_set>
#include <vector>

#include "ncl/embedding.hpp"

namespace ncl {

struct Neighbor {
  Index node = 0;
  double score = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Neighbors of `query` sorted by (score desc, node asc); never contains the
/// query itself. entries[i - 1] is the i-th nearest neighbor.
struct NeighborList {
  Index query = 0;
  std::vector<Neighbor> entries;

  std::size_t size() const noexcept { return entries.size(); }
  /// 1-based rank access.
  const Neighbor& at_rank(std::size_t rank) const { return entries.at(rank - 1); }
};

/// Strict ordering used everywhere a ranking must be reproducible.
inline bool ranks_before(const Neighbor& a, const Neighbor& b) noexcept {
  return a.score > b.score || (a.score == b.score && a.node < b.node);
}

class InsufficientNeighbors : public DataError {
 public:
  InsufficientNeighbors(Index query, std::size_t k, std::size_t available)
      : DataError("query " + std::to_string(query) + " has " + std::to_string(available) +
                  " neighbors, rank " + std::to_string(k) + " requested"),
        query_(query) {}
  Index query() const noexcept { return query_; }

 private:
  Index query_;
};

/// Exact exhaustive scan under the table's measure, scores in double.
/// Excludes `exclude` and the query; returns min(k, candidates) entries.
template <typename Scalar>
NeighborList top_k(const BasicEmbeddingTable<Scalar>& t, Index query, std::size_t k,
                   const std::unordered_set<Index>& exclude = {});

/// Same as top_k but scanning only `candidates` (e.g. a mining corpus).
template <typename Scalar>
NeighborList top_k_among(const BasicEmbeddingTable<Scalar>& t, std::span<const Index> candidates,
                         Index query, std::size_t k,
                         const std::unordered_set<Index>& exclude = {});

/// Nodes at 1-based ranks k-c+1 .. k, nearest first.
std::vector<Index> range_by_rank(const NeighborList& n, std::size_t k, std::size_t c);

/// One top_k(query, k_max) per query, positionally aligned. An empty
/// `candidates` span means every row.
template <typename Scalar>
std::vector<NeighborList> batch_neighbors(const BasicEmbeddingTable<Scalar>& t,
                                          std::span<const Index> queries, std::size_t k_max,
                                          std::span<const Index> candidates = {});

}  // namespace ncl
