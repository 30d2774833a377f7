#include "ncl/ann_index.hpp"

#include <algorithm>

namespace ncl {

namespace {

/// Double-precision view shared by every query of a batch.
struct ScoringView {
  RowMatrix<double> values;
  Eigen::VectorXd norms;
  Measure measure;

  template <typename Scalar>
  explicit ScoringView(const BasicEmbeddingTable<Scalar>& t)
      : values(t.values.template cast<double>()), measure(t.measure) {
    if (measure == Measure::cosine) {
      norms = values.rowwise().norm();
    }
  }

  double score(Index q, Index c) const {
    const double d = values.row(q).dot(values.row(c));
    if (measure == Measure::dot) return d;
    // divide, not multiply by inverses: parallel rows must score exactly 1
    const double n = norms[q] * norms[c];
    return n == 0.0 ? 0.0 : d / n;
  }
};

NeighborList scan(const ScoringView& view, std::span<const Index> candidates, Index query,
                  std::size_t k, const std::unordered_set<Index>& exclude) {
  if (k == 0) throw ArgumentError("top_k: k must be >= 1");
  const auto rows = static_cast<Index>(view.values.rows());
  if (query >= rows) {
    throw ArgumentError("top_k: query " + std::to_string(query) + " out of range");
  }
  std::vector<Neighbor> pool;
  auto consider = [&](Index c) {
    if (c == query || exclude.contains(c)) return;
    pool.push_back({c, view.score(query, c)});
  };
  if (candidates.empty()) {
    pool.reserve(rows);
    for (Index c = 0; c < rows; ++c) consider(c);
  } else {
    pool.reserve(candidates.size());
    for (Index c : candidates) {
      if (c >= rows) throw ArgumentError("top_k: candidate " + std::to_string(c) + " out of range");
      consider(c);
    }
  }
  NeighborList out;
  out.query = query;
  const std::size_t take = std::min(k, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(),
                    ranks_before);
  pool.resize(take);
  out.entries = std::move(pool);
  return out;
}

}  // namespace

template <typename Scalar>
NeighborList top_k(const BasicEmbeddingTable<Scalar>& t, Index query, std::size_t k,
                   const std::unordered_set<Index>& exclude) {
  return scan(ScoringView(t), {}, query, k, exclude);
}

template <typename Scalar>
NeighborList top_k_among(const BasicEmbeddingTable<Scalar>& t, std::span<const Index> candidates,
                         Index query, std::size_t k, const std::unordered_set<Index>& exclude) {
  if (k == 0) throw ArgumentError("top_k: k must be >= 1");
  if (candidates.empty()) {
    NeighborList empty;
    empty.query = query;
    return empty;
  }
  return scan(ScoringView(t), candidates, query, k, exclude);
}

std::vector<Index> range_by_rank(const NeighborList& n, std::size_t k, std::size_t c) {
  if (c < 1) throw ArgumentError("range_by_rank: c must be >= 1");
  if (k < c) throw ArgumentError("range_by_rank: k must be >= c");
  if (n.size() < k) throw InsufficientNeighbors(n.query, k, n.size());
  std::vector<Index> out;
  out.reserve(c);
  for (std::size_t r = k - c + 1; r <= k; ++r) out.push_back(n.at_rank(r).node);
  return out;
}

template <typename Scalar>
std::vector<NeighborList> batch_neighbors(const BasicEmbeddingTable<Scalar>& t,
                                          std::span<const Index> queries, std::size_t k_max,
                                          std::span<const Index> candidates) {
  if (k_max == 0) throw ArgumentError("batch_neighbors: k_max must be >= 1");
  const ScoringView view(t);
  std::vector<NeighborList> out;
  out.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    try {
      out.push_back(scan(view, candidates, queries[i], k_max, {}));
    } catch (const ArgumentError& e) {
      throw ArgumentError("batch query #" + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

#define NCL_INSTANTIATE(S)                                                                   \
  template NeighborList top_k<S>(const BasicEmbeddingTable<S>&, Index, std::size_t,         \
                                 const std::unordered_set<Index>&);                         \
  template NeighborList top_k_among<S>(const BasicEmbeddingTable<S>&, std::span<const Index>, \
                                       Index, std::size_t, const std::unordered_set<Index>&); \
  template std::vector<NeighborList> batch_neighbors<S>(                                    \
      const BasicEmbeddingTable<S>&, std::span<const Index>, std::size_t,                   \
      std::span<const Index>);

NCL_INSTANTIATE(float)
NCL_INSTANTIATE(double)

#undef NCL_INSTANTIATE

}  // namespace ncl
