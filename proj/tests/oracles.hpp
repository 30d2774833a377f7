#pragma once

// Definitional reference evaluators, written independently of the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ncl/ann_index.hpp"
#include "ncl/embedding.hpp"

namespace oracle {

inline double average_precision(const std::vector<char>& rel) {
  double sum = 0.0;
  int hits = 0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (!rel[i]) continue;
    int seen = 0;
    for (std::size_t j = 0; j <= i; ++j) seen += rel[j] ? 1 : 0;
    sum += static_cast<double>(seen) / static_cast<double>(i + 1);
    ++hits;
  }
  return hits ? sum / hits : std::numeric_limits<double>::quiet_NaN();
}

inline double ndcg(const std::vector<char>& rel) {
  double dcg = 0.0, ideal = 0.0;
  std::vector<char> best(rel);
  std::sort(best.begin(), best.end(), [](char a, char b) { return a > b; });
  for (std::size_t i = 0; i < rel.size(); ++i) {
    const double disc = std::log2(static_cast<double>(i) + 2.0);
    if (rel[i]) dcg += 1.0 / disc;
    if (best[i]) ideal += 1.0 / disc;
  }
  return ideal > 0 ? dcg / ideal : std::numeric_limits<double>::quiet_NaN();
}

inline double auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(pos.size() * neg.size());
}

/// Every other node scored and fully sorted.
template <typename Scalar>
std::vector<ncl::Neighbor> full_sort(const ncl::BasicEmbeddingTable<Scalar>& t, ncl::Index q) {
  std::vector<ncl::Neighbor> all;
  for (ncl::Index j = 0; j < t.rows(); ++j) {
    if (j == q) continue;
    double s = 0.0;
    if (t.measure == ncl::Measure::dot) {
      for (ncl::Index d = 0; d < t.dim(); ++d) {
        s += static_cast<double>(t.values(q, d)) * static_cast<double>(t.values(j, d));
      }
    } else {
      double nq = 0, nj = 0, dot = 0;
      for (ncl::Index d = 0; d < t.dim(); ++d) {
        const double a = t.values(q, d), b = t.values(j, d);
        dot += a * b;
        nq += a * a;
        nj += b * b;
      }
      s = (nq == 0 || nj == 0) ? 0.0 : dot / (std::sqrt(nq) * std::sqrt(nj));
    }
    all.push_back({j, s});
  }
  std::stable_sort(all.begin(), all.end(), [](const ncl::Neighbor& a, const ncl::Neighbor& b) {
    return a.score > b.score;
  });
  return all;
}

}  // namespace oracle
