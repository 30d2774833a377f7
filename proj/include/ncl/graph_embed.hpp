#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ncl/corpus_graph.hpp"
#include "ncl/embedding.hpp"

namespace ncl {

/// Shallow node-embedding training with a margin ranking loss over
/// destination-corrupted edges.
struct GraphTrainConfig {
  int epochs = 20;
  double margin = 0.15;
  double learning_rate = 0.1;
  int negatives_per_edge = 10;
  int dim = 32;
  Measure measure = Measure::dot;
  std::uint64_t seed = 0;

  /// Throws ConfigError. `allow_frozen` admits learning_rate == 0.
  void validate(bool allow_frozen = false) const;
};

struct LinkPredMetrics {
  double mrr = 0.0;
  double hits_at_1 = 0.0;
  double hits_at_10 = 0.0;
  double auc = 0.0;
};

/// N(0, 1/dim) entries from a seeded generator.
template <typename Scalar = float>
BasicEmbeddingTable<Scalar> init_embeddings(Index node_count, Index dim, std::uint64_t seed,
                                            Measure measure = Measure::dot);

template <typename Scalar>
double score_edge(const BasicEmbeddingTable<Scalar>& t, Index src, Index dst) {
  return score_rows(t, src, dst);
}

/// max(0, margin - score(pos) + score(src, corrupt_dst)).
template <typename Scalar>
double pair_hinge_loss(const BasicEmbeddingTable<Scalar>& t, Edge pos, Index corrupt_dst,
                       double margin);

/// Dense gradient of pair_hinge_loss with respect to every table entry.
/// Zero on the flat side of the hinge and at the kink itself.
template <typename Scalar>
RowMatrix<double> pair_hinge_gradient(const BasicEmbeddingTable<Scalar>& t, Edge pos,
                                      Index corrupt_dst, double margin);

/// One pass over the edges in a shuffled order seeded by (cfg.seed, epoch).
/// Each edge draws cfg.negatives_per_edge corrupted destinations (never the
/// true one); the gradients of its pairs are averaged into one SGD step.
/// Returns the mean per-pair loss, measured before each step.
template <typename Scalar>
double train_epoch(BasicEmbeddingTable<Scalar>& t, const CitationGraph& g,
                   const GraphTrainConfig& cfg, int epoch = 0);

/// Runs cfg.epochs epochs in place and returns the per-epoch loss trace.
template <typename Scalar>
std::vector<double> train_graph(BasicEmbeddingTable<Scalar>& t, const CitationGraph& g,
                                const GraphTrainConfig& cfg);

/// Raw (unfiltered) link-prediction ranking of each held-out destination
/// against uniformly drawn corrupted destinations. Ties rank the smaller node
/// index first; AUC pools every (positive, corrupted) pair with ties as 0.5.
template <typename Scalar>
LinkPredMetrics eval_link_prediction(const BasicEmbeddingTable<Scalar>& t,
                                     std::span<const Edge> holdout, int negatives_per_edge,
                                     std::uint64_t seed);

/// Fraction of (p, n) pairs with p > n, ties counted as 0.5.
double pooled_auc(std::span<const double> positive, std::span<const double> negative);

}  // namespace ncl
