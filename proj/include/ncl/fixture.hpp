#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ncl/corpus_graph.hpp"
#include "ncl/eval_harness.hpp"

namespace ncl {

/// Planted-partition (stochastic block) graph over contiguous equal blocks.
/// Undirected graphs draw each unordered pair once and store both directions.
struct PlantedPartition {
  Index nodes = 200;
  Index blocks = 2;
  double p_in = 0.10;
  double p_out = 0.01;
  bool undirected = true;
  std::uint64_t seed = 7;
};

CitationGraph planted_partition(const PlantedPartition& spec);
Index block_of(const PlantedPartition& spec, Index node);

/// Planted-partition citations plus one document per node whose words come
/// from a vocabulary private to the node's block.
struct SyntheticCorpus {
  CitationGraph graph;
  std::vector<Document> documents;
  std::vector<std::string> topics;  // per document
  RankingTask ranking;
  std::vector<LabeledItem> labels;
};

struct FixtureSpec {
  PlantedPartition graph;
  std::size_t words_per_topic = 60;
  std::size_t title_words = 6;
  std::size_t abstract_words = 24;
  std::size_t ranking_queries = 40;
  std::size_t ranking_candidates = 10;
  std::size_t ranking_relevant = 3;
  double label_train_fraction = 0.7;
};

SyntheticCorpus make_fixture(const FixtureSpec& spec);

/// Writes edges.tsv, documents.jsonl, ranking.jsonl, labels.jsonl.
void write_fixture(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace ncl
