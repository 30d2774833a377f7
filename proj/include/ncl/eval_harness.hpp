#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "ncl/corpus_graph.hpp"
#include "ncl/embedding.hpp"

namespace ncl {

struct RankingQuery {
  std::string query;
  std::vector<std::string> candidates;
  std::unordered_set<std::string> relevant;
};

using RankingTask = std::vector<RankingQuery>;

/// Candidates of one query in rank order with their binary relevance.
struct RankedList {
  std::string query;
  std::vector<std::string> ranked;
  std::vector<char> relevant;
};

/// Sorts candidates by ascending L2 distance to the query vector, ties by
/// smaller row index. Throws DataError for ids missing from `ids`.
std::vector<RankedList> rank_by_l2(const EmbeddingTable& vectors, const IdMap& ids,
                                   const RankingTask& task);

/// Mean over relevant items of the precision at their rank; NaN when the list
/// has no relevant item.
double average_precision(std::span<const char> relevance);
/// DCG with log2(i + 1) discount over the full list, over the ideal DCG.
double ndcg(std::span<const char> relevance);

struct MetricSummary {
  double value = 0.0;
  std::size_t evaluated = 0;
  /// Queries without any relevant candidate, left out of the mean.
  std::size_t excluded = 0;
};

MetricSummary mean_average_precision(std::span<const RankedList> lists);
MetricSummary mean_ndcg(std::span<const RankedList> lists);
/// Fraction of queries whose first candidate is relevant (all queries count).
MetricSummary precision_at_1(std::span<const RankedList> lists);

struct ProbeConfig {
  int epochs = 300;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

/// Macro-average over `num_classes` of per-class F1; a class whose F1
/// denominator is zero contributes 0.
double macro_f1(std::span<const int> truth, std::span<const int> predicted, int num_classes);

/// Multinomial logistic regression fit by full-batch gradient descent on
/// standardized features. Returns predicted class ids for `test`.
std::vector<int> fit_predict_logistic(const Eigen::MatrixXd& train, std::span<const int> labels,
                                      int num_classes, const Eigen::MatrixXd& test,
                                      const ProbeConfig& cfg);

struct LabeledItem {
  std::string id;
  std::string label;
  bool train = true;
};

struct ProbeResult {
  double macro_f1 = 0.0;
  std::vector<std::string> classes;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

/// Fits the probe on the train items and scores macro-F1 on the test items.
ProbeResult linear_probe_f1(const EmbeddingTable& vectors, const IdMap& ids,
                            std::span<const LabeledItem> data, const ProbeConfig& cfg);

struct OverlapRow {
  std::string split;
  std::size_t overlap = 0;
  /// Percent of the training set, rounded to one decimal.
  double percent = 0.0;
};

struct OverlapReport {
  std::size_t train_size = 0;
  std::vector<OverlapRow> rows;  // one per split, then "combined"
};

OverlapReport overlap_report(const std::unordered_set<std::string>& train_ids,
                             const std::map<std::string, std::unordered_set<std::string>>& eval_ids);
std::string format_overlap(const OverlapReport& r);

/// Mean pairwise L2 distance within and across labels.
struct Separation {
  double intra = 0.0;
  double inter = 0.0;
};
Separation label_separation(const EmbeddingTable& vectors, const IdMap& ids,
                            std::span<const LabeledItem> data);

/// Metrics keyed `task.subtask.metric`.
struct Report {
  std::map<std::string, double> metrics;

  std::string to_json() const;
  std::string to_text() const;
};

/// JSON-lines with `query`, `candidates`, `relevant`.
RankingTask read_ranking_task(const std::filesystem::path& path);
/// JSON-lines with `id`, `label`, `split` (train|test).
std::vector<LabeledItem> read_labeled_set(const std::filesystem::path& path);

}  // namespace ncl
