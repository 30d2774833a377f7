#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "ncl/ann_index.hpp"
#include "ncl/corpus_graph.hpp"
#include "ncl/embedding.hpp"

namespace ncl {

enum class NeighborStrategy { knn, sim };
enum class EasyStrategy { random, filtered_random, sorted_random };
enum class SortDirection { closest, furthest };
enum class NegativeKind { hard, easy };

/// Which sampler produced a triple's negative.
enum class SamplerKind { knn, sim, random, filtered_random, sorted_random, oracle };

std::string_view to_string(NeighborStrategy s);
std::string_view to_string(EasyStrategy s);
std::string_view to_string(SortDirection d);
std::string_view to_string(NegativeKind k);
std::string_view to_string(SamplerKind k);
NeighborStrategy parse_neighbor_strategy(std::string_view s);
EasyStrategy parse_easy_strategy(std::string_view s);
SortDirection parse_sort_direction(std::string_view s);
NegativeKind parse_negative_kind(std::string_view s);
SamplerKind parse_sampler_kind(std::string_view s);

/// Knobs of the neighborhood sampler. Positives come from neighbor ranks
/// (k_pos - c_pos, k_pos], hard negatives from (k_hard - c_hard, k_hard].
struct SamplingConfig {
  std::size_t k_pos = 25;
  std::size_t k_hard = 4000;
  std::size_t c_pos = 5;
  std::size_t c_hard = 2;
  std::size_t c_easy = 3;
  double t_pos = 0.9;
  double t_neg = 0.5;
  NeighborStrategy pos_strategy = NeighborStrategy::knn;
  NeighborStrategy hard_strategy = NeighborStrategy::knn;
  EasyStrategy easy_strategy = EasyStrategy::filtered_random;
  /// Neighbors excluded by filtered random; defaults to max(k_pos, k_hard).
  std::optional<std::size_t> k_filter;
  std::size_t sorted_candidates = 100;
  SortDirection sorted_direction = SortDirection::furthest;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;

  std::size_t filter_depth() const { return k_filter.value_or(std::max(k_pos, k_hard)); }
  /// Neighbor list depth needed by the configured strategies (0 if none).
  std::size_t neighbor_depth() const;
};

/// Rank positions strictly between the positive band and the hard-negative
/// band: k_hard - c_hard - k_pos. Negative when the bands overlap.
std::ptrdiff_t sampling_margin(const SamplingConfig& cfg);

struct Triple {
  PaperId query;
  PaperId positive;
  PaperId negative;
  NegativeKind negative_kind = NegativeKind::easy;
  SamplerKind sampler = SamplerKind::random;
};

struct TripleSet {
  std::vector<Triple> triples;
  SamplingConfig config;
};

/// A single query could not be mined; the query is skipped.
class MiningFailure : public DataError {
 public:
  using DataError::DataError;
};

struct SimilaritySample {
  std::vector<Index> nodes;
  bool partial = false;
};

enum class ThresholdMode { above, below };

std::vector<Index> sample_positives_knn(const NeighborList& n, const SamplingConfig& cfg);
std::vector<Index> sample_hard_negatives_knn(const NeighborList& n, const SamplingConfig& cfg);

/// above: the c largest scores > t. below: the c largest scores < t.
/// Ordered by (score desc, node asc); `partial` when fewer than c qualify.
SimilaritySample sample_by_similarity(std::span<const Neighbor> scores, std::size_t c, double t,
                                      ThresholdMode mode);

/// Seeded uniform draw without replacement from corpus \ exclude.
std::vector<Index> sample_random(std::span<const Index> corpus, std::size_t c,
                                 const std::unordered_set<Index>& exclude, std::uint64_t seed);

/// sample_random that also excludes the query and its first k_filter neighbors.
std::vector<Index> sample_filtered_random(std::span<const Index> corpus, std::size_t c,
                                          const NeighborList& n, std::size_t k_filter,
                                          std::uint64_t seed,
                                          const std::unordered_set<Index>& also_exclude = {});

/// Draws n_candidates uniformly, then keeps the c closest or furthest to the
/// query under the table's measure (ties by smaller index).
template <typename Scalar>
std::vector<Index> sample_sorted_random(const BasicEmbeddingTable<Scalar>& t, Index query,
                                        std::span<const Index> corpus, std::size_t n_candidates,
                                        std::size_t c, SortDirection direction,
                                        std::uint64_t seed,
                                        const std::unordered_set<Index>& exclude = {});

struct SkippedQuery {
  std::string query_id;
  std::string reason;
};

struct MiningReport {
  std::size_t queries = 0;
  std::size_t mined = 0;
  std::size_t partial = 0;
  std::vector<SkippedQuery> skipped;
  std::vector<std::string> partial_ids;
};

struct MiningResult {
  TripleSet triples;
  MiningReport report;
};

/// Mines c_pos triples per query. Neighbors are computed once per query over
/// `corpus`; the hard and easy negatives are shuffled with a per-query seed
/// and zipped with the positives. Queries whose samplers fail are skipped.
template <typename Scalar>
MiningResult mine_triples(std::span<const PaperId> queries, const BasicEmbeddingTable<Scalar>& t,
                          std::span<const PaperId> corpus, const SamplingConfig& cfg);

/// Triples from labels: same-label positives, other-label negatives.
/// No label contributes more than per_label_cap triples.
TripleSet oracle_triples(std::span<const std::pair<PaperId, std::string>> labels,
                         std::size_t per_label_cap, const SamplingConfig& cfg);

/// Keeps floor(fraction * n) triples (by_query=false) or the triples of
/// floor(fraction * n_queries) queries (by_query=true), in original order.
TripleSet subsample_triples(const TripleSet& ts, double fraction, bool by_query,
                            std::uint64_t seed);

/// TSV with header `query_id positive_id negative_id negative_kind strategy`.
void write_triples(const TripleSet& ts, const std::filesystem::path& path);
void write_triples(const TripleSet& ts, std::ostream& out);
/// Indices are resolved through `ids` when given, else left at 0.
std::vector<Triple> read_triples(const std::filesystem::path& path, const IdMap* ids = nullptr);

}  // namespace ncl
