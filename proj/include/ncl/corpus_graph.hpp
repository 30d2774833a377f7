#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace ncl {

using Index = std::uint32_t;

struct PaperId {
  std::string external_id;
  Index index = 0;

  friend bool operator==(const PaperId&, const PaperId&) = default;
};

struct Document {
  std::string id;
  std::string title;
  std::string abstract;
};

struct Edge {
  Index src = 0;
  Index dst = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Bijective external-id <-> dense index map. Indices follow insertion order.
class IdMap {
 public:
  /// Returns the existing index or assigns the next one.
  Index intern(const std::string& external_id);

  bool contains(const std::string& external_id) const {
    return to_index_.contains(external_id);
  }
  /// Throws DataError for unknown ids.
  Index index_of(const std::string& external_id) const;
  const std::string& id_of(Index i) const { return ids_.at(i); }
  PaperId paper(Index i) const { return {ids_.at(i), i}; }

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, Index> to_index_;
};

/// Counters surfaced by ingestion and filtering.
struct IngestStats {
  std::size_t lines = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t self_loops_dropped = 0;
  std::size_t unknown_excluded = 0;
};

/// Immutable after construction. Edges are unique, loop-free and in range.
struct CitationGraph {
  IdMap ids;
  std::vector<Edge> edges;
  bool directed = true;
  IngestStats stats;

  std::size_t node_count() const noexcept { return ids.size(); }
};

/// Reads `src<TAB>dst` lines (any whitespace accepted as separator).
/// Indices are assigned in first-appearance order; duplicate edges and
/// self-loops are dropped and counted.
CitationGraph ingest_edges(const std::filesystem::path& path);
CitationGraph ingest_edges_from_string(const std::string& text,
                                       const std::string& source = "<memory>");

/// Removes the excluded nodes and their incident edges. Survivors keep their
/// relative order and are re-indexed densely.
CitationGraph filter_nodes(const CitationGraph& g,
                           const std::unordered_set<std::string>& exclude);

/// Adds the reverse of every edge, deduplicated. Idempotent.
CitationGraph to_undirected(const CitationGraph& g);

struct EdgeSplit {
  CitationGraph train;
  std::vector<Edge> holdout;
};

/// Seeded uniform edge-level split. Both parts keep the original edge order.
EdgeSplit split_edges(const CitationGraph& g, double holdout_fraction, std::uint64_t seed);

/// Writes the canonical `src_id<TAB>dst_id` form; re-ingesting it reproduces
/// the same indices for every node incident to an edge.
void write_edges(const CitationGraph& g, const std::filesystem::path& path);

/// JSON-lines with `id`, `title`, `abstract`.
std::vector<Document> read_documents(const std::filesystem::path& path);
void write_documents(const std::vector<Document>& docs, const std::filesystem::path& path);

/// One external id per line; blank lines ignored.
std::vector<std::string> read_id_list(const std::filesystem::path& path);
void write_id_list(const std::vector<std::string>& ids, const std::filesystem::path& path);

}  // namespace ncl
