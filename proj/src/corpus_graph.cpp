#include "ncl/corpus_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ncl/errors.hpp"
#include "ncl/seeding.hpp"

namespace ncl {

namespace {

std::uint64_t edge_key(Edge e) { return (std::uint64_t{e.src} << 32) | e.dst; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

Index IdMap::intern(const std::string& external_id) {
  auto [it, inserted] = to_index_.try_emplace(external_id, static_cast<Index>(ids_.size()));
  if (inserted) ids_.push_back(external_id);
  return it->second;
}

Index IdMap::index_of(const std::string& external_id) const {
  auto it = to_index_.find(external_id);
  if (it == to_index_.end()) throw DataError("unknown paper id '" + external_id + "'");
  return it->second;
}

CitationGraph ingest_edges_from_string(const std::string& text, const std::string& source) {
  CitationGraph g;
  std::unordered_set<std::uint64_t> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 2) {
      throw ParseError(source, lineno,
                       "expected 2 fields, got " + std::to_string(fields.size()));
    }
    any = true;
    ++g.stats.lines;
    Edge e{g.ids.intern(fields[0]), g.ids.intern(fields[1])};
    if (e.src == e.dst) {
      ++g.stats.self_loops_dropped;
      continue;
    }
    if (!seen.insert(edge_key(e)).second) {
      ++g.stats.duplicates_dropped;
      continue;
    }
    g.edges.push_back(e);
  }
  if (!any) throw DataError(source + ": empty edge file");
  return g;
}

CitationGraph ingest_edges(const std::filesystem::path& path) {
  return ingest_edges_from_string(read_file(path), path.string());
}

CitationGraph filter_nodes(const CitationGraph& g,
                           const std::unordered_set<std::string>& exclude) {
  CitationGraph out;
  out.directed = g.directed;
  out.stats = g.stats;
  std::size_t known = 0;
  std::vector<std::int64_t> remap(g.node_count(), -1);
  for (Index i = 0; i < g.node_count(); ++i) {
    const auto& id = g.ids.id_of(i);
    if (exclude.contains(id)) {
      ++known;
      continue;
    }
    remap[i] = out.ids.intern(id);
  }
  out.stats.unknown_excluded = exclude.size() - known;
  for (const Edge& e : g.edges) {
    if (remap[e.src] < 0 || remap[e.dst] < 0) continue;
    out.edges.push_back({static_cast<Index>(remap[e.src]), static_cast<Index>(remap[e.dst])});
  }
  return out;
}

CitationGraph to_undirected(const CitationGraph& g) {
  CitationGraph out;
  out.ids = g.ids;
  out.stats = g.stats;
  out.directed = false;
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(g.edges.size() * 2);
  for (const Edge& e : g.edges) {
    for (Edge x : {e, Edge{e.dst, e.src}}) {
      if (seen.insert(edge_key(x)).second) out.edges.push_back(x);
    }
  }
  return out;
}

EdgeSplit split_edges(const CitationGraph& g, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw ArgumentError("holdout fraction must lie in [0, 1), got " +
                        std::to_string(holdout_fraction));
  }
  const std::size_t m = g.edges.size();
  const auto n_hold =
      static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(m) + 1e-9));
  if (holdout_fraction > 0.0 && n_hold < 1) {
    throw ArgumentError("holdout fraction " + std::to_string(holdout_fraction) +
                        " selects no edge out of " + std::to_string(m));
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split_edges"));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> held(m, 0);
  for (std::size_t i = 0; i < n_hold; ++i) held[order[i]] = 1;

  EdgeSplit out;
  out.train.ids = g.ids;
  out.train.directed = g.directed;
  out.train.stats = g.stats;
  out.train.edges.reserve(m - n_hold);
  out.holdout.reserve(n_hold);
  for (std::size_t i = 0; i < m; ++i) {
    (held[i] ? out.holdout : out.train.edges).push_back(g.edges[i]);
  }
  return out;
}

void write_edges(const CitationGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const Edge& e : g.edges) {
    out << g.ids.id_of(e.src) << '\t' << g.ids.id_of(e.dst) << '\n';
  }
}

std::vector<Document> read_documents(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Document> docs;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("title")) {
      throw ParseError(path.string(), lineno, "document needs 'id' and 'title'");
    }
    Document d;
    d.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    d.title = j["title"].get<std::string>();
    d.abstract = j.value("abstract", std::string{});
    if (d.title.empty()) throw ParseError(path.string(), lineno, "empty title");
    if (!seen.insert(d.id).second) {
      throw ParseError(path.string(), lineno, "duplicate document id '" + d.id + "'");
    }
    docs.push_back(std::move(d));
  }
  return docs;
}

void write_documents(const std::vector<Document>& docs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& d : docs) {
    nlohmann::json j = {{"id", d.id}, {"title", d.title}, {"abstract", d.abstract}};
    out << j.dump() << '\n';
  }
}

std::vector<std::string> read_id_list(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ids.push_back(line);
  }
  return ids;
}

void write_id_list(const std::vector<std::string>& ids, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& id : ids) out << id << '\n';
}

}  // namespace ncl
