#include "ncl/triple_miner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "ncl/errors.hpp"
#include "ncl/seeding.hpp"

namespace ncl {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::pair<std::string_view, E> (&table)[N],
             std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view enum_name(E v, const std::pair<std::string_view, E> (&table)[N]) {
  for (const auto& [name, value] : table) {
    if (value == v) return name;
  }
  return "?";
}

constexpr std::pair<std::string_view, NeighborStrategy> kNeighborStrategies[] = {
    {"knn", NeighborStrategy::knn}, {"sim", NeighborStrategy::sim}};
constexpr std::pair<std::string_view, EasyStrategy> kEasyStrategies[] = {
    {"random", EasyStrategy::random},
    {"filtered_random", EasyStrategy::filtered_random},
    {"sorted_random", EasyStrategy::sorted_random}};
constexpr std::pair<std::string_view, SortDirection> kDirections[] = {
    {"closest", SortDirection::closest}, {"furthest", SortDirection::furthest}};
constexpr std::pair<std::string_view, NegativeKind> kKinds[] = {{"hard", NegativeKind::hard},
                                                                {"easy", NegativeKind::easy}};
constexpr std::pair<std::string_view, SamplerKind> kSamplers[] = {
    {"knn", SamplerKind::knn},
    {"sim", SamplerKind::sim},
    {"random", SamplerKind::random},
    {"filtered_random", SamplerKind::filtered_random},
    {"sorted_random", SamplerKind::sorted_random},
    {"oracle", SamplerKind::oracle}};

SamplerKind sampler_of(NeighborStrategy s) {
  return s == NeighborStrategy::knn ? SamplerKind::knn : SamplerKind::sim;
}

SamplerKind sampler_of(EasyStrategy s) {
  switch (s) {
    case EasyStrategy::random: return SamplerKind::random;
    case EasyStrategy::filtered_random: return SamplerKind::filtered_random;
    case EasyStrategy::sorted_random: return SamplerKind::sorted_random;
  }
  return SamplerKind::random;
}

struct Negative {
  Index node;
  NegativeKind kind;
  SamplerKind sampler;
};

}  // namespace

std::string_view to_string(NeighborStrategy s) { return enum_name(s, kNeighborStrategies); }
std::string_view to_string(EasyStrategy s) { return enum_name(s, kEasyStrategies); }
std::string_view to_string(SortDirection d) { return enum_name(d, kDirections); }
std::string_view to_string(NegativeKind k) { return enum_name(k, kKinds); }
std::string_view to_string(SamplerKind k) { return enum_name(k, kSamplers); }
NeighborStrategy parse_neighbor_strategy(std::string_view s) {
  return parse_enum(s, kNeighborStrategies, "neighbor strategy");
}
EasyStrategy parse_easy_strategy(std::string_view s) {
  return parse_enum(s, kEasyStrategies, "easy strategy");
}
SortDirection parse_sort_direction(std::string_view s) {
  return parse_enum(s, kDirections, "sort direction");
}
NegativeKind parse_negative_kind(std::string_view s) {
  return parse_enum(s, kKinds, "negative kind");
}
SamplerKind parse_sampler_kind(std::string_view s) { return parse_enum(s, kSamplers, "sampler"); }

void SamplingConfig::validate() const {
  if (c_pos < 1) throw ConfigError("sampling: c_pos must be >= 1");
  if (c_hard + c_easy != c_pos) {
    throw ConfigError("sampling: c_hard + c_easy (" + std::to_string(c_hard + c_easy) +
                      ") must equal c_pos (" + std::to_string(c_pos) +
                      ") to pair every positive with one negative");
  }
  if (pos_strategy == NeighborStrategy::knn && k_pos < c_pos) {
    throw ConfigError("sampling: k_pos must be >= c_pos");
  }
  if (hard_strategy == NeighborStrategy::knn && k_hard < c_hard) {
    throw ConfigError("sampling: k_hard must be >= c_hard");
  }
  if (pos_strategy == NeighborStrategy::knn && hard_strategy == NeighborStrategy::knn &&
      c_hard > 0 && sampling_margin(*this) < 0) {
    throw ConfigError("sampling: k_hard - c_hard (" + std::to_string(k_hard - c_hard) +
                      ") must be >= k_pos (" + std::to_string(k_pos) +
                      ") so positive and hard-negative bands cannot collide");
  }
  for (double t : {t_pos, t_neg}) {
    if (!(t >= -1.0 && t <= 1.0)) throw ConfigError("sampling: thresholds must lie in [-1, 1]");
  }
  if (easy_strategy == EasyStrategy::sorted_random && c_easy > sorted_candidates) {
    throw ConfigError("sampling: sorted_candidates must be >= c_easy");
  }
}

std::size_t SamplingConfig::neighbor_depth() const {
  std::size_t depth = 0;
  if (pos_strategy == NeighborStrategy::knn) depth = std::max(depth, k_pos);
  if (hard_strategy == NeighborStrategy::knn && c_hard > 0) depth = std::max(depth, k_hard);
  if (easy_strategy == EasyStrategy::filtered_random && c_easy > 0) {
    depth = std::max(depth, filter_depth());
  }
  return depth;
}

std::ptrdiff_t sampling_margin(const SamplingConfig& cfg) {
  return static_cast<std::ptrdiff_t>(cfg.k_hard) - static_cast<std::ptrdiff_t>(cfg.c_hard) -
         static_cast<std::ptrdiff_t>(cfg.k_pos);
}

std::vector<Index> sample_positives_knn(const NeighborList& n, const SamplingConfig& cfg) {
  if (cfg.c_pos == 0) return {};
  return range_by_rank(n, cfg.k_pos, cfg.c_pos);
}

std::vector<Index> sample_hard_negatives_knn(const NeighborList& n, const SamplingConfig& cfg) {
  if (sampling_margin(cfg) < 0) {
    throw ConfigError("sampling: hard-negative band overlaps the positive band");
  }
  if (cfg.c_hard == 0) return {};
  return range_by_rank(n, cfg.k_hard, cfg.c_hard);
}

SimilaritySample sample_by_similarity(std::span<const Neighbor> scores, std::size_t c, double t,
                                      ThresholdMode mode) {
  if (c < 1) throw ArgumentError("sample_by_similarity: c must be >= 1");
  std::vector<Neighbor> eligible;
  for (const Neighbor& s : scores) {
    if (mode == ThresholdMode::above ? s.score > t : s.score < t) eligible.push_back(s);
  }
  if (eligible.empty()) {
    throw MiningFailure("no candidate " + std::string(mode == ThresholdMode::above ? "above" : "below") +
                        " similarity threshold " + std::to_string(t));
  }
  const std::size_t take = std::min(c, eligible.size());
  std::partial_sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(take),
                    eligible.end(), ranks_before);
  SimilaritySample out;
  out.partial = take < c;
  for (std::size_t i = 0; i < take; ++i) out.nodes.push_back(eligible[i].node);
  return out;
}

std::vector<Index> sample_random(std::span<const Index> corpus, std::size_t c,
                                 const std::unordered_set<Index>& exclude, std::uint64_t seed) {
  std::vector<Index> pool;
  pool.reserve(corpus.size());
  for (Index x : corpus) {
    if (!exclude.contains(x)) pool.push_back(x);
  }
  if (pool.size() < c) {
    throw MiningFailure("random sampling needs " + std::to_string(c) + " candidates, " +
                        std::to_string(pool.size()) + " available");
  }
  Rng rng(seed);
  for (std::size_t i = 0; i < c; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(c);
  return pool;
}

std::vector<Index> sample_filtered_random(std::span<const Index> corpus, std::size_t c,
                                          const NeighborList& n, std::size_t k_filter,
                                          std::uint64_t seed,
                                          const std::unordered_set<Index>& also_exclude) {
  std::unordered_set<Index> exclude(also_exclude);
  exclude.insert(n.query);
  const std::size_t depth = std::min(k_filter, n.size());
  for (std::size_t r = 1; r <= depth; ++r) exclude.insert(n.at_rank(r).node);
  return sample_random(corpus, c, exclude, seed);
}

template <typename Scalar>
std::vector<Index> sample_sorted_random(const BasicEmbeddingTable<Scalar>& t, Index query,
                                        std::span<const Index> corpus, std::size_t n_candidates,
                                        std::size_t c, SortDirection direction,
                                        std::uint64_t seed,
                                        const std::unordered_set<Index>& exclude) {
  if (n_candidates < c) throw ArgumentError("sample_sorted_random: n_candidates < c");
  std::unordered_set<Index> ex(exclude);
  ex.insert(query);
  const auto drawn = sample_random(corpus, n_candidates, ex, seed);
  std::vector<Neighbor> scored;
  scored.reserve(drawn.size());
  for (Index x : drawn) scored.push_back({x, score_rows(t, query, x)});
  auto order = [direction](const Neighbor& a, const Neighbor& b) {
    if (a.score != b.score) {
      return direction == SortDirection::closest ? a.score > b.score : a.score < b.score;
    }
    return a.node < b.node;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(c), scored.end(),
                    order);
  std::vector<Index> out;
  out.reserve(c);
  for (std::size_t i = 0; i < c; ++i) out.push_back(scored[i].node);
  return out;
}

template <typename Scalar>
MiningResult mine_triples(std::span<const PaperId> queries, const BasicEmbeddingTable<Scalar>& t,
                          std::span<const PaperId> corpus, const SamplingConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) throw ArgumentError("mine_triples: empty corpus");
  std::vector<Index> corpus_rows;
  corpus_rows.reserve(corpus.size());
  std::unordered_map<Index, const PaperId*> by_row;
  for (const PaperId& p : corpus) {
    if (p.index >= t.rows()) {
      throw DataError("corpus paper '" + p.external_id + "' has no embedding row");
    }
    corpus_rows.push_back(p.index);
    by_row.emplace(p.index, &p);
  }
  std::vector<Index> query_rows;
  for (const PaperId& q : queries) {
    if (q.index >= t.rows()) {
      throw DataError("query paper '" + q.external_id + "' has no embedding row");
    }
    query_rows.push_back(q.index);
  }

  const std::size_t depth = cfg.neighbor_depth();
  std::vector<NeighborList> neighbors;
  if (depth > 0) neighbors = batch_neighbors(t, query_rows, depth, corpus_rows);

  const bool needs_sim =
      cfg.pos_strategy == NeighborStrategy::sim || cfg.hard_strategy == NeighborStrategy::sim;

  MiningResult result;
  result.triples.config = cfg;
  result.report.queries = queries.size();

  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const PaperId& q = queries[qi];
    const std::uint64_t qseed = derive_seed(cfg.seed, q.external_id);
    NeighborList empty;
    empty.query = q.index;
    const NeighborList& n = depth > 0 ? neighbors[qi] : empty;
    try {
      std::vector<Neighbor> sim_scores;
      if (needs_sim) {
        sim_scores.reserve(corpus_rows.size());
        for (Index c : corpus_rows) {
          if (c != q.index) sim_scores.push_back({c, cosine(t.row(q.index), t.row(c))});
        }
      }
      bool partial = false;

      std::vector<Index> positives;
      if (cfg.pos_strategy == NeighborStrategy::knn) {
        positives = sample_positives_knn(n, cfg);
      } else {
        auto s = sample_by_similarity(sim_scores, cfg.c_pos, cfg.t_pos, ThresholdMode::above);
        partial |= s.partial;
        positives = std::move(s.nodes);
      }

      std::vector<Index> hard;
      if (cfg.c_hard > 0) {
        if (cfg.hard_strategy == NeighborStrategy::knn) {
          hard = sample_hard_negatives_knn(n, cfg);
        } else {
          std::vector<Neighbor> pool;
          std::unordered_set<Index> pos_set(positives.begin(), positives.end());
          for (const auto& s : sim_scores) {
            if (!pos_set.contains(s.node)) pool.push_back(s);
          }
          auto s = sample_by_similarity(pool, cfg.c_hard, cfg.t_neg, ThresholdMode::below);
          partial |= s.partial;
          hard = std::move(s.nodes);
        }
      }

      std::unordered_set<Index> taken(positives.begin(), positives.end());
      taken.insert(hard.begin(), hard.end());
      taken.insert(q.index);
      std::vector<Index> easy;
      if (cfg.c_easy > 0) {
        const std::uint64_t eseed = derive_seed(qseed, "easy");
        switch (cfg.easy_strategy) {
          case EasyStrategy::random:
            easy = sample_random(corpus_rows, cfg.c_easy, taken, eseed);
            break;
          case EasyStrategy::filtered_random:
            easy = sample_filtered_random(corpus_rows, cfg.c_easy, n, cfg.filter_depth(), eseed,
                                          taken);
            break;
          case EasyStrategy::sorted_random:
            easy = sample_sorted_random(t, q.index, corpus_rows, cfg.sorted_candidates,
                                        cfg.c_easy, cfg.sorted_direction, eseed, taken);
            break;
        }
      }

      std::vector<Negative> negatives;
      for (Index h : hard) {
        negatives.push_back({h, NegativeKind::hard, sampler_of(cfg.hard_strategy)});
      }
      for (Index e : easy) {
        negatives.push_back({e, NegativeKind::easy, sampler_of(cfg.easy_strategy)});
      }
      Rng prng(derive_seed(qseed, "pairing"));
      std::shuffle(negatives.begin(), negatives.end(), prng);

      const std::size_t count = std::min(positives.size(), negatives.size());
      partial |= count < cfg.c_pos;
      for (std::size_t i = 0; i < count; ++i) {
        result.triples.triples.push_back({q, *by_row.at(positives[i]),
                                          *by_row.at(negatives[i].node), negatives[i].kind,
                                          negatives[i].sampler});
      }
      ++result.report.mined;
      if (partial) {
        ++result.report.partial;
        result.report.partial_ids.push_back(q.external_id);
      }
    } catch (const DataError& e) {
      result.report.skipped.push_back({q.external_id, e.what()});
    }
  }
  return result;
}

TripleSet oracle_triples(std::span<const std::pair<PaperId, std::string>> labels,
                         std::size_t per_label_cap, const SamplingConfig& cfg) {
  std::map<std::string, std::vector<Index>> members;
  std::unordered_map<Index, const PaperId*> papers;
  for (const auto& [paper, label] : labels) {
    members[label].push_back(paper.index);
    papers.emplace(paper.index, &paper);
  }
  if (members.size() < 2) throw ArgumentError("oracle_triples needs at least two labels");
  for (const auto& [label, rows] : members) {
    if (rows.size() < 2) {
      throw ArgumentError("oracle_triples: label '" + label + "' has fewer than two papers");
    }
  }
  if (cfg.c_pos < 1 || cfg.c_hard + cfg.c_easy < 1) {
    throw ArgumentError("oracle_triples needs c_pos >= 1 and at least one negative");
  }

  TripleSet out;
  out.config = cfg;
  for (const auto& [label, rows] : members) {
    std::vector<Index> others;
    for (const auto& [other, other_rows] : members) {
      if (other != label) others.insert(others.end(), other_rows.begin(), other_rows.end());
    }
    std::vector<Index> order(rows);
    Rng rng(derive_seed(cfg.seed, "oracle:" + label));
    std::shuffle(order.begin(), order.end(), rng);

    std::size_t emitted = 0;
    for (Index qrow : order) {
      if (emitted >= per_label_cap) break;
      const PaperId& q = *papers.at(qrow);
      const std::uint64_t qseed = derive_seed(cfg.seed, q.external_id);
      const std::size_t n_pos = std::min(cfg.c_pos, rows.size() - 1);
      const auto positives = sample_random(rows, n_pos, {qrow}, derive_seed(qseed, "positives"));
      const std::size_t n_neg = std::min(cfg.c_hard + cfg.c_easy, others.size());
      const auto negs = sample_random(others, n_neg, {}, derive_seed(qseed, "negatives"));
      std::vector<Negative> negatives;
      for (std::size_t i = 0; i < negs.size(); ++i) {
        negatives.push_back(
            {negs[i], i < cfg.c_hard ? NegativeKind::hard : NegativeKind::easy, SamplerKind::oracle});
      }
      Rng prng(derive_seed(qseed, "pairing"));
      std::shuffle(negatives.begin(), negatives.end(), prng);
      const std::size_t count =
          std::min({positives.size(), negatives.size(), per_label_cap - emitted});
      for (std::size_t i = 0; i < count; ++i) {
        out.triples.push_back({q, *papers.at(positives[i]), *papers.at(negatives[i].node),
                               negatives[i].kind, SamplerKind::oracle});
      }
      emitted += count;
    }
  }
  return out;
}

TripleSet subsample_triples(const TripleSet& ts, double fraction, bool by_query,
                            std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ArgumentError("subsample fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  TripleSet out;
  out.config = ts.config;
  if (fraction == 1.0) {
    out.triples = ts.triples;
    return out;
  }
  Rng rng(derive_seed(seed, by_query ? "subsample:queries" : "subsample:triples"));
  auto keep_count = [fraction](std::size_t n) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  };
  if (!by_query) {
    std::vector<std::size_t> idx(ts.triples.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(keep_count(idx.size()));
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) out.triples.push_back(ts.triples[i]);
    return out;
  }
  std::vector<std::string> query_ids;
  std::unordered_set<std::string> seen;
  for (const auto& tr : ts.triples) {
    if (seen.insert(tr.query.external_id).second) query_ids.push_back(tr.query.external_id);
  }
  std::shuffle(query_ids.begin(), query_ids.end(), rng);
  query_ids.resize(keep_count(query_ids.size()));
  const std::unordered_set<std::string> kept(query_ids.begin(), query_ids.end());
  for (const auto& tr : ts.triples) {
    if (kept.contains(tr.query.external_id)) out.triples.push_back(tr);
  }
  return out;
}

void write_triples(const TripleSet& ts, std::ostream& out) {
  out << "query_id\tpositive_id\tnegative_id\tnegative_kind\tstrategy\n";
  for (const auto& t : ts.triples) {
    out << t.query.external_id << '\t' << t.positive.external_id << '\t'
        << t.negative.external_id << '\t' << to_string(t.negative_kind) << '\t'
        << to_string(t.sampler) << '\n';
  }
}

void write_triples(const TripleSet& ts, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_triples(ts, out);
}

std::vector<Triple> read_triples(const std::filesystem::path& path, const IdMap* ids) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Triple> out;
  std::string line;
  std::size_t lineno = 0;
  auto resolve = [ids](const std::string& id) {
    return PaperId{id, ids ? ids->index_of(id) : Index{0}};
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 || line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, '\t')) f.push_back(field);
    if (f.size() != 5) throw ParseError(path.string(), lineno, "expected 5 tab-separated fields");
    try {
      out.push_back({resolve(f[0]), resolve(f[1]), resolve(f[2]), parse_negative_kind(f[3]),
                     parse_sampler_kind(f[4])});
    } catch (const ConfigError& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
  return out;
}

#define NCL_INSTANTIATE(S)                                                                    \
  template std::vector<Index> sample_sorted_random<S>(                                       \
      const BasicEmbeddingTable<S>&, Index, std::span<const Index>, std::size_t, std::size_t, \
      SortDirection, std::uint64_t, const std::unordered_set<Index>&);                       \
  template MiningResult mine_triples<S>(std::span<const PaperId>, const BasicEmbeddingTable<S>&, \
                                        std::span<const PaperId>, const SamplingConfig&);

NCL_INSTANTIATE(float)
NCL_INSTANTIATE(double)

#undef NCL_INSTANTIATE

}  // namespace ncl
