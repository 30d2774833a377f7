#include "ncl/fixture.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "ncl/errors.hpp"
#include "ncl/seeding.hpp"

namespace ncl {

namespace {

constexpr const char* kTopicStems[] = {"astro", "bio", "chem", "geo", "info", "neuro"};

std::string node_id(Index i) {
  std::string s = std::to_string(i);
  return "p" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

std::string topic_name(Index block) { return kTopicStems[block % std::size(kTopicStems)]; }

}  // namespace

Index block_of(const PlantedPartition& spec, Index node) {
  return static_cast<Index>(std::uint64_t{node} * spec.blocks / spec.nodes);
}

CitationGraph planted_partition(const PlantedPartition& spec) {
  if (spec.nodes < 2 || spec.blocks < 1 || spec.blocks > spec.nodes) {
    throw ArgumentError("planted_partition: need nodes >= 2 and 1 <= blocks <= nodes");
  }
  Rng rng(derive_seed(spec.seed, "planted_partition"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CitationGraph g;
  g.directed = !spec.undirected;
  for (Index i = 0; i < spec.nodes; ++i) g.ids.intern(node_id(i));
  for (Index a = 0; a < spec.nodes; ++a) {
    for (Index b = spec.undirected ? a + 1 : 0; b < spec.nodes; ++b) {
      if (a == b) continue;
      const double p = block_of(spec, a) == block_of(spec, b) ? spec.p_in : spec.p_out;
      if (u(rng) >= p) continue;
      g.edges.push_back({a, b});
      if (spec.undirected) g.edges.push_back({b, a});
    }
  }
  return g;
}

SyntheticCorpus make_fixture(const FixtureSpec& spec) {
  SyntheticCorpus c;
  c.graph = planted_partition(spec.graph);
  const Index n = spec.graph.nodes;
  Rng rng(derive_seed(spec.graph.seed, "fixture_documents"));
  std::uniform_int_distribution<std::size_t> word(0, spec.words_per_topic - 1);
  auto words = [&](Index block, std::size_t count) {
    std::string s;
    for (std::size_t i = 0; i < count; ++i) {
      if (i) s += ' ';
      s += topic_name(block) + std::to_string(word(rng));
    }
    return s;
  };
  std::vector<std::vector<Index>> members(spec.graph.blocks);
  for (Index i = 0; i < n; ++i) {
    const Index b = block_of(spec.graph, i);
    members[b].push_back(i);
    c.documents.push_back({node_id(i), words(b, spec.title_words), words(b, spec.abstract_words)});
    c.topics.push_back(topic_name(b));
  }

  Rng split_rng(derive_seed(spec.graph.seed, "fixture_labels"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    c.labels.push_back({node_id(i), c.topics[i], u(split_rng) < spec.label_train_fraction});
  }

  Rng task_rng(derive_seed(spec.graph.seed, "fixture_ranking"));
  std::uniform_int_distribution<Index> any(0, n - 1);
  const std::size_t n_irrelevant = spec.ranking_candidates - spec.ranking_relevant;
  for (std::size_t k = 0; k < spec.ranking_queries; ++k) {
    const Index q = any(task_rng);
    const Index b = block_of(spec.graph, q);
    std::vector<Index> same, other;
    for (Index i = 0; i < n; ++i) {
      if (i == q) continue;
      (block_of(spec.graph, i) == b ? same : other).push_back(i);
    }
    std::shuffle(same.begin(), same.end(), task_rng);
    std::shuffle(other.begin(), other.end(), task_rng);
    if (same.size() < spec.ranking_relevant || other.size() < n_irrelevant) break;
    RankingQuery rq;
    rq.query = node_id(q);
    for (std::size_t i = 0; i < spec.ranking_relevant; ++i) {
      rq.candidates.push_back(node_id(same[i]));
      rq.relevant.insert(node_id(same[i]));
    }
    for (std::size_t i = 0; i < n_irrelevant; ++i) rq.candidates.push_back(node_id(other[i]));
    std::sort(rq.candidates.begin(), rq.candidates.end());
    c.ranking.push_back(std::move(rq));
  }
  return c;
}

void write_fixture(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_edges(corpus.graph, dir / "edges.tsv");
  write_documents(corpus.documents, dir / "documents.jsonl");
  {
    std::ofstream out(dir / "ranking.jsonl", std::ios::binary);
    for (const auto& q : corpus.ranking) {
      std::vector<std::string> rel;
      for (const auto& c : q.candidates) {
        if (q.relevant.contains(c)) rel.push_back(c);
      }
      out << nlohmann::json{{"query", q.query}, {"candidates", q.candidates}, {"relevant", rel}}
                 .dump()
          << '\n';
    }
  }
  {
    std::ofstream out(dir / "labels.jsonl", std::ios::binary);
    for (const auto& it : corpus.labels) {
      out << nlohmann::json{{"id", it.id}, {"label", it.label},
                            {"split", it.train ? "train" : "test"}}
                 .dump()
          << '\n';
    }
  }
}

}  // namespace ncl
