// One PASS/FAIL line per acceptance criterion; exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ncl/ann_index.hpp"
#include "ncl/encoder.hpp"
#include "ncl/eval_harness.hpp"
#include "ncl/fixture.hpp"
#include "ncl/graph_embed.hpp"
#include "ncl/pipeline.hpp"
#include "ncl/seeding.hpp"
#include "ncl/triple_miner.hpp"
#include "oracles.hpp"

using namespace ncl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// expect() records the first failure and keeps going
struct Check {
  Outcome out;
  void expect(bool ok, const std::string& what) {
    if (!ok && out.pass) {
      out.pass = false;
      out.detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::vector<PaperId> papers(Index n) {
  std::vector<PaperId> p;
  for (Index i = 0; i < n; ++i) p.push_back({"paper" + std::to_string(i), i});
  return p;
}

Outcome exact_knn() {
  Check c;
  const auto t0 = Clock::now();
  Rng rng(20240501);
  std::uniform_int_distribution<Index> nodes(2, 1000), dims(1, 16);
  std::uniform_int_distribution<int> level(-4, 4);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::size_t lists = 0;
  for (int table = 0; table < 50; ++table) {
    const Index n = nodes(rng), d = dims(rng);
    // two of three tables use dyadic entries, so dot products are exact and ties frequent
    const bool quantized = table % 3 != 2;
    EmbeddingTable t;
    t.measure = quantized || table % 2 ? Measure::dot : Measure::cosine;
    t.values.resize(n, d);
    for (Eigen::Index i = 0; i < t.values.size(); ++i) {
      t.values.data()[i] = quantized ? static_cast<float>(level(rng)) * 0.25f : gauss(rng);
    }
    std::uniform_int_distribution<Index> pick(0, n - 1);
    for (int qi = 0; qi < 5; ++qi) {
      const Index q = pick(rng);
      const auto want = oracle::full_sort(t, q);
      for (std::size_t k : {std::size_t{1}, std::size_t{10}, std::size_t{n}}) {
        const auto got = top_k(t, q, k);
        const std::size_t expect_len = std::min<std::size_t>(k, want.size());
        c.expect(got.size() == expect_len, "length mismatch on table " + std::to_string(table));
        for (std::size_t r = 0; r < std::min(got.size(), expect_len); ++r) {
          const bool same_node = got.entries[r].node == want[r].node;
          const double tol = quantized ? 0.0 : 1e-12 * std::max(1.0, std::abs(want[r].score));
          const bool same_score = std::abs(got.entries[r].score - want[r].score) <= tol;
          c.expect(same_node && same_score, "table " + std::to_string(table) + " query " +
                                                std::to_string(q) + " rank " +
                                                std::to_string(r + 1) + " differs");
        }
        ++lists;
      }
    }
  }
  const double s = seconds_since(t0);
  c.expect(s < 30.0, "runtime " + num(s, 1) + " s");
  if (c.out.pass) {
    c.out.detail = std::to_string(lists) + " neighbor lists identical, " + num(s, 2) + " s";
  }
  return c.out;
}

struct PaperRun {
  SamplingConfig cfg;
  std::vector<PaperId> queries;
  EmbeddingTable table;
  MiningResult result;
};

const PaperRun& paper_run() {
  static const PaperRun run = [] {
    PaperRun r;
    r.cfg.seed = 41;
    r.table = init_embeddings<float>(4200, 16, 5);
    auto corpus = papers(4200);
    r.queries.assign(corpus.begin(), corpus.begin() + 1000);
    r.result = mine_triples<float>(r.queries, r.table, corpus, r.cfg);
    return r;
  }();
  return run;
}

Outcome band_arithmetic() {
  Check c;
  const auto& run = paper_run();
  const auto& cfg = run.cfg;
  std::map<Index, std::vector<const Triple*>> by_q;
  for (const auto& t : run.result.triples.triples) by_q[t.query.index].push_back(&t);
  c.expect(by_q.size() == 1000, std::to_string(by_q.size()) + " queries mined");
  std::size_t collisions = 0;
  std::set<std::ptrdiff_t> gaps;
  for (const auto& [q, trs] : by_q) {
    const auto n = top_k(run.table, q, cfg.k_hard);
    std::map<Index, std::size_t> rank;
    for (std::size_t r = 1; r <= n.size(); ++r) rank[n.at_rank(r).node] = r;
    std::set<std::size_t> pos_ranks, hard_ranks;
    std::set<Index> pos_ids, hard_ids;
    for (auto* t : trs) {
      pos_ids.insert(t->positive.index);
      pos_ranks.insert(rank.count(t->positive.index) ? rank[t->positive.index] : 0);
      if (t->negative_kind == NegativeKind::hard) {
        hard_ids.insert(t->negative.index);
        hard_ranks.insert(rank.count(t->negative.index) ? rank[t->negative.index] : 0);
      }
    }
    c.expect(pos_ranks == std::set<std::size_t>{21, 22, 23, 24, 25},
             "positives off ranks 21-25 for query " + std::to_string(q));
    c.expect(hard_ranks == std::set<std::size_t>{3999, 4000},
             "hard negatives off ranks 3999-4000 for query " + std::to_string(q));
    for (Index h : hard_ids) collisions += pos_ids.count(h);
    if (!pos_ranks.empty() && !hard_ranks.empty()) {
      gaps.insert(static_cast<std::ptrdiff_t>(*hard_ranks.begin()) -
                  static_cast<std::ptrdiff_t>(*pos_ranks.rbegin()));
    }
  }
  c.expect(gaps == std::set<std::ptrdiff_t>{3974}, "rank gap is not 3974 for every query");
  c.expect(collisions == 0, std::to_string(collisions) + " positive/hard collisions");
  c.expect(sampling_margin(cfg) == 3973, "sampling margin " + std::to_string(sampling_margin(cfg)));
  if (c.out.pass) {
    c.out.detail = "1000 queries: positives 21-25, hard 3999-4000, gap 3974, 0 collisions";
  }
  return c.out;
}

Outcome composition() {
  Check c;
  const auto& run = paper_run();
  const auto& ts = run.result.triples;
  c.expect(ts.triples.size() == 5000, std::to_string(ts.triples.size()) + " triples");
  std::map<std::string, std::pair<int, int>> kinds;
  for (const auto& t : ts.triples) {
    auto& k = kinds[t.query.external_id];
    (t.negative_kind == NegativeKind::hard ? k.first : k.second)++;
  }
  for (const auto& [q, k] : kinds) {
    c.expect(k.first == 2 && k.second == 3, "query " + q + " has " + std::to_string(k.first) +
                                                " hard / " + std::to_string(k.second) + " easy");
  }
  const auto sub = subsample_triples(ts, 0.01, true, 3);
  c.expect(sub.triples.size() == 50, "1% subsample kept " + std::to_string(sub.triples.size()));
  if (c.out.pass) c.out.detail = "5000 triples, {hard x2, easy x3} per query, 1% -> 50";
  return c.out;
}

Outcome worked_examples() {
  Check c;
  NeighborList n;
  for (Index i = 1; i <= 12; ++i) n.entries.push_back({i, 1.0 - 0.05 * i});
  c.expect(range_by_rank(n, 10, 3) == std::vector<Index>{8, 9, 10}, "kNN range");
  std::vector<Neighbor> s = {{101, 0.8}, {102, 0.7}, {103, 0.1}};
  auto sim = sample_by_similarity(s, 2, 0.5, ThresholdMode::above);
  c.expect(sim.nodes == std::vector<Index>{101, 102} && !sim.partial, "Sim example");
  if (c.out.pass) c.out.detail = "range -> {n8,n9,n10}; Sim -> {0.8, 0.7}";
  return c.out;
}

Outcome graph_quality() {
  Check c;
  const auto t0 = Clock::now();
  constexpr std::uint64_t seed = 7;
  PlantedPartition pp;  // 200 nodes, p_in 0.10, p_out 0.01
  pp.seed = seed;
  const auto g = planted_partition(pp);
  const auto split = split_edges(g, 0.05, seed);
  double auc[2];
  for (int i = 0; i < 2; ++i) {
    GraphTrainConfig cfg;  // 20 epochs, m 0.15, lr 0.1, B 10, dim 32
    cfg.measure = i == 0 ? Measure::dot : Measure::cosine;
    cfg.seed = seed;
    auto t = init_embeddings<float>(static_cast<Index>(g.node_count()), 32, seed, cfg.measure);
    train_graph(t, split.train, cfg);
    auc[i] = eval_link_prediction(t, split.holdout, 100, seed).auc;
  }
  const double s = seconds_since(t0);
  c.expect(auc[0] >= 0.90, "dot AUC " + num(auc[0]) + " < 0.90");
  c.expect(auc[0] >= auc[1] - 0.02, "dot AUC " + num(auc[0]) + " vs cosine " + num(auc[1]));
  c.expect(s < 120.0, "runtime " + num(s, 1) + " s");
  c.out.detail = (c.out.pass ? "" : c.out.detail + "; ") + "dot AUC " + num(auc[0]) +
                 ", cosine AUC " + num(auc[1]) + ", " + std::to_string(split.holdout.size()) +
                 " held-out edges, " + num(s, 2) + " s";
  return c.out;
}

Outcome loss_and_gradients() {
  Check c;
  const auto t0 = Clock::now();
  Eigen::RowVector2d o(0, 0), two(2, 0), p(3, 4), n(1, 0);
  c.expect(triplet_loss(o, o, two, 1.0) == 0.0, "satisfied-margin fixture");
  c.expect(triplet_loss(o, two, two, 1.0) == 1.0, "p = n fixture");
  c.expect(triplet_loss(o, p, n, 1.0) == 5.0, "(0,0),(3,4),(1,0) fixture");

  static const char* pool[] = {"w0", "w1", "w2", "w3", "w4", "w5"};
  int done = 0;
  double worst_full = 0, worst_bias = 0;
  for (std::uint64_t seed = 1; seed < 500 && done < 20; ++seed) {
    Rng rng(seed);
    std::uniform_int_distribution<int> pick(0, 5), len(1, 4);
    auto text = [&] {
      std::string s;
      for (int i = len(rng); i > 0; --i) s += std::string(pool[pick(rng)]) + " ";
      return s;
    };
    auto params = init_encoder(
        Vocabulary::from_tokens({std::begin(pool), std::end(pool)}), 3, 2, seed);
    params.bias = Eigen::RowVectorXd::Random(2);
    const Document q{"q", text(), text()}, pos{"p", text(), text()}, neg{"n", text(), text()};
    try {
      const double full = grad_check(params, q, pos, neg, 1.0);
      const double bias = grad_check(params, q, pos, neg, 1.0, 1e-6, true);
      worst_full = std::max(worst_full, full);
      worst_bias = std::max(worst_bias, bias);
      ++done;
    } catch (const ArgumentError&) {
      // kink fixture, drawn again
    }
  }
  const double s = seconds_since(t0);
  c.expect(done == 20, "only " + std::to_string(done) + " usable fixtures");
  c.expect(worst_full < 1e-4, "full gradient error " + std::to_string(worst_full));
  c.expect(worst_bias < 1e-4, "bias-only gradient error " + std::to_string(worst_bias));
  c.expect(s < 60.0, "runtime " + num(s, 1) + " s");
  if (c.out.pass) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "losses 0/1/5; max rel error %.2e full, %.2e bias-only",
                  worst_full, worst_bias);
    c.out.detail = buf;
  }
  return c.out;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

fs::path work_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "ncl_acceptance";
    fs::remove_all(p);
    fs::create_directories(p);
    write_fixture_bundle(p / "fixture");
    return p;
  }();
  return root;
}

Outcome end_to_end() {
  Check c;
  const auto root = work_root();
  const auto cfg = PipelineConfig::from_ini(root / "fixture" / "pipeline.ini");
  const auto t0 = Clock::now();
  run(Stage::all, cfg, root / "run1");
  const double s = seconds_since(t0);
  const auto report = read_json(root / "run1" / "report.json");
  const double intra = report["topic.fixture.intra_l2"];
  const double inter = report["topic.fixture.inter_l2"];
  const auto loss = read_json(root / "run1" / "encoder_loss.json")["epoch_loss"];
  const double first = loss.front(), last = loss.back();
  c.expect(s < 300.0, "runtime " + num(s, 1) + " s");
  c.expect(intra < inter, "intra " + num(intra) + " >= inter " + num(inter));
  c.expect(last < first, "loss " + num(first) + " -> " + num(last));
  if (c.out.pass) {
    c.out.detail = "intra L2 " + num(intra) + " < inter " + num(inter) + "; loss " + num(first) +
                   " -> " + num(last) + "; " + num(s, 2) + " s";
  }
  return c.out;
}

Outcome metric_oracles() {
  Check c;
  Rng rng(8);
  std::uniform_int_distribution<int> len(1, 10), bit(0, 1);
  std::normal_distribution<double> g(0, 1);
  std::uniform_int_distribution<int> level(0, 4);
  for (int task = 0; task < 100; ++task) {
    std::vector<RankedList> lists;
    double ap = 0, nd = 0, p1 = 0;
    const int queries = 1 + task % 9;
    for (int q = 0; q < queries; ++q) {
      RankedList l;
      l.relevant.resize(static_cast<std::size_t>(len(rng)));
      for (auto& r : l.relevant) r = static_cast<char>(bit(rng));
      l.relevant[static_cast<std::size_t>(task) % l.relevant.size()] = 1;
      l.ranked.resize(l.relevant.size());
      ap += oracle::average_precision(l.relevant);
      nd += oracle::ndcg(l.relevant);
      p1 += l.relevant[0];
      lists.push_back(std::move(l));
    }
    const double n = queries;
    c.expect(std::abs(mean_average_precision(lists).value - ap / n) < 1e-9, "MAP task " + std::to_string(task));
    c.expect(std::abs(mean_ndcg(lists).value - nd / n) < 1e-9, "nDCG task " + std::to_string(task));
    c.expect(std::abs(precision_at_1(lists).value - p1 / n) < 1e-9, "P@1 task " + std::to_string(task));

    std::vector<double> pos(static_cast<std::size_t>(len(rng))), neg(static_cast<std::size_t>(len(rng)));
    // coarse levels on half the tasks force ties
    for (auto& v : pos) v = task % 2 ? g(rng) : level(rng);
    for (auto& v : neg) v = task % 2 ? g(rng) : level(rng);
    c.expect(std::abs(pooled_auc(pos, neg) - oracle::auc(pos, neg)) < 1e-9, "AUC task " + std::to_string(task));
  }
  std::vector<char> worked = {1, 0, 1};
  c.expect(num(average_precision(worked)) == "0.8333", "MAP worked value " + num(average_precision(worked)));
  c.expect(num(ndcg(worked)) == "0.9197", "nDCG worked value " + num(ndcg(worked)));
  std::vector<double> pos = {0.9, 0.7}, neg = {0.8, 0.1};
  c.expect(num(pooled_auc(pos, neg)) == "0.7500", "AUC worked value");
  if (c.out.pass) c.out.detail = "100 random tasks within 1e-9; 0.8333 / 0.9197 / 0.7500";
  return c.out;
}

Outcome leakage() {
  Check c;
  std::unordered_set<std::string> train;
  for (int i = 0; i < 311860; ++i) train.insert("t" + std::to_string(i));
  std::map<std::string, std::unordered_set<std::string>> eval;
  // three splits that overlap one another; their union meets train in 126,176 ids
  for (int i = 0; i < 70000; ++i) eval["cite"].insert("t" + std::to_string(i));
  for (int i = 50000; i < 110000; ++i) eval["cocite"].insert("t" + std::to_string(i));
  for (int i = 100000; i < 126176; ++i) eval["recomm"].insert("t" + std::to_string(i));
  for (int i = 0; i < 9000; ++i) eval["recomm"].insert("e" + std::to_string(i));
  const auto r = overlap_report(train, eval);
  const std::string text = format_overlap(r);
  c.expect(r.rows.back().split == "combined" && r.rows.back().overlap == 126176,
           "combined overlap " + std::to_string(r.rows.back().overlap));
  c.expect(text.find("40.5%") != std::string::npos, "report lacks 40.5%");
  if (c.out.pass) c.out.detail = "combined 126176 / 311860 printed as 40.5%";
  return c.out;
}

Outcome determinism() {
  Check c;
  const auto root = work_root();
  const auto cfg = PipelineConfig::from_ini(root / "fixture" / "pipeline.ini");
  if (!fs::exists(root / "run1" / "report.json")) run(Stage::all, cfg, root / "run1");
  run(Stage::all, cfg, root / "run2");
  auto sums = [](const fs::path& d) {
    std::map<std::string, std::string> m;
    for (const auto& e : fs::directory_iterator(d)) {
      m[e.path().filename().string()] = sha256_file(e.path());
    }
    return m;
  };
  const auto a = sums(root / "run1");
  c.expect(a == sums(root / "run2"), "two full runs differ");
  // each stage repeated in place against the same upstream files
  for (Stage s : {Stage::ingest, Stage::graph_train, Stage::mine, Stage::encode_train,
                  Stage::eval}) {
    run(s, cfg, root / "run2");
    c.expect(sums(root / "run2") == a, std::string("rerun of ") + std::string(to_string(s)) + " differs");
  }
  if (c.out.pass) c.out.detail = std::to_string(a.size()) + " artifact files, identical SHA-256 across reruns";
  return c.out;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"exact kNN oracle", exact_knn},
      {"band arithmetic", band_arithmetic},
      {"triple composition", composition},
      {"worked examples", worked_examples},
      {"graph-embedding quality", graph_quality},
      {"loss and gradients", loss_and_gradients},
      {"end-to-end separation", end_to_end},
      {"metric oracles", metric_oracles},
      {"leakage report", leakage},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(fs::temp_directory_path() / "ncl_acceptance");
  return failed == 0 ? 0 : 1;
}
