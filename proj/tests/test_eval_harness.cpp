#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "ncl/errors.hpp"
#include "ncl/eval_harness.hpp"
#include "ncl/seeding.hpp"
#include "oracles.hpp"

using namespace ncl;

namespace {

RankedList list_of(std::vector<char> rel) {
  RankedList l;
  for (std::size_t i = 0; i < rel.size(); ++i) l.ranked.push_back("c" + std::to_string(i));
  l.relevant = std::move(rel);
  return l;
}

EmbeddingTable table2(std::vector<std::pair<float, float>> rows) {
  EmbeddingTable t;
  t.values.resize(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.values(static_cast<Eigen::Index>(i), 0) = rows[i].first;
    t.values(static_cast<Eigen::Index>(i), 1) = rows[i].second;
  }
  return t;
}

IdMap ids_of(std::initializer_list<const char*> names) {
  IdMap m;
  for (auto* n : names) m.intern(n);
  return m;
}

}  // namespace

TEST_CASE("average precision and nDCG worked values") {
  std::vector<char> r = {1, 0, 1};
  CHECK(std::round(average_precision(r) * 1e4) / 1e4 == 0.8333);
  CHECK(average_precision(r) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  CHECK(std::round(ndcg(r) * 1e4) / 1e4 == 0.9197);
  CHECK(ndcg(r) == doctest::Approx(1.5 / (1.0 + 1.0 / std::log2(3.0))));
  std::vector<char> perfect = {1, 1, 0, 0};
  CHECK(average_precision(perfect) == 1.0);
  CHECK(ndcg(perfect) == 1.0);
  std::vector<char> second = {0, 1};
  CHECK(average_precision(second) == 0.5);
  std::vector<char> every = {1, 1, 1};
  CHECK(ndcg(every) == 1.0);
  std::vector<char> none = {0, 0};
  CHECK(std::isnan(average_precision(none)));
  CHECK(std::isnan(ndcg(none)));
}

TEST_CASE("MAP and nDCG exclude queries without relevant items") {
  std::vector<RankedList> lists = {list_of({1, 0, 1}), list_of({0, 0}), list_of({0, 1})};
  auto m = mean_average_precision(lists);
  CHECK(m.evaluated == 2);
  CHECK(m.excluded == 1);
  CHECK(m.value == doctest::Approx((0.8333333333333 + 0.5) / 2));
  auto n = mean_ndcg(lists);
  CHECK(n.excluded == 1);
}

TEST_CASE("precision at 1") {
  std::vector<RankedList> all = {list_of({1, 0}), list_of({1})};
  CHECK(precision_at_1(all).value == 1.0);
  std::vector<RankedList> none = {list_of({0, 1}), list_of({0})};
  CHECK(precision_at_1(none).value == 0.0);
  std::vector<RankedList> two = {list_of({1, 0}), list_of({0, 1}), list_of({1})};
  CHECK(std::round(precision_at_1(two).value * 1e4) / 1e4 == 0.6667);
}

TEST_CASE("metrics agree with definitional evaluators") {
  Rng rng(99);
  std::uniform_int_distribution<int> len(1, 10), bit(0, 2);
  for (int task = 0; task < 100; ++task) {
    std::vector<RankedList> lists;
    const int queries = 1 + task % 7;
    for (int q = 0; q < queries; ++q) {
      std::vector<char> rel(static_cast<std::size_t>(len(rng)));
      for (auto& r : rel) r = bit(rng) == 0;
      rel[static_cast<std::size_t>(q) % rel.size()] = 1;
      lists.push_back(list_of(rel));
    }
    double ap = 0, nd = 0, p1 = 0;
    for (const auto& l : lists) {
      ap += oracle::average_precision(l.relevant);
      nd += oracle::ndcg(l.relevant);
      p1 += l.relevant[0] ? 1 : 0;
    }
    const double n = static_cast<double>(lists.size());
    CHECK(std::abs(mean_average_precision(lists).value - ap / n) < 1e-9);
    CHECK(std::abs(mean_ndcg(lists).value - nd / n) < 1e-9);
    CHECK(std::abs(precision_at_1(lists).value - p1 / n) < 1e-9);
  }
}

TEST_CASE("rank_by_l2: hand fixture, ties, missing id") {
  auto t = table2({{0, 0}, {3, 4}, {1, 1}, {-2, 0}, {0, 0}});
  auto ids = ids_of({"q", "a", "b", "c", "d"});
  RankingTask task = {{"q", {"a", "b", "c", "d"}, {"b"}}};
  auto r = rank_by_l2(t, ids, task);
  // distances a 5, b 1.41, c 2, d 0
  CHECK(r[0].ranked == std::vector<std::string>{"d", "b", "c", "a"});
  CHECK(r[0].relevant == std::vector<char>{0, 1, 0, 0});

  auto eq = table2({{0, 0}, {1, 0}, {0, 1}, {-1, 0}});
  auto eq_ids = ids_of({"q", "x", "y", "z"});
  RankingTask ties = {{"q", {"z", "x", "y"}, {"x"}}};
  CHECK(rank_by_l2(eq, eq_ids, ties)[0].ranked == std::vector<std::string>{"x", "y", "z"});

  RankingTask missing = {{"q", {"nope"}, {}}};
  CHECK_THROWS_AS(rank_by_l2(eq, eq_ids, missing), DataError);
}

TEST_CASE("macro F1") {
  std::vector<int> truth = {0, 0, 1, 1};
  std::vector<int> all_zero = {0, 0, 0, 0};
  CHECK(std::round(macro_f1(truth, all_zero, 2) * 1e4) / 1e4 == 0.3333);
  CHECK(macro_f1(truth, truth, 2) == 1.0);
}

TEST_CASE("linear probe: separable fixture and single-label train set") {
  EmbeddingTable t;
  IdMap ids;
  std::vector<LabeledItem> data;
  Rng rng(3);
  std::uniform_real_distribution<float> u(0.2f, 2.0f);
  t.values.resize(60, 2);
  for (Index i = 0; i < 60; ++i) {
    const bool right = i % 2 == 0;
    t.values(i, 0) = right ? u(rng) : -u(rng);
    t.values(i, 1) = u(rng) - 1.1f;
    const std::string id = "x" + std::to_string(i);
    ids.intern(id);
    data.push_back({id, right ? "right" : "left", i < 40});
  }
  ProbeConfig cfg;
  auto r = linear_probe_f1(t, ids, data, cfg);
  CHECK(r.macro_f1 == 1.0);
  CHECK(r.train_size == 40);
  CHECK(r.test_size == 20);
  CHECK(linear_probe_f1(t, ids, data, cfg).macro_f1 == r.macro_f1);

  for (auto& d : data) {
    if (d.train) d.label = "right";
  }
  CHECK_THROWS_AS(linear_probe_f1(t, ids, data, cfg), ArgumentError);
}

TEST_CASE("overlap report") {
  std::unordered_set<std::string> train;
  for (int i = 0; i < 311860; ++i) train.insert(std::to_string(i));
  std::unordered_set<std::string> a, b;
  for (int i = 0; i < 80000; ++i) a.insert(std::to_string(i));
  for (int i = 60000; i < 126176; ++i) b.insert(std::to_string(i));
  for (int i = 0; i < 500; ++i) b.insert("outside" + std::to_string(i));
  auto r = overlap_report(train, {{"a", a}, {"b", b}});
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[2].split == "combined");
  CHECK(r.rows[2].overlap == 126176);
  CHECK(r.rows[2].percent == 40.5);
  CHECK(r.rows[0].percent == 25.7);
  CHECK(format_overlap(r).find("40.5%") != std::string::npos);

  auto disjoint = overlap_report({"x"}, {{"s", {"y"}}});
  CHECK(disjoint.rows[0].overlap == 0);
  CHECK(disjoint.rows[0].percent == 0.0);
  auto superset = overlap_report({"x", "y"}, {{"s", {"x", "y", "z"}}});
  CHECK(superset.rows[1].percent == 100.0);
}

TEST_CASE("percent rounds half away from zero") {
  std::unordered_set<std::string> train;
  for (int i = 0; i < 2000; ++i) train.insert(std::to_string(i));
  auto first = [&](int n) {
    std::unordered_set<std::string> s;
    for (int i = 0; i < n; ++i) s.insert(std::to_string(i));
    return overlap_report(train, {{"s", s}}).rows[0].percent;
  };
  CHECK(first(507) == 25.4);  // 25.35
  CHECK(first(509) == 25.5);  // 25.45
  CHECK(first(508) == 25.4);
}

TEST_CASE("translation does not change L2 rankings") {
  Rng rng(5);
  std::normal_distribution<float> g(0, 1);
  EmbeddingTable t;
  t.values.resize(12, 3);
  for (Eigen::Index i = 0; i < t.values.size(); ++i) t.values.data()[i] = g(rng);
  IdMap ids;
  for (int i = 0; i < 12; ++i) ids.intern("n" + std::to_string(i));
  RankingTask task = {{"n0", {"n1", "n2", "n3", "n4", "n5"}, {"n2"}},
                      {"n6", {"n7", "n8", "n9", "n10", "n11"}, {"n8", "n11"}}};
  auto base = rank_by_l2(t, ids, task);
  EmbeddingTable moved = t;
  moved.values.rowwise() += Eigen::RowVector3f(5.0f, -3.0f, 0.5f);
  auto after = rank_by_l2(moved, ids, task);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(base[i].ranked == after[i].ranked);
}

TEST_CASE("report formats and task files") {
  Report r;
  r.metrics["cite.a.map"] = 0.5;
  r.metrics["cite.a.ndcg"] = 0.75;
  CHECK(r.to_json().find("\"cite.a.map\": 0.5") != std::string::npos);
  CHECK(r.to_text().find("0.7500") != std::string::npos);

  const auto dir = std::filesystem::temp_directory_path() / "ncl_eval_files";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "rank.jsonl");
    out << R"({"query":"q","candidates":["a","b"],"relevant":["b"]})" << '\n';
    std::ofstream lab(dir / "lab.jsonl");
    lab << R"({"id":"a","label":"x","split":"train"})" << '\n'
        << R"({"id":"b","label":"y","split":"test"})" << '\n';
    std::ofstream bad(dir / "bad.jsonl");
    bad << R"({"id":"a","label":"x","split":"dev"})" << '\n';
  }
  auto task = read_ranking_task(dir / "rank.jsonl");
  REQUIRE(task.size() == 1);
  CHECK(task[0].relevant.contains("b"));
  auto lab = read_labeled_set(dir / "lab.jsonl");
  CHECK(lab[1].train == false);
  CHECK_THROWS_AS(read_labeled_set(dir / "bad.jsonl"), DataError);
  std::filesystem::remove_all(dir);
}
