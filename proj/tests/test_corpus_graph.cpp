#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "ncl/corpus_graph.hpp"
#include "ncl/errors.hpp"

using namespace ncl;
namespace fs = std::filesystem;

namespace {

std::vector<std::pair<std::string, std::string>> named_edges(const CitationGraph& g) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : g.edges) out.emplace_back(g.ids.id_of(e.src), g.ids.id_of(e.dst));
  return out;
}

CitationGraph chain(std::size_t m) {
  std::string text;
  for (std::size_t i = 0; i < m; ++i) {
    text += "n" + std::to_string(i) + " n" + std::to_string(i + 1) + "\n";
  }
  return ingest_edges_from_string(text);
}

}  // namespace

TEST_CASE("ingest: two lines, three nodes") {
  auto g = ingest_edges_from_string("a b\nb c\n");
  CHECK(g.node_count() == 3);
  CHECK(g.edges.size() == 2);
  CHECK(g.ids.index_of("a") == 0);
  CHECK(g.ids.index_of("c") == 2);
}

TEST_CASE("ingest: duplicate edge dropped and counted") {
  auto g = ingest_edges_from_string("a b\na b\n");
  CHECK(g.node_count() == 2);
  CHECK(g.edges.size() == 1);
  CHECK(g.stats.duplicates_dropped == 1);
}

TEST_CASE("ingest: self loop dropped, node kept") {
  auto g = ingest_edges_from_string("a a\n");
  CHECK(g.node_count() == 1);
  CHECK(g.edges.empty());
  CHECK(g.stats.self_loops_dropped == 1);
}

TEST_CASE("ingest: tabs, blank lines and CRLF") {
  auto g = ingest_edges_from_string("a\tb\r\n\n  b   c  \n");
  CHECK(g.edges.size() == 2);
}

TEST_CASE("ingest: malformed line names its number") {
  try {
    ingest_edges_from_string("a b\nb\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(ingest_edges_from_string("a b c\n"), ParseError);
}

TEST_CASE("ingest: empty input") {
  CHECK_THROWS_AS(ingest_edges_from_string(""), DataError);
  CHECK_THROWS_AS(ingest_edges_from_string("\n\n"), DataError);
}

TEST_CASE("ingest: file round trip") {
  const fs::path dir = fs::temp_directory_path() / "ncl_test_corpus";
  fs::create_directories(dir);
  auto g = ingest_edges_from_string("x y\ny z\nz x\n");
  write_edges(g, dir / "e.tsv");
  auto h = ingest_edges(dir / "e.tsv");
  CHECK(named_edges(h) == named_edges(g));
  CHECK_THROWS_AS(ingest_edges(dir / "missing.tsv"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("filter: cut vertex leaves two isolated nodes") {
  auto g = ingest_edges_from_string("a b\nb c\n");
  auto f = filter_nodes(g, {"b"});
  CHECK(f.node_count() == 2);
  CHECK(f.edges.empty());
  CHECK(f.ids.contains("a"));
  CHECK(f.ids.contains("c"));
  CHECK_FALSE(f.ids.contains("b"));
}

TEST_CASE("filter: empty exclude is identity") {
  auto g = ingest_edges_from_string("a b\nb c\nc a\n");
  auto f = filter_nodes(g, {});
  CHECK(f.ids.ids() == g.ids.ids());
  CHECK(f.edges == g.edges);
}

TEST_CASE("filter: unknown ids are counted, indices dense") {
  auto g = ingest_edges_from_string("a b\nb c\nc d\n");
  auto f = filter_nodes(g, {"a", "zzz"});
  CHECK(f.stats.unknown_excluded == 1);
  CHECK(f.node_count() == 3);
  for (const auto& e : f.edges) {
    CHECK(e.src < f.node_count());
    CHECK(e.dst < f.node_count());
  }
  CHECK(named_edges(f) == std::vector<std::pair<std::string, std::string>>{{"b", "c"}, {"c", "d"}});
}

TEST_CASE("to_undirected: single edge gains its reverse") {
  auto g = ingest_edges_from_string("a b\n");
  auto u = to_undirected(g);
  CHECK(u.edges == std::vector<Edge>{{0, 1}, {1, 0}});
  CHECK_FALSE(u.directed);
}

TEST_CASE("to_undirected: symmetric input unchanged") {
  auto g = ingest_edges_from_string("a b\nb a\n");
  auto u = to_undirected(g);
  CHECK(u.edges == std::vector<Edge>{{0, 1}, {1, 0}});
}

TEST_CASE("to_undirected: no edges") {
  auto g = filter_nodes(ingest_edges_from_string("a b\n"), {"b"});
  CHECK(to_undirected(g).edges.empty());
}

TEST_CASE("split: 100 edges at 1%") {
  auto g = chain(100);
  auto s = split_edges(g, 0.01, 3);
  CHECK(s.train.edges.size() == 99);
  CHECK(s.holdout.size() == 1);
  CHECK(s.train.node_count() == g.node_count());
}

TEST_CASE("split: fraction 0 keeps everything") {
  auto g = chain(10);
  auto s = split_edges(g, 0.0, 3);
  CHECK(s.train.edges == g.edges);
  CHECK(s.holdout.empty());
}

TEST_CASE("split: deterministic per seed") {
  auto g = chain(50);
  auto a = split_edges(g, 0.2, 11);
  auto b = split_edges(g, 0.2, 11);
  CHECK(a.holdout == b.holdout);
  CHECK(a.train.edges == b.train.edges);
}

TEST_CASE("split: argument checks") {
  auto g = chain(10);
  CHECK_THROWS_AS(split_edges(g, 1.0, 0), ArgumentError);
  CHECK_THROWS_AS(split_edges(g, -0.1, 0), ArgumentError);
  // 10 * 0.05 rounds down to zero held-out edges
  CHECK_THROWS_AS(split_edges(g, 0.05, 0), ArgumentError);
}

TEST_CASE("documents: jsonl round trip and validation") {
  const fs::path dir = fs::temp_directory_path() / "ncl_test_docs";
  fs::create_directories(dir);
  std::vector<Document> docs = {{"d1", "Title one", "abs"}, {"d2", "Title two", ""}};
  write_documents(docs, dir / "d.jsonl");
  auto back = read_documents(dir / "d.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[1].id == "d2");
  CHECK(back[1].abstract.empty());

  {
    std::ofstream out(dir / "dup.jsonl");
    out << R"({"id":"a","title":"t","abstract":""})" << '\n'
        << R"({"id":"a","title":"u","abstract":""})" << '\n';
  }
  CHECK_THROWS_AS(read_documents(dir / "dup.jsonl"), DataError);
  {
    std::ofstream out(dir / "notitle.jsonl");
    out << R"({"id":"a","title":"","abstract":"x"})" << '\n';
  }
  CHECK_THROWS_AS(read_documents(dir / "notitle.jsonl"), DataError);
  fs::remove_all(dir);
}
