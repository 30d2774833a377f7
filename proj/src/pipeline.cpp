#include "ncl/pipeline.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "ncl/errors.hpp"
#include "ncl/fixture.hpp"
#include "ncl/seeding.hpp"

namespace ncl {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::graph_train: return "graph-train";
    case Stage::mine: return "mine";
    case Stage::encode_train: return "encode-train";
    case Stage::eval: return "eval";
    case Stage::all: return "all";
  }
  return "?";
}

Stage parse_stage(std::string_view s) {
  for (Stage st : {Stage::ingest, Stage::graph_train, Stage::mine, Stage::encode_train,
                   Stage::eval, Stage::all}) {
    if (to_string(st) == s) return st;
  }
  throw ArgumentError("unknown stage '" + std::string(s) + "'");
}

fs::path InputPath::resolved() const {
  fs::path p(raw);
  return p.is_absolute() ? p : base / p;
}

// ---- config fields ---------------------------------------------------------

namespace {

std::string fmt(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

template <typename T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) {
    throw ConfigError(key + ": not a number: '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + s + "'");
}

template <typename F>
auto as_config_error(const std::string& key, F f) {
  try {
    return f();
  } catch (const ArgumentError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define NCL_INT(sec, name, member, type)                                                \
  Field{sec, name,                                                                      \
        [](PipelineConfig& c, const std::string& v) {                                   \
          c.member = parse_number<type>(std::string(sec) + "." + name, v);              \
        },                                                                              \
        [](const PipelineConfig& c) { return std::to_string(c.member); }}
#define NCL_REAL(sec, name, member)                                                     \
  Field{sec, name,                                                                      \
        [](PipelineConfig& c, const std::string& v) {                                   \
          c.member = parse_number<double>(std::string(sec) + "." + name, v);            \
        },                                                                              \
        [](const PipelineConfig& c) { return fmt(c.member); }}
#define NCL_BOOL(sec, name, member)                                                     \
  Field{sec, name,                                                                      \
        [](PipelineConfig& c, const std::string& v) {                                   \
          c.member = parse_bool(std::string(sec) + "." + name, v);                      \
        },                                                                              \
        [](const PipelineConfig& c) { return std::string(c.member ? "true" : "false"); }}
#define NCL_ENUM(sec, name, member, parser)                                             \
  Field{sec, name,                                                                      \
        [](PipelineConfig& c, const std::string& v) {                                   \
          c.member = as_config_error(std::string(sec) + "." + name,                     \
                                     [&] { return parser(v); });                        \
        },                                                                              \
        [](const PipelineConfig& c) { return std::string(to_string(c.member)); }}
#define NCL_PATH(name, member)                                                          \
  Field{"paths", name,                                                                  \
        [](PipelineConfig& c, const std::string& v) { c.paths.member.raw = v; },       \
        [](const PipelineConfig& c) { return c.paths.member.raw; }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      NCL_INT("pipeline", "seed", seed, std::uint64_t),
      NCL_PATH("edges", edges),
      NCL_PATH("documents", documents),
      NCL_PATH("exclude", exclude),
      NCL_PATH("queries", queries),
      NCL_INT("graph", "epochs", graph.train.epochs, int),
      NCL_REAL("graph", "margin", graph.train.margin),
      NCL_REAL("graph", "learning_rate", graph.train.learning_rate),
      NCL_INT("graph", "negatives_per_edge", graph.train.negatives_per_edge, int),
      NCL_INT("graph", "dim", graph.train.dim, int),
      NCL_ENUM("graph", "measure", graph.train.measure, parse_measure),
      NCL_BOOL("graph", "undirected", graph.undirected),
      NCL_REAL("graph", "holdout_fraction", graph.holdout_fraction),
      NCL_INT("graph", "eval_negatives", graph.eval_negatives, int),
      NCL_INT("sampling", "k_pos", mine.sampling.k_pos, std::size_t),
      NCL_INT("sampling", "k_hard", mine.sampling.k_hard, std::size_t),
      NCL_INT("sampling", "c_pos", mine.sampling.c_pos, std::size_t),
      NCL_INT("sampling", "c_hard", mine.sampling.c_hard, std::size_t),
      NCL_INT("sampling", "c_easy", mine.sampling.c_easy, std::size_t),
      NCL_REAL("sampling", "t_pos", mine.sampling.t_pos),
      NCL_REAL("sampling", "t_neg", mine.sampling.t_neg),
      NCL_ENUM("sampling", "pos_strategy", mine.sampling.pos_strategy, parse_neighbor_strategy),
      NCL_ENUM("sampling", "hard_strategy", mine.sampling.hard_strategy, parse_neighbor_strategy),
      NCL_ENUM("sampling", "easy_strategy", mine.sampling.easy_strategy, parse_easy_strategy),
      Field{"sampling", "k_filter",
            [](PipelineConfig& c, const std::string& v) {
              if (v.empty() || v == "auto") {
                c.mine.sampling.k_filter.reset();
              } else {
                c.mine.sampling.k_filter = parse_number<std::size_t>("sampling.k_filter", v);
              }
            },
            [](const PipelineConfig& c) {
              const auto& k = c.mine.sampling.k_filter;
              return k ? std::to_string(*k) : std::string("auto");
            }},
      NCL_INT("sampling", "sorted_candidates", mine.sampling.sorted_candidates, std::size_t),
      NCL_ENUM("sampling", "sorted_direction", mine.sampling.sorted_direction,
               parse_sort_direction),
      NCL_REAL("sampling", "subsample", mine.subsample),
      NCL_BOOL("sampling", "by_query", mine.by_query),
      NCL_INT("encoder", "epochs", encoder.train.epochs, int),
      NCL_REAL("encoder", "learning_rate", encoder.train.learning_rate),
      NCL_INT("encoder", "batch_size", encoder.train.batch_size, std::size_t),
      NCL_INT("encoder", "effective_batch", encoder.train.effective_batch, std::size_t),
      NCL_REAL("encoder", "slack", encoder.train.slack),
      NCL_BOOL("encoder", "bias_only", encoder.train.bias_only),
      NCL_INT("encoder", "hidden_dim", encoder.hidden_dim, int),
      NCL_INT("encoder", "out_dim", encoder.out_dim, int),
      NCL_INT("probe", "epochs", probe.epochs, int),
      NCL_REAL("probe", "learning_rate", probe.learning_rate),
      NCL_REAL("probe", "l2", probe.l2),
  };
  return f;
}

#undef NCL_INT
#undef NCL_REAL
#undef NCL_BOOL
#undef NCL_ENUM
#undef NCL_PATH

void set_paths_base(PipelineConfig& c, const fs::path& base) {
  for (InputPath* p : {&c.paths.edges, &c.paths.documents, &c.paths.exclude, &c.paths.queries}) {
    p->base = base;
  }
  for (auto* m : {&c.paths.ranking, &c.paths.classification}) {
    for (auto& [k, p] : *m) p.base = base;
  }
}

}  // namespace

PipelineConfig PipelineConfig::from_ini_string(const std::string& text, const fs::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  PipelineConfig c;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ConfigError("key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      const std::string value = node.data();
      if (section == "ranking" || section == "classification") {
        if (key.find('.') == std::string::npos) {
          throw ConfigError(section + ": task key '" + key + "' must be task.subtask");
        }
        auto& m = section == "ranking" ? c.paths.ranking : c.paths.classification;
        m[key].raw = value;
        continue;
      }
      auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) {
        return f.section == section && f.key == key;
      });
      if (it == fields().end()) throw ConfigError("unknown setting " + section + "." + key);
      it->set(c, value);
    }
  }
  set_paths_base(c, base_dir);
  return c;
}

PipelineConfig PipelineConfig::from_ini(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_ini_string(ss.str(), fs::absolute(path).parent_path());
}

std::string PipelineConfig::canonical() const {
  std::vector<std::string> lines;
  for (const auto& f : fields()) lines.push_back(f.section + "." + f.key + "=" + f.get(*this));
  for (const auto& [k, p] : paths.ranking) lines.push_back("ranking." + k + "=" + p.raw);
  for (const auto& [k, p] : paths.classification) {
    lines.push_back("classification." + k + "=" + p.raw);
  }
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::string PipelineConfig::hash() const { return sha256_hex(canonical()); }

void PipelineConfig::validate(Stage stage) const {
  graph.train.validate();
  if (!(graph.holdout_fraction >= 0.0 && graph.holdout_fraction < 1.0)) {
    throw ConfigError("graph.holdout_fraction must lie in [0, 1)");
  }
  if (graph.eval_negatives < 1) throw ConfigError("graph.eval_negatives must be >= 1");
  mine.sampling.validate();
  if (!(mine.subsample > 0.0 && mine.subsample <= 1.0)) {
    throw ConfigError("sampling.subsample must lie in (0, 1]");
  }
  encoder.train.validate();
  if (encoder.hidden_dim < 1 || encoder.out_dim < 1) {
    throw ConfigError("encoder dimensions must be >= 1");
  }
  if (probe.epochs < 1 || !(probe.learning_rate > 0.0) || probe.l2 < 0.0) {
    throw ConfigError("probe needs epochs >= 1, learning_rate > 0, l2 >= 0");
  }

  auto need = [](const InputPath& p, const std::string& name, bool required) {
    if (p.empty()) {
      if (required) throw ConfigError("paths." + name + " is not set");
      return;
    }
    if (!fs::is_regular_file(p.resolved())) {
      throw ConfigError(name + ": no such file " + p.resolved().string());
    }
  };
  const bool all = stage == Stage::all;
  if (all || stage == Stage::ingest) {
    need(paths.edges, "edges", true);
    need(paths.exclude, "exclude", false);
  }
  if (all || stage == Stage::mine) {
    need(paths.documents, "documents", true);
    need(paths.queries, "queries", false);
  }
  if (all || stage == Stage::encode_train) need(paths.documents, "documents", true);
  if (all || stage == Stage::eval) {
    for (const auto& [k, p] : paths.ranking) need(p, "ranking." + k, true);
    for (const auto& [k, p] : paths.classification) need(p, "classification." + k, true);
  }
}

// ---- hashing ---------------------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

// ---- stages ----------------------------------------------------------------

std::vector<std::string> stage_outputs(Stage stage) {
  switch (stage) {
    case Stage::ingest: return {"graph.tsv", "graph.ids", "ingest.json"};
    case Stage::graph_train:
      return {"graph_embeddings.nbe", "graph_embeddings.ids", "graph_metrics.json"};
    case Stage::mine: return {"triples.tsv", "mining_report.json"};
    case Stage::encode_train:
      return {"encoder.ckpt", "doc_vectors.nbe", "doc_vectors.ids", "encoder_loss.json"};
    case Stage::eval: return {"report.json", "report.txt"};
    case Stage::all: break;
  }
  return {};
}

namespace {

struct StageContext {
  const PipelineConfig& cfg;
  fs::path dir;
  std::ostream* log;
  // role -> sha256, in insertion order
  std::vector<std::pair<std::string, std::string>> inputs;

  void say(const std::string& s) const {
    if (log) *log << s << '\n';
  }
  fs::path upstream(const std::string& name) {
    fs::path p = dir / name;
    if (!fs::is_regular_file(p)) {
      throw DependencyError("missing upstream artifact " + p.string());
    }
    inputs.emplace_back(name, sha256_file(p));
    return p;
  }
  fs::path input(const std::string& role, const InputPath& ip) {
    fs::path p = ip.resolved();
    inputs.emplace_back(role, sha256_file(p));
    return p;
  }
  fs::path out(const std::string& name) const { return dir / name; }
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << s;
}

std::string json_text(const ordered_json& j) { return j.dump(2) + "\n"; }

ordered_json read_json(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

std::uint64_t stage_seed(const PipelineConfig& c, std::string_view key) {
  return derive_seed(c.seed, key);
}

CitationGraph read_graph(const fs::path& edges, const fs::path& ids) {
  CitationGraph g;
  for (const auto& id : read_id_list(ids)) g.ids.intern(id);
  std::ifstream in(edges, std::ios::binary);
  if (!in) throw DataError("cannot open " + edges.string());
  std::string line, a, b;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    if (!(ls >> a >> b)) throw ParseError(edges.string(), lineno, "expected two ids");
    g.edges.push_back({g.ids.index_of(a), g.ids.index_of(b)});
  }
  return g;
}

void run_ingest(StageContext& ctx) {
  const auto& c = ctx.cfg;
  CitationGraph g = ingest_edges(ctx.input("paths.edges", c.paths.edges));
  IngestStats raw = g.stats;
  if (!c.paths.exclude.empty()) {
    const auto ex = read_id_list(ctx.input("paths.exclude", c.paths.exclude));
    g = filter_nodes(g, {ex.begin(), ex.end()});
  }
  if (c.graph.undirected) g = to_undirected(g);
  write_edges(g, ctx.out("graph.tsv"));
  write_id_list(g.ids.ids(), ctx.out("graph.ids"));
  ordered_json j;
  j["lines"] = raw.lines;
  j["duplicates_dropped"] = raw.duplicates_dropped;
  j["self_loops_dropped"] = raw.self_loops_dropped;
  j["excluded"] = g.stats.unknown_excluded;
  j["nodes"] = g.node_count();
  j["edges"] = g.edges.size();
  j["undirected"] = c.graph.undirected;
  write_text(ctx.out("ingest.json"), json_text(j));
  ctx.say("ingest: " + std::to_string(g.node_count()) + " nodes, " +
          std::to_string(g.edges.size()) + " edges (" + std::to_string(raw.duplicates_dropped) +
          " duplicates, " + std::to_string(raw.self_loops_dropped) + " self-loops dropped)");
}

void run_graph_train(StageContext& ctx) {
  const auto& c = ctx.cfg;
  const fs::path edges = ctx.upstream("graph.tsv");
  const fs::path ids = ctx.upstream("graph.ids");
  CitationGraph g = read_graph(edges, ids);
  g.directed = !c.graph.undirected;
  EdgeSplit split = split_edges(g, c.graph.holdout_fraction, stage_seed(c, "split"));

  GraphTrainConfig tc = c.graph.train;
  tc.seed = stage_seed(c, "graph");
  auto table = init_embeddings<float>(static_cast<Index>(g.node_count()),
                                      static_cast<Index>(tc.dim), tc.seed, tc.measure);
  const auto loss = train_graph(table, split.train, tc);

  ordered_json j;
  j["train_edges"] = split.train.edges.size();
  j["holdout_edges"] = split.holdout.size();
  if (!split.holdout.empty()) {
    const auto m = eval_link_prediction(table, split.holdout, c.graph.eval_negatives,
                                        stage_seed(c, "link_eval"));
    j["auc"] = m.auc;
    j["mrr"] = m.mrr;
    j["hits_at_1"] = m.hits_at_1;
    j["hits_at_10"] = m.hits_at_10;
    ctx.say("graph-train: holdout auc " + fmt(m.auc) + ", mrr " + fmt(m.mrr));
  }
  j["epoch_loss"] = loss;
  write_snapshot(table, ctx.out("graph_embeddings.nbe"));
  write_id_list(g.ids.ids(), ctx.out("graph_embeddings.ids"));
  write_text(ctx.out("graph_metrics.json"), json_text(j));
}

void run_mine(StageContext& ctx) {
  const auto& c = ctx.cfg;
  const EmbeddingTable table = read_snapshot(ctx.upstream("graph_embeddings.nbe"));
  const auto node_ids = read_id_list(ctx.upstream("graph_embeddings.ids"));
  if (node_ids.size() != table.rows()) {
    throw DataError("graph_embeddings.ids has " + std::to_string(node_ids.size()) +
                    " ids for " + std::to_string(table.rows()) + " rows");
  }
  IdMap nodes;
  for (const auto& id : node_ids) nodes.intern(id);

  const auto docs = read_documents(ctx.input("paths.documents", c.paths.documents));
  std::vector<PaperId> corpus;
  for (const auto& d : docs) {
    if (nodes.contains(d.id)) corpus.push_back({d.id, nodes.index_of(d.id)});
  }
  if (corpus.empty()) throw DataError("no document has a graph embedding");

  std::vector<PaperId> queries;
  if (c.paths.queries.empty()) {
    queries = corpus;
  } else {
    std::unordered_set<std::string> in_corpus;
    for (const auto& p : corpus) in_corpus.insert(p.external_id);
    for (const auto& id : read_id_list(ctx.input("paths.queries", c.paths.queries))) {
      if (!in_corpus.contains(id)) throw DataError("query '" + id + "' is not in the corpus");
      queries.push_back({id, nodes.index_of(id)});
    }
  }

  SamplingConfig sc = c.mine.sampling;
  sc.seed = stage_seed(c, "mine");
  MiningResult res = mine_triples<float>(queries, table, corpus, sc);
  TripleSet ts = std::move(res.triples);
  if (c.mine.subsample < 1.0) {
    ts = subsample_triples(ts, c.mine.subsample, c.mine.by_query, stage_seed(c, "subsample"));
  }
  if (ts.triples.empty()) throw DataError("no triples mined");
  write_triples(ts, ctx.out("triples.tsv"));

  ordered_json j;
  j["queries"] = res.report.queries;
  j["mined"] = res.report.mined;
  j["partial"] = res.report.partial;
  j["triples"] = ts.triples.size();
  j["sampling_margin"] = sampling_margin(sc);
  ordered_json skipped = ordered_json::array();
  for (const auto& s : res.report.skipped) {
    skipped.push_back({{"query", s.query_id}, {"reason", s.reason}});
  }
  j["skipped"] = skipped;
  j["partial_ids"] = res.report.partial_ids;
  write_text(ctx.out("mining_report.json"), json_text(j));
  ctx.say("mine: " + std::to_string(ts.triples.size()) + " triples from " +
          std::to_string(res.report.mined) + "/" + std::to_string(res.report.queries) +
          " queries, " + std::to_string(res.report.skipped.size()) + " skipped");
}

void run_encode_train(StageContext& ctx) {
  const auto& c = ctx.cfg;
  const auto triples = read_triples(ctx.upstream("triples.tsv"));
  const auto docs = read_documents(ctx.input("paths.documents", c.paths.documents));
  std::unordered_map<std::string, Document> by_id;
  for (const auto& d : docs) by_id.emplace(d.id, d);

  EncoderParams p0 = init_encoder(Vocabulary::build(docs), c.encoder.hidden_dim,
                                  c.encoder.out_dim, stage_seed(c, "encoder_init"));
  EncoderTrainConfig tc = c.encoder.train;
  tc.seed = stage_seed(c, "encoder");
  auto res = train_encoder(p0, triples, by_id, tc);

  write_checkpoint(res.params, ctx.out("encoder.ckpt"));
  write_snapshot(encode_documents(docs, res.params), ctx.out("doc_vectors.nbe"));
  std::vector<std::string> ids;
  for (const auto& d : docs) ids.push_back(d.id);
  write_id_list(ids, ctx.out("doc_vectors.ids"));

  ordered_json j;
  j["triples"] = triples.size();
  j["trainable_parameters"] = trainable_parameter_count(res.params, tc.bias_only);
  j["epoch_loss"] = res.epoch_loss;
  write_text(ctx.out("encoder_loss.json"), json_text(j));
  if (!res.epoch_loss.empty()) {
    ctx.say("encode-train: loss " + fmt(res.epoch_loss.front()) + " -> " +
            fmt(res.epoch_loss.back()));
  }
}

std::unordered_set<std::string> ids_of_task(const RankingTask& task) {
  std::unordered_set<std::string> s;
  for (const auto& q : task) {
    s.insert(q.query);
    s.insert(q.candidates.begin(), q.candidates.end());
  }
  return s;
}

void run_eval(StageContext& ctx) {
  const auto& c = ctx.cfg;
  const EmbeddingTable vectors = read_snapshot(ctx.upstream("doc_vectors.nbe"));
  IdMap ids;
  for (const auto& id : read_id_list(ctx.upstream("doc_vectors.ids"))) ids.intern(id);
  if (ids.size() != vectors.rows()) throw DataError("doc_vectors.ids does not match the table");
  const auto triples = read_triples(ctx.upstream("triples.tsv"));

  Report report;
  const fs::path gm = ctx.dir / "graph_metrics.json";
  if (fs::is_regular_file(gm)) {
    ctx.upstream("graph_metrics.json");
    const auto j = read_json(gm);
    for (const char* k : {"auc", "mrr", "hits_at_1", "hits_at_10"}) {
      if (j.contains(k)) report.metrics[std::string("link_prediction.holdout.") + k] = j[k];
    }
  }

  std::map<std::string, std::unordered_set<std::string>> eval_ids;
  for (const auto& [name, ip] : c.paths.ranking) {
    const RankingTask task = read_ranking_task(ctx.input("ranking." + name, ip));
    const auto lists = rank_by_l2(vectors, ids, task);
    const auto map = mean_average_precision(lists);
    report.metrics[name + ".map"] = map.value;
    report.metrics[name + ".ndcg"] = mean_ndcg(lists).value;
    report.metrics[name + ".p_at_1"] = precision_at_1(lists).value;
    if (map.excluded > 0) {
      ctx.say("eval: " + name + ": " + std::to_string(map.excluded) +
              " queries without relevant candidates excluded from MAP/nDCG");
    }
    eval_ids[name] = ids_of_task(task);
  }
  ProbeConfig pc = c.probe;
  pc.seed = stage_seed(c, "probe");
  for (const auto& [name, ip] : c.paths.classification) {
    const auto data = read_labeled_set(ctx.input("classification." + name, ip));
    const auto probe = linear_probe_f1(vectors, ids, data, pc);
    report.metrics[name + ".macro_f1"] = probe.macro_f1;
    const auto sep = label_separation(vectors, ids, data);
    report.metrics[name + ".intra_l2"] = sep.intra;
    report.metrics[name + ".inter_l2"] = sep.inter;
    auto& s = eval_ids[name];
    for (const auto& it : data) s.insert(it.id);
  }

  std::unordered_set<std::string> train_ids;
  for (const auto& t : triples) {
    train_ids.insert(t.query.external_id);
    train_ids.insert(t.positive.external_id);
    train_ids.insert(t.negative.external_id);
  }
  const auto overlap = overlap_report(train_ids, eval_ids);
  for (const auto& row : overlap.rows) {
    report.metrics["leakage." + row.split + ".overlap"] = static_cast<double>(row.overlap);
    report.metrics["leakage." + row.split + ".percent"] = row.percent;
  }

  write_text(ctx.out("report.json"), report.to_json());
  write_text(ctx.out("report.txt"),
             report.to_text() + "\ntraining/evaluation overlap\n" + format_overlap(overlap));
  ctx.say("eval: " + std::to_string(report.metrics.size()) + " metrics");
}

StageResult run_one(Stage stage, const PipelineConfig& cfg, const fs::path& dir,
                    std::ostream* log) {
  StageContext ctx{cfg, dir, log, {}};
  switch (stage) {
    case Stage::ingest: run_ingest(ctx); break;
    case Stage::graph_train: run_graph_train(ctx); break;
    case Stage::mine: run_mine(ctx); break;
    case Stage::encode_train: run_encode_train(ctx); break;
    case Stage::eval: run_eval(ctx); break;
    case Stage::all: throw ArgumentError("run_one: 'all' is not a single stage");
  }
  StageResult r{stage, stage_outputs(stage)};
  ordered_json prov;
  prov["stage"] = to_string(stage);
  prov["config_sha256"] = cfg.hash();
  prov["seed"] = cfg.seed;
  ordered_json in = ordered_json::object();
  for (const auto& [k, v] : ctx.inputs) in[k] = v;
  prov["inputs"] = in;
  ordered_json out = ordered_json::object();
  for (const auto& name : r.artifacts) out[name] = sha256_file(dir / name);
  prov["outputs"] = out;
  prov["config"] = cfg.canonical();
  const std::string sidecar = std::string(to_string(stage)) + ".provenance.json";
  write_text(dir / sidecar, json_text(prov));
  r.artifacts.push_back(sidecar);
  return r;
}

}  // namespace

std::vector<StageResult> run(Stage stage, const PipelineConfig& cfg, const fs::path& stage_dir,
                             std::ostream* log) {
  cfg.validate(stage);
  fs::create_directories(stage_dir);
  std::vector<StageResult> out;
  if (stage != Stage::all) {
    out.push_back(run_one(stage, cfg, stage_dir, log));
    return out;
  }
  for (Stage s : {Stage::ingest, Stage::graph_train, Stage::mine, Stage::encode_train,
                  Stage::eval}) {
    out.push_back(run_one(s, cfg, stage_dir, log));
  }
  return out;
}

void write_fixture_bundle(const fs::path& dir, std::uint64_t seed) {
  FixtureSpec spec;
  spec.graph.seed = seed;
  write_fixture(make_fixture(spec), dir);
  // small k so the bands fit in 200 nodes
  write_text(dir / "pipeline.ini",
             "[pipeline]\n"
             "seed = " + std::to_string(seed) + "\n"
             "\n"
             "[paths]\n"
             "edges = edges.tsv\n"
             "documents = documents.jsonl\n"
             "\n"
             "[ranking]\n"
             "cite.fixture = ranking.jsonl\n"
             "\n"
             "[classification]\n"
             "topic.fixture = labels.jsonl\n"
             "\n"
             "[graph]\n"
             "epochs = 20\n"
             "margin = 0.15\n"
             "learning_rate = 0.1\n"
             "negatives_per_edge = 10\n"
             "dim = 32\n"
             "measure = dot\n"
             "undirected = true\n"
             "holdout_fraction = 0.05\n"
             "eval_negatives = 100\n"
             "\n"
             "[sampling]\n"
             "k_pos = 10\n"
             "c_pos = 5\n"
             "k_hard = 120\n"
             "c_hard = 2\n"
             "c_easy = 3\n"
             "easy_strategy = filtered_random\n"
             "\n"
             "[encoder]\n"
             "epochs = 5\n"
             "learning_rate = 0.05\n"
             "batch_size = 8\n"
             "effective_batch = 32\n"
             "slack = 1.0\n"
             "hidden_dim = 64\n"
             "out_dim = 32\n");
}

}  // namespace ncl
