#include "ncl/graph_embed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ncl/errors.hpp"
#include "ncl/seeding.hpp"

namespace ncl {

void GraphTrainConfig::validate(bool allow_frozen) const {
  if (epochs < 1) throw ConfigError("graph: epochs must be >= 1");
  if (!(margin > 0.0)) throw ConfigError("graph: margin must be > 0");
  if (!(learning_rate > 0.0) && !(allow_frozen && learning_rate == 0.0)) {
    throw ConfigError("graph: learning_rate must be > 0");
  }
  if (negatives_per_edge < 1) throw ConfigError("graph: negatives_per_edge must be >= 1");
  if (dim < 1) throw ConfigError("graph: dim must be >= 1");
}

namespace {

using Vec = Eigen::RowVectorXd;

/// Partial derivatives of score(a, b) with respect to a and b.
template <typename RowA, typename RowB>
std::pair<Vec, Vec> score_partials(const RowA& a_row, const RowB& b_row, Measure m) {
  Vec a = a_row.template cast<double>();
  Vec b = b_row.template cast<double>();
  if (m == Measure::dot) return {b, a};
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return {Vec::Zero(a.size()), Vec::Zero(b.size())};
  const double c = a.dot(b) / (na * nb);
  Vec da = b / (na * nb) - c * a / (na * na);
  Vec db = a / (na * nb) - c * b / (nb * nb);
  return {std::move(da), std::move(db)};
}

void check_edge(Index rows, Edge e) {
  if (e.src >= rows || e.dst >= rows) {
    throw ArgumentError("edge endpoint out of range for a table of " + std::to_string(rows) +
                        " rows");
  }
}

Index draw_corrupt(Rng& rng, Index n, Index avoid) {
  std::uniform_int_distribution<Index> pick(0, n - 2);
  const Index x = pick(rng);
  return x >= avoid ? x + 1 : x;
}

}  // namespace

template <typename Scalar>
BasicEmbeddingTable<Scalar> init_embeddings(Index node_count, Index dim, std::uint64_t seed,
                                            Measure measure) {
  if (node_count == 0 || dim == 0) {
    throw ArgumentError("init_embeddings needs node_count >= 1 and dim >= 1");
  }
  Rng rng(derive_seed(seed, "init_embeddings"));
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  BasicEmbeddingTable<Scalar> t;
  t.measure = measure;
  t.values.resize(node_count, dim);
  for (Eigen::Index i = 0; i < t.values.size(); ++i) {
    t.values.data()[i] = static_cast<Scalar>(gauss(rng));
  }
  return t;
}

template <typename Scalar>
double pair_hinge_loss(const BasicEmbeddingTable<Scalar>& t, Edge pos, Index corrupt_dst,
                       double margin) {
  return std::max(0.0, margin - score_rows(t, pos.src, pos.dst) +
                           score_rows(t, pos.src, corrupt_dst));
}

template <typename Scalar>
RowMatrix<double> pair_hinge_gradient(const BasicEmbeddingTable<Scalar>& t, Edge pos,
                                      Index corrupt_dst, double margin) {
  RowMatrix<double> grad = RowMatrix<double>::Zero(t.rows(), t.dim());
  if (pair_hinge_loss(t, pos, corrupt_dst, margin) <= 0.0) return grad;
  auto [ps, pd] = score_partials(t.row(pos.src), t.row(pos.dst), t.measure);
  auto [ns, nd] = score_partials(t.row(pos.src), t.row(corrupt_dst), t.measure);
  grad.row(pos.src) += ns - ps;
  grad.row(pos.dst) -= pd;
  grad.row(corrupt_dst) += nd;
  return grad;
}

template <typename Scalar>
double train_epoch(BasicEmbeddingTable<Scalar>& t, const CitationGraph& g,
                   const GraphTrainConfig& cfg, int epoch) {
  if (g.edges.empty()) throw ArgumentError("train_epoch: graph has no edges");
  if (t.rows() < 2) throw ArgumentError("train_epoch: need at least 2 nodes to corrupt edges");
  if (t.rows() < g.node_count()) throw ArgumentError("train_epoch: table smaller than graph");
  cfg.validate(/*allow_frozen=*/true);

  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
  std::vector<std::size_t> order(g.edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const auto negs = static_cast<std::size_t>(cfg.negatives_per_edge);
  std::vector<Index> corrupt(negs);
  RowMatrix<double> step(2 + negs, t.dim());
  double total = 0.0;

  for (std::size_t idx : order) {
    const Edge e = g.edges[idx];
    check_edge(t.rows(), e);
    for (auto& c : corrupt) c = draw_corrupt(rng, t.rows(), e.dst);

    const double pos_score = score_rows(t, e.src, e.dst);
    const auto [ps, pd] = score_partials(t.row(e.src), t.row(e.dst), t.measure);
    step.setZero();
    bool active = false;
    for (std::size_t b = 0; b < negs; ++b) {
      const double loss = std::max(0.0, cfg.margin - pos_score + score_rows(t, e.src, corrupt[b]));
      total += loss;
      if (loss <= 0.0) continue;
      active = true;
      auto [ns, nd] = score_partials(t.row(e.src), t.row(corrupt[b]), t.measure);
      step.row(0) += ns - ps;
      step.row(1) -= pd;
      step.row(2 + b) += nd;
    }
    if (!active || cfg.learning_rate == 0.0) continue;
    step /= static_cast<double>(negs);
    t.values.row(e.src) -= (cfg.learning_rate * step.row(0)).template cast<Scalar>();
    t.values.row(e.dst) -= (cfg.learning_rate * step.row(1)).template cast<Scalar>();
    for (std::size_t b = 0; b < negs; ++b) {
      t.values.row(corrupt[b]) -= (cfg.learning_rate * step.row(2 + b)).template cast<Scalar>();
    }
  }
  return total / static_cast<double>(g.edges.size() * negs);
}

template <typename Scalar>
std::vector<double> train_graph(BasicEmbeddingTable<Scalar>& t, const CitationGraph& g,
                                const GraphTrainConfig& cfg) {
  cfg.validate();
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int e = 0; e < cfg.epochs; ++e) trace.push_back(train_epoch(t, g, cfg, e));
  return trace;
}

double pooled_auc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) {
    throw ArgumentError("pooled_auc needs at least one positive and one negative score");
  }
  std::vector<double> neg(negative.begin(), negative.end());
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double p : positive) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(lo, neg.end(), p);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(positive.size()) * static_cast<double>(neg.size()));
}

template <typename Scalar>
LinkPredMetrics eval_link_prediction(const BasicEmbeddingTable<Scalar>& t,
                                     std::span<const Edge> holdout, int negatives_per_edge,
                                     std::uint64_t seed) {
  if (holdout.empty()) throw ArgumentError("eval_link_prediction: empty holdout");
  if (negatives_per_edge < 1) throw ArgumentError("eval_link_prediction: negatives_per_edge < 1");
  if (t.rows() < 2) throw ArgumentError("eval_link_prediction: need at least 2 nodes");

  const auto negs = static_cast<std::size_t>(negatives_per_edge);
  std::vector<double> pos_scores;
  std::vector<double> neg_scores;
  pos_scores.reserve(holdout.size());
  neg_scores.reserve(holdout.size() * negs);
  double rr = 0.0;
  std::size_t hit1 = 0;
  std::size_t hit10 = 0;

  for (std::size_t i = 0; i < holdout.size(); ++i) {
    const Edge e = holdout[i];
    check_edge(t.rows(), e);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const double s = score_rows(t, e.src, e.dst);
    pos_scores.push_back(s);
    std::size_t rank = 1;
    for (std::size_t b = 0; b < negs; ++b) {
      const Index c = draw_corrupt(rng, t.rows(), e.dst);
      const double sc = score_rows(t, e.src, c);
      neg_scores.push_back(sc);
      if (sc > s || (sc == s && c < e.dst)) ++rank;
    }
    rr += 1.0 / static_cast<double>(rank);
    hit1 += rank <= 1;
    hit10 += rank <= 10;
  }

  const auto n = static_cast<double>(holdout.size());
  LinkPredMetrics m;
  m.mrr = rr / n;
  m.hits_at_1 = static_cast<double>(hit1) / n;
  m.hits_at_10 = static_cast<double>(hit10) / n;
  m.auc = pooled_auc(pos_scores, neg_scores);
  return m;
}

#define NCL_INSTANTIATE(S)                                                                   \
  template BasicEmbeddingTable<S> init_embeddings<S>(Index, Index, std::uint64_t, Measure); \
  template double pair_hinge_loss<S>(const BasicEmbeddingTable<S>&, Edge, Index, double);   \
  template RowMatrix<double> pair_hinge_gradient<S>(const BasicEmbeddingTable<S>&, Edge,    \
                                                    Index, double);                         \
  template double train_epoch<S>(BasicEmbeddingTable<S>&, const CitationGraph&,             \
                                 const GraphTrainConfig&, int);                             \
  template std::vector<double> train_graph<S>(BasicEmbeddingTable<S>&, const CitationGraph&, \
                                              const GraphTrainConfig&);                     \
  template LinkPredMetrics eval_link_prediction<S>(const BasicEmbeddingTable<S>&,           \
                                                   std::span<const Edge>, int, std::uint64_t);

NCL_INSTANTIATE(float)
NCL_INSTANTIATE(double)

#undef NCL_INSTANTIATE

}  // namespace ncl
