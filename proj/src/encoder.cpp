#include "ncl/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "ncl/seeding.hpp"

namespace ncl {

Vocabulary::Vocabulary()
    : tokens_{std::string(kUnkToken), std::string(kSepToken)},
      ids_{{std::string(kUnkToken), unk}, {std::string(kSepToken), sep}} {}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  for (auto& t : tokens) {
    if (v.ids_.contains(t)) continue;
    v.ids_.emplace(t, static_cast<Index>(v.tokens_.size()));
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

Vocabulary Vocabulary::build(std::span<const Document> docs) {
  std::set<std::string> seen;
  for (const auto& d : docs) {
    for (auto& t : tokenize(d)) {
      if (t != kSepToken) seen.insert(std::move(t));
    }
  }
  return from_tokens({seen.begin(), seen.end()});
}

Index Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? unk : it->second;
}

namespace {

void append_words(std::string_view text, std::vector<std::string>& out) {
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
}

void backprop_document(const EncoderParams& p, std::span<const Index> ids,
                       const Eigen::RowVectorXd& mean, const Eigen::RowVectorXd& g,
                       double weight, EncoderGradient& grad, bool bias_only) {
  grad.bias += weight * g;
  if (bias_only) return;
  grad.projection.noalias() += weight * mean.transpose() * g;
  const Eigen::RowVectorXd dmean =
      (weight / static_cast<double>(ids.size())) * (g * p.projection.transpose());
  for (Index id : ids) grad.token_table.row(id) += dmean;
}

Eigen::RowVectorXd mean_pool(std::span<const Index> ids, const EncoderParams& p) {
  if (ids.empty()) throw ArgumentError("encode: empty token sequence");
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(p.hidden_dim());
  for (Index id : ids) {
    if (id >= p.token_table.rows()) throw ArgumentError("encode: token id out of range");
    mean += p.token_table.row(id);
  }
  return mean / static_cast<double>(ids.size());
}

double loss_with_gradient(const EncoderParams& p, const TokenizedTriple& t, double slack,
                          EncoderGradient* grad, double weight, bool bias_only) {
  const Eigen::RowVectorXd mq = mean_pool(t.query, p);
  const Eigen::RowVectorXd mp = mean_pool(t.positive, p);
  const Eigen::RowVectorXd mn = mean_pool(t.negative, p);
  const Eigen::RowVectorXd q = mq * p.projection + p.bias;
  const Eigen::RowVectorXd pos = mp * p.projection + p.bias;
  const Eigen::RowVectorXd neg = mn * p.projection + p.bias;
  const Eigen::RowVectorXd dp = q - pos;
  const Eigen::RowVectorXd dn = q - neg;
  const double a = dp.norm();
  const double b = dn.norm();
  const double loss = a - b + slack;
  if (loss <= 0.0) return 0.0;
  if (grad != nullptr) {
    const Eigen::RowVectorXd up = a > 0.0 ? Eigen::RowVectorXd(dp / a)
                                          : Eigen::RowVectorXd::Zero(dp.size());
    const Eigen::RowVectorXd un = b > 0.0 ? Eigen::RowVectorXd(dn / b)
                                          : Eigen::RowVectorXd::Zero(dn.size());
    backprop_document(p, t.query, mq, up - un, weight, *grad, bias_only);
    backprop_document(p, t.positive, mp, -up, weight, *grad, bias_only);
    backprop_document(p, t.negative, mn, un, weight, *grad, bias_only);
  }
  return loss;
}

void apply_step(EncoderParams& p, const EncoderGradient& g, double scale, bool bias_only) {
  p.bias -= scale * g.bias;
  if (bias_only) return;
  p.projection -= scale * g.projection;
  p.token_table -= scale * g.token_table;
}

}  // namespace

std::vector<std::string> tokenize(const Document& d) {
  std::vector<std::string> out;
  append_words(d.title, out);
  out.emplace_back(kSepToken);
  append_words(d.abstract, out);
  return out;
}

std::vector<Index> token_ids(const Document& d, const Vocabulary& vocab) {
  std::vector<Index> ids;
  for (const auto& t : tokenize(d)) ids.push_back(t == kSepToken ? Vocabulary::sep : vocab.id(t));
  return ids;
}

EncoderParams init_encoder(Vocabulary vocab, Eigen::Index hidden_dim, Eigen::Index out_dim,
                           std::uint64_t seed) {
  if (hidden_dim < 1 || out_dim < 1) throw ArgumentError("init_encoder: dims must be >= 1");
  Rng rng(derive_seed(seed, "init_encoder"));
  std::normal_distribution<double> tok(0.0, 1.0);
  std::normal_distribution<double> proj(0.0, 1.0 / std::sqrt(static_cast<double>(hidden_dim)));
  EncoderParams p;
  p.token_table.resize(static_cast<Eigen::Index>(vocab.size()), hidden_dim);
  for (Eigen::Index i = 0; i < p.token_table.size(); ++i) p.token_table.data()[i] = tok(rng);
  p.projection.resize(hidden_dim, out_dim);
  for (Eigen::Index i = 0; i < p.projection.size(); ++i) p.projection.data()[i] = proj(rng);
  p.bias = Eigen::RowVectorXd::Zero(out_dim);
  p.vocab = std::move(vocab);
  return p;
}

Eigen::RowVectorXd encode(std::span<const Index> ids, const EncoderParams& p) {
  return mean_pool(ids, p) * p.projection + p.bias;
}

Eigen::RowVectorXd encode(const Document& d, const EncoderParams& p) {
  return encode(token_ids(d, p.vocab), p);
}

EncoderGradient EncoderGradient::zeros_like(const EncoderParams& p) {
  return {Eigen::MatrixXd::Zero(p.token_table.rows(), p.token_table.cols()),
          Eigen::MatrixXd::Zero(p.projection.rows(), p.projection.cols()),
          Eigen::RowVectorXd::Zero(p.bias.size())};
}

void EncoderGradient::set_zero() {
  token_table.setZero();
  projection.setZero();
  bias.setZero();
}

double triple_loss_and_gradient(const EncoderParams& p, const TokenizedTriple& t, double slack,
                                EncoderGradient* grad, double weight) {
  return loss_with_gradient(p, t, slack, grad, weight, false);
}

void EncoderTrainConfig::validate(bool allow_frozen) const {
  if (epochs < 1) throw ConfigError("encoder: epochs must be >= 1");
  if (!(learning_rate > 0.0) && !(allow_frozen && learning_rate == 0.0)) {
    throw ConfigError("encoder: learning_rate must be > 0");
  }
  if (batch_size < 1) throw ConfigError("encoder: batch_size must be >= 1");
  if (effective_batch < batch_size || effective_batch % batch_size != 0) {
    throw ConfigError("encoder: effective_batch must be a positive multiple of batch_size");
  }
  if (!(slack >= 0.0)) throw ConfigError("encoder: slack must be >= 0");
}

EncoderTrainResult train_encoder(const EncoderParams& p0, std::span<const Triple> triples,
                                 const std::unordered_map<std::string, Document>& docs,
                                 const EncoderTrainConfig& cfg) {
  cfg.validate(/*allow_frozen=*/true);
  std::unordered_map<std::string, std::vector<Index>> cache;
  auto tokens_of = [&](const PaperId& id) -> const std::vector<Index>& {
    auto it = cache.find(id.external_id);
    if (it != cache.end()) return it->second;
    auto d = docs.find(id.external_id);
    if (d == docs.end()) throw DataError("no document for paper '" + id.external_id + "'");
    return cache.emplace(id.external_id, token_ids(d->second, p0.vocab)).first->second;
  };
  std::vector<TokenizedTriple> data;
  data.reserve(triples.size());
  for (const auto& t : triples) {
    data.push_back({tokens_of(t.query), tokens_of(t.positive), tokens_of(t.negative)});
  }

  EncoderTrainResult out{p0, {}};
  if (data.empty()) throw DataError("train_encoder: no triples");
  EncoderGradient grad = EncoderGradient::zeros_like(p0);
  std::vector<std::size_t> order(data.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double total = 0.0;
    std::size_t pending = 0;
    auto flush = [&] {
      if (pending == 0) return;
      if (cfg.learning_rate != 0.0) {
        apply_step(out.params, grad, cfg.learning_rate / static_cast<double>(pending),
                   cfg.bias_only);
      }
      grad.set_zero();
      pending = 0;
    };
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        total += loss_with_gradient(out.params, data[order[i]], cfg.slack, &grad, 1.0,
                                    cfg.bias_only);
      }
      pending += end - start;
      if (pending >= cfg.effective_batch) flush();
    }
    flush();
    out.epoch_loss.push_back(total / static_cast<double>(data.size()));
  }
  return out;
}

std::size_t trainable_parameter_count(const EncoderParams& p, bool bias_only) {
  const auto bias = static_cast<std::size_t>(p.bias.size());
  if (bias_only) return bias;
  return bias + static_cast<std::size_t>(p.projection.size() + p.token_table.size());
}

double grad_check(const EncoderParams& p, const Document& query, const Document& positive,
                  const Document& negative, double slack, double eps, bool bias_only) {
  const TokenizedTriple t{token_ids(query, p.vocab), token_ids(positive, p.vocab),
                          token_ids(negative, p.vocab)};
  constexpr double kKinkGuard = 1e-4;
  {
    const auto q = encode(t.query, p);
    const double a = (q - encode(t.positive, p)).norm();
    const double b = (q - encode(t.negative, p)).norm();
    if (a - b + slack < kKinkGuard || a < kKinkGuard || b < kKinkGuard) {
      throw ArgumentError("grad_check: fixture sits at a kink of the loss");
    }
  }
  EncoderGradient analytic = EncoderGradient::zeros_like(p);
  loss_with_gradient(p, t, slack, &analytic, 1.0, bias_only);

  EncoderParams probe = p;
  double worst = 0.0;
  auto check = [&](double& param, double a) {
    const double saved = param;
    param = saved + eps;
    const double up = loss_with_gradient(probe, t, slack, nullptr, 1.0, false);
    param = saved - eps;
    const double down = loss_with_gradient(probe, t, slack, nullptr, 1.0, false);
    param = saved;
    if (up == 0.0 || down == 0.0) {
      throw ArgumentError("grad_check: finite-difference step crosses the hinge");
    }
    const double fd = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(a), std::abs(fd), kKinkGuard});
    worst = std::max(worst, std::abs(a - fd) / denom);
  };
  for (Eigen::Index i = 0; i < probe.bias.size(); ++i) check(probe.bias[i], analytic.bias[i]);
  if (!bias_only) {
    for (Eigen::Index i = 0; i < probe.projection.size(); ++i) {
      check(probe.projection.data()[i], analytic.projection.data()[i]);
    }
    for (Eigen::Index i = 0; i < probe.token_table.size(); ++i) {
      check(probe.token_table.data()[i], analytic.token_table.data()[i]);
    }
  }
  return worst;
}

EmbeddingTable encode_documents(std::span<const Document> docs, const EncoderParams& p) {
  EmbeddingTable t;
  t.measure = Measure::dot;
  t.values.resize(static_cast<Eigen::Index>(docs.size()), p.out_dim());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    t.values.row(static_cast<Eigen::Index>(i)) = encode(docs[i], p).cast<float>();
  }
  return t;
}

void write_checkpoint(const EncoderParams& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  EmbeddingTable tokens;
  tokens.values = p.token_table.cast<float>();
  write_snapshot(tokens, out);
  io::put_u32(out, static_cast<std::uint32_t>(p.out_dim()));
  const RowMatrix<float> proj = p.projection.cast<float>();
  for (Eigen::Index i = 0; i < proj.size(); ++i) io::put_f32(out, proj.data()[i]);
  for (Eigen::Index i = 0; i < p.bias.size(); ++i) io::put_f32(out, static_cast<float>(p.bias[i]));
  io::put_u32(out, static_cast<std::uint32_t>(p.vocab.size()));
  for (const auto& tok : p.vocab.tokens()) {
    io::put_u32(out, static_cast<std::uint32_t>(tok.size()));
    out.write(tok.data(), static_cast<std::streamsize>(tok.size()));
  }
}

EncoderParams read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string src = path.string();
  const EmbeddingTable tokens = read_snapshot(in, src);
  const auto out_dim = io::get_u32(in, src);
  const auto h = tokens.dim();
  RowMatrix<float> proj(h, out_dim);
  for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = io::get_f32(in, src);
  Eigen::RowVectorXd bias(out_dim);
  for (Eigen::Index i = 0; i < bias.size(); ++i) bias[i] = io::get_f32(in, src);
  const auto count = io::get_u32(in, src);
  if (count != tokens.rows()) throw DataError(src + ": vocabulary size mismatch");
  std::vector<std::string> words;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = io::get_u32(in, src);
    std::string w(len, '\0');
    if (!in.read(w.data(), len)) throw DataError(src + ": truncated vocabulary");
    words.push_back(std::move(w));
  }
  if (count < 2 || words[0] != kUnkToken || words[1] != kSepToken) {
    throw DataError(src + ": vocabulary lacks reserved tokens");
  }
  EncoderParams p;
  p.vocab = Vocabulary::from_tokens({words.begin() + 2, words.end()});
  p.token_table = tokens.values.cast<double>();
  p.projection = proj.cast<double>();
  p.bias = std::move(bias);
  return p;
}

}  // namespace ncl
