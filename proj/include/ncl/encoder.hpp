#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "ncl/corpus_graph.hpp"
#include "ncl/embedding.hpp"
#include "ncl/errors.hpp"
#include "ncl/triple_miner.hpp"

namespace ncl {

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kSepToken = "<sep>";

class Vocabulary {
 public:
  static constexpr Index unk = 0;
  static constexpr Index sep = 1;

  Vocabulary();
  /// Every token of the documents (min frequency 1), sorted, after the two
  /// reserved entries.
  static Vocabulary build(std::span<const Document> docs);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  Index id(const std::string& token) const;
  const std::string& token(Index i) const { return tokens_.at(i); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Index> ids_;
};

/// Lowercased title tokens, the separator, then abstract tokens. Any byte
/// that is not alphanumeric (ASCII) or part of a UTF-8 sequence splits tokens.
std::vector<std::string> tokenize(const Document& d);
std::vector<Index> token_ids(const Document& d, const Vocabulary& vocab);

/// Mean-pooled token embeddings followed by an affine projection.
struct EncoderParams {
  Vocabulary vocab;
  Eigen::MatrixXd token_table;     // V x h
  Eigen::MatrixXd projection;      // h x out
  Eigen::RowVectorXd bias;         // out

  Eigen::Index hidden_dim() const noexcept { return token_table.cols(); }
  Eigen::Index out_dim() const noexcept { return projection.cols(); }
};

EncoderParams init_encoder(Vocabulary vocab, Eigen::Index hidden_dim, Eigen::Index out_dim,
                           std::uint64_t seed);

Eigen::RowVectorXd encode(std::span<const Index> ids, const EncoderParams& p);
Eigen::RowVectorXd encode(const Document& d, const EncoderParams& p);

/// max(|q - p|_2 - |q - n|_2 + slack, 0).
template <typename DQ, typename DP, typename DN>
double triplet_loss(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DP>& p,
                    const Eigen::MatrixBase<DN>& n, double slack) {
  if (q.size() != p.size() || q.size() != n.size()) {
    throw ArgumentError("triplet_loss: dimension mismatch");
  }
  return std::max((q - p).norm() - (q - n).norm() + slack, 0.0);
}

struct EncoderGradient {
  Eigen::MatrixXd token_table;
  Eigen::MatrixXd projection;
  Eigen::RowVectorXd bias;

  static EncoderGradient zeros_like(const EncoderParams& p);
  void set_zero();
};

struct TokenizedTriple {
  std::vector<Index> query;
  std::vector<Index> positive;
  std::vector<Index> negative;
};

/// Loss of one triple; when `grad` is given, adds weight * dLoss/dparams.
/// The subgradient is zero on the flat side of the hinge and for any
/// distance term whose norm is zero.
double triple_loss_and_gradient(const EncoderParams& p, const TokenizedTriple& t, double slack,
                                EncoderGradient* grad = nullptr, double weight = 1.0);

struct EncoderTrainConfig {
  int epochs = 2;
  double learning_rate = 0.05;
  std::size_t batch_size = 8;
  std::size_t effective_batch = 32;
  double slack = 1.0;
  bool bias_only = false;
  std::uint64_t seed = 0;

  /// Throws ConfigError. `allow_frozen` admits learning_rate == 0.
  void validate(bool allow_frozen = false) const;
};

struct EncoderTrainResult {
  EncoderParams params;
  std::vector<double> epoch_loss;
};

/// Minibatch SGD on the mean triplet loss. Each epoch visits the triples in a
/// seeded shuffled order; micro-batches of batch_size accumulate until
/// effective_batch triples, then one step is taken. With bias_only only the
/// projection bias moves.
EncoderTrainResult train_encoder(const EncoderParams& p0, std::span<const Triple> triples,
                                 const std::unordered_map<std::string, Document>& docs,
                                 const EncoderTrainConfig& cfg);

/// Number of parameters that train_encoder updates.
std::size_t trainable_parameter_count(const EncoderParams& p, bool bias_only);

/// Largest per-component relative error between the analytic gradient and
/// central differences with step eps. Components smaller than 1e-4 in both
/// estimates are compared against that floor. Throws ArgumentError when the
/// point sits at or next to a kink.
double grad_check(const EncoderParams& p, const Document& query, const Document& positive,
                  const Document& negative, double slack, double eps = 1e-6,
                  bool bias_only = false);

/// Rows follow `docs` order.
EmbeddingTable encode_documents(std::span<const Document> docs, const EncoderParams& p);

/// NBE1 header and token table, followed by out_dim, the projection, the bias
/// and the vocabulary as u32-length-prefixed UTF-8 strings.
void write_checkpoint(const EncoderParams& p, const std::filesystem::path& path);
EncoderParams read_checkpoint(const std::filesystem::path& path);

}  // namespace ncl
