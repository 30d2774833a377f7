#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>

#include <Eigen/Dense>

#include "ncl/corpus_graph.hpp"
#include "ncl/errors.hpp"

namespace ncl {

enum class Measure : std::uint8_t { dot = 0, cosine = 1 };

Measure parse_measure(std::string_view name);
std::string_view to_string(Measure m);

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One row per node. Under cosine the stored rows stay unnormalized; scoring
/// normalizes at query time.
template <typename Scalar>
struct BasicEmbeddingTable {
  RowMatrix<Scalar> values;
  Measure measure = Measure::dot;

  Index rows() const noexcept { return static_cast<Index>(values.rows()); }
  Index dim() const noexcept { return static_cast<Index>(values.cols()); }

  auto row(Index i) const { return values.row(i); }

  template <typename Other>
  BasicEmbeddingTable<Other> cast() const {
    return {values.template cast<Other>(), measure};
  }
};

using EmbeddingTable = BasicEmbeddingTable<float>;
using EmbeddingTabled = BasicEmbeddingTable<double>;

/// <a,b> / (|a||b|), or 0 when either side is the zero vector.
template <typename DerivedA, typename DerivedB>
double cosine(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  const double na = a.template cast<double>().norm();
  const double nb = b.template cast<double>().norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.template cast<double>().dot(b.template cast<double>()) / (na * nb);
}

/// Similarity of two rows under the table's measure, evaluated in double.
template <typename Scalar>
double score_rows(const BasicEmbeddingTable<Scalar>& t, Index a, Index b) {
  if (a >= t.rows() || b >= t.rows()) {
    throw ArgumentError("node index out of range (" + std::to_string(std::max(a, b)) +
                        " >= " + std::to_string(t.rows()) + ")");
  }
  if (t.measure == Measure::cosine) return cosine(t.row(a), t.row(b));
  return t.row(a).template cast<double>().dot(t.row(b).template cast<double>());
}

/// Binary snapshot: magic `NBE1`, u32 rows, u32 dim, u8 measure, then
/// row-major little-endian float32 values.
void write_snapshot(const EmbeddingTable& t, std::ostream& out);
void write_snapshot(const EmbeddingTable& t, const std::filesystem::path& path);
EmbeddingTable read_snapshot(std::istream& in, const std::string& source = "<stream>");
EmbeddingTable read_snapshot(const std::filesystem::path& path);

namespace io {
void put_u32(std::ostream& out, std::uint32_t v);
void put_u8(std::ostream& out, std::uint8_t v);
void put_f32(std::ostream& out, float v);
std::uint32_t get_u32(std::istream& in, const std::string& source);
std::uint8_t get_u8(std::istream& in, const std::string& source);
float get_f32(std::istream& in, const std::string& source);
}  // namespace io

}  // namespace ncl
