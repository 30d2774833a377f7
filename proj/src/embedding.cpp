#include "ncl/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace ncl {

Measure parse_measure(std::string_view name) {
  if (name == "dot") return Measure::dot;
  if (name == "cosine" || name == "cos") return Measure::cosine;
  throw ArgumentError("unknown measure '" + std::string(name) + "'");
}

std::string_view to_string(Measure m) { return m == Measure::dot ? "dot" : "cosine"; }

namespace io {

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::istream& in, const std::string& source) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError(source + ": truncated snapshot");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

std::uint8_t get_u8(std::istream& in, const std::string& source) {
  char c;
  if (!in.get(c)) throw DataError(source + ": truncated snapshot");
  return static_cast<std::uint8_t>(c);
}

float get_f32(std::istream& in, const std::string& source) {
  return std::bit_cast<float>(get_u32(in, source));
}

}  // namespace io

void write_snapshot(const EmbeddingTable& t, std::ostream& out) {
  out.write("NBE1", 4);
  io::put_u32(out, t.rows());
  io::put_u32(out, t.dim());
  io::put_u8(out, static_cast<std::uint8_t>(t.measure));
  for (Eigen::Index i = 0; i < t.values.size(); ++i) io::put_f32(out, t.values.data()[i]);
}

void write_snapshot(const EmbeddingTable& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_snapshot(t, out);
}

EmbeddingTable read_snapshot(std::istream& in, const std::string& source) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "NBE1", 4) != 0) {
    throw DataError(source + ": not an NBE1 snapshot");
  }
  const auto rows = io::get_u32(in, source);
  const auto dim = io::get_u32(in, source);
  const auto code = io::get_u8(in, source);
  if (code > 1) throw DataError(source + ": unknown measure code " + std::to_string(code));
  EmbeddingTable t;
  t.measure = static_cast<Measure>(code);
  t.values.resize(rows, dim);
  for (Eigen::Index i = 0; i < t.values.size(); ++i) {
    const float v = io::get_f32(in, source);
    if (!std::isfinite(v)) throw DataError(source + ": non-finite embedding entry");
    t.values.data()[i] = v;
  }
  return t;
}

EmbeddingTable read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_snapshot(in, path.string());
}

}  // namespace ncl
