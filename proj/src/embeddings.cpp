#include "geoprofile/embeddings.hpp"

#include <cstring>

#include "geoprofile/binary_io.hpp"
#include "geoprofile/error.hpp"

namespace geoprofile {
namespace {

constexpr std::uint64_t kHeaderBytes = 4 + 4 + 8 + 4;

void read_header(std::istream& in, const std::filesystem::path& path, std::uint64_t& rows, std::uint32_t& dim) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kEmbeddingMagic, 4) != 0) {
    throw FormatError(path.string() + " is not an embedding file");
  }
  binary::Reader r(in);
  const auto version = r.u32();
  if (version != kEmbeddingVersion) {
    throw FormatError(path.string() + ": unsupported embedding file version " + std::to_string(version));
  }
  rows = r.u64();
  dim = r.u32();
  if (dim == 0) throw FormatError(path.string() + ": zero embedding dimension");
}

}  // namespace

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  if (m.data.size() != m.rows * m.dim) throw DimensionError("embedding matrix size does not match rows * dim");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kEmbeddingMagic, 4);
  binary::Writer w(out);
  w.u32(kEmbeddingVersion);
  w.u64(m.rows);
  w.u32(m.dim);
  for (const float v : m.data) w.f32(v);
  if (!out) throw IoError("write failed for " + path.string());
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  EmbeddingMatrix m;
  read_header(in, path, m.rows, m.dim);
  const std::uint64_t n = m.rows * m.dim;
  const auto expected = kHeaderBytes + n * 4;
  if (std::filesystem::file_size(path) < expected) throw FormatError(path.string() + ": truncated embedding data");
  m.data.resize(n);
  binary::Reader r(in);
  for (auto& v : m.data) v = r.f32();
  return m;
}

EmbeddingFile::EmbeddingFile(const std::filesystem::path& path) : in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open " + path.string());
  read_header(in_, path, rows_, dim_);
  if (std::filesystem::file_size(path) < kHeaderBytes + rows_ * dim_ * 4) {
    throw FormatError(path.string() + ": truncated embedding data");
  }
}

std::vector<float> EmbeddingFile::read_row(std::uint64_t row) const {
  if (row >= rows_) throw LookupError("embedding row " + std::to_string(row) + " out of range");
  std::vector<float> out(dim_);
  std::lock_guard lock(mu_);
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(kHeaderBytes + row * dim_ * 4));
  binary::Reader r(in_);
  for (auto& v : out) v = r.f32();
  return out;
}

}  // namespace geoprofile
