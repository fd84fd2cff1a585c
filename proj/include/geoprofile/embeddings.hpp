#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <span>
#include <vector>

namespace geoprofile {

// Row-major float matrix as stored on disk.
struct EmbeddingMatrix {
  std::uint64_t rows = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;

  std::span<const float> row(std::uint64_t i) const { return {data.data() + i * dim, dim}; }
};

// Little-endian layout: "GPEM" | version u32 | N u64 | d u32 | N*d f32.
inline constexpr char kEmbeddingMagic[4] = {'G', 'P', 'E', 'M'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

// Random row access without loading the whole file. Thread-safe.
class EmbeddingFile {
 public:
  explicit EmbeddingFile(const std::filesystem::path& path);

  std::uint64_t rows() const { return rows_; }
  std::uint32_t dim() const { return dim_; }

  // Throws LookupError when `row` is out of range.
  std::vector<float> read_row(std::uint64_t row) const;

 private:
  mutable std::mutex mu_;
  mutable std::ifstream in_;
  std::uint64_t rows_ = 0;
  std::uint32_t dim_ = 0;
};

}  // namespace geoprofile
