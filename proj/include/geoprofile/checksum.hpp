#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace geoprofile {

// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

// Streams the file through SHA-256. Throws IoError when unreadable.
std::string sha256_file(const std::filesystem::path& path);

// Incremental hashing for composite keys.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  std::string hex_digest();

 private:
  void* ctx_;
};

}  // namespace geoprofile
