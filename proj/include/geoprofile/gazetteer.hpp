#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace geoprofile {

// One GeoNames record.
struct GazetteerEntry {
  std::int64_t id = 0;
  std::string name;
  std::string ascii_name;
  std::vector<std::string> alternate_names;
  double latitude = 0.0;
  double longitude = 0.0;
  char feature_class = ' ';  // P populated place, A administrative, ...
  std::string feature_code;
  std::string country_code;  // ISO-3166 alpha-2
  std::uint64_t population = 0;
  std::string admin1;

  bool operator==(const GazetteerEntry&) const = default;
};

struct LoadOptions {
  // Entries below this population are dropped (counted as filtered, not
  // skipped).
  std::uint64_t min_population = 0;
};

struct LoadStats {
  std::size_t rows = 0;      // non-blank lines read
  std::size_t entries = 0;   // kept
  std::size_t skipped = 0;   // malformed rows
  std::size_t filtered = 0;  // below min_population
};

enum class MatchTier { kExact, kFuzzy };

struct Candidate {
  const GazetteerEntry* entry = nullptr;
  MatchTier tier = MatchTier::kExact;
  std::size_t distance = 0;  // edit distance of the closest name variant
  double score = 1.0;        // 1 - distance / mention length
};

// Immutable place index over normalized name variants (name, ascii name and
// every alternate name). Safe for concurrent readers.
class GazetteerIndex {
 public:
  struct BuildInfo {
    std::string source_checksum;  // empty when built from memory
    LoadStats stats;
  };

  static GazetteerIndex build(std::vector<GazetteerEntry> entries, BuildInfo info = {});

  GazetteerIndex(GazetteerIndex&&) noexcept;
  GazetteerIndex& operator=(GazetteerIndex&&) noexcept;
  ~GazetteerIndex();

  std::span<const GazetteerEntry> entries() const { return entries_; }
  const BuildInfo& build_info() const { return info_; }

  // Entry positions whose name variants normalize to `normalized_key`,
  // ascending.
  std::span<const std::uint32_t> lookup(std::string_view normalized_key) const;

  // Every distinct normalized key, sorted.
  std::span<const std::string> keys() const { return keys_; }
  // Entry positions for keys()[i].
  std::span<const std::uint32_t> key_entries(std::size_t key_index) const;

  // Ranked candidates for a mention. Exact normalized matches come first,
  // then fuzzy matches whose edit distance is at most a quarter of the
  // mention's length, by ascending distance. Inside a tier: population
  // descending, feature class P before A before others, id ascending.
  std::vector<Candidate> retrieve_topk(std::string_view mention, std::size_t k) const;

 private:
  struct FuzzyIndex;

  GazetteerIndex() = default;
  const FuzzyIndex& fuzzy() const;

  std::vector<GazetteerEntry> entries_;
  std::vector<std::string> keys_;
  std::vector<std::uint32_t> key_offsets_;  // CSR over key_postings_
  std::vector<std::uint32_t> key_postings_;
  std::unordered_map<std::string_view, std::uint32_t> key_lookup_;
  BuildInfo info_;

  mutable std::unique_ptr<std::once_flag> fuzzy_once_;
  mutable std::unique_ptr<FuzzyIndex> fuzzy_;
};

// Parses a GeoNames allCountries-layout stream: tab-separated, at least 15
// fields, alternate names comma-separated in field 4, population in field 15.
// Malformed rows and rows without a valid country code are skipped and
// counted. Throws EmptyGazetteerError when no row survives.
GazetteerIndex load_gazetteer(std::istream& in, const LoadOptions& options = {});
// Also records the file checksum. Throws IoError when unreadable.
GazetteerIndex load_gazetteer_file(const std::filesystem::path& path, const LoadOptions& options = {});

// Feature-class rank used for tie-breaking: P=0, A=1, others=2.
int feature_class_priority(char feature_class);

// Binary index cache: magic, format version, source checksum, load options,
// stats and the entries. The name index is rebuilt on load.
void write_index_cache(const GazetteerIndex& index, const LoadOptions& options,
                       const std::filesystem::path& path);

struct CacheResult {
  GazetteerIndex index;
  bool reused = false;  // true when the cache matched the source checksum
};

// Loads `cache` when it exists, has the current format version, and its
// recorded checksum and options match `source`; otherwise parses `source`
// and rewrites the cache.
CacheResult load_or_build_index(const std::filesystem::path& source, const std::filesystem::path& cache,
                                const LoadOptions& options = {});

}  // namespace geoprofile
