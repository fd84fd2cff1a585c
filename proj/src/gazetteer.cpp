#include "geoprofile/gazetteer.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <unordered_set>

#include "geoprofile/binary_io.hpp"
#include "geoprofile/checksum.hpp"
#include "geoprofile/error.hpp"
#include "geoprofile/text.hpp"

namespace geoprofile {

// BK-tree over the distinct normalized keys, built on first fuzzy query.
struct GazetteerIndex::FuzzyIndex {
  struct Node {
    std::uint32_t key = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> children;  // distance -> node
  };

  std::vector<std::u32string> keys;
  std::vector<Node> nodes;

  explicit FuzzyIndex(std::span<const std::string> sorted_keys) {
    keys.reserve(sorted_keys.size());
    for (const auto& k : sorted_keys) keys.push_back(to_u32(k));
    nodes.reserve(keys.size());
    for (std::uint32_t i = 0; i < keys.size(); ++i) insert(i);
  }

  void insert(std::uint32_t key) {
    if (nodes.empty()) {
      nodes.push_back(Node{key, {}});
      return;
    }
    std::uint32_t at = 0;
    for (;;) {
      const auto d = static_cast<std::uint32_t>(levenshtein(keys[key], keys[nodes[at].key]));
      auto& children = nodes[at].children;
      const auto it = std::find_if(children.begin(), children.end(), [d](const auto& c) { return c.first == d; });
      if (it == children.end()) {
        children.emplace_back(d, static_cast<std::uint32_t>(nodes.size()));
        nodes.push_back(Node{key, {}});
        return;
      }
      at = it->second;
    }
  }

  // Keys within `radius` of `query`, as (key index, distance).
  std::vector<std::pair<std::uint32_t, std::size_t>> within(std::u32string_view query, std::size_t radius) const {
    std::vector<std::pair<std::uint32_t, std::size_t>> out;
    if (nodes.empty()) return out;
    std::vector<std::uint32_t> stack{0};
    while (!stack.empty()) {
      const auto& node = nodes[stack.back()];
      stack.pop_back();
      const std::size_t d = levenshtein(query, keys[node.key]);
      if (d <= radius) out.emplace_back(node.key, d);
      for (const auto& [edge, child] : node.children) {
        if (edge + radius >= d && edge <= d + radius) stack.push_back(child);
      }
    }
    return out;
  }
};

namespace {

constexpr std::uint32_t kCacheMagic = 0x5A475047;  // "GPGZ"
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
bool parse_number(std::string_view field, T& out) {
  field = trim(field);
  if (field.empty()) return false;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

bool valid_country_code(std::string_view code) {
  return code.size() == 2 && code[0] >= 'A' && code[0] <= 'Z' && code[1] >= 'A' && code[1] <= 'Z';
}

// Returns false for malformed rows.
bool parse_row(std::string_view line, GazetteerEntry& e) {
  const auto f = split_tabs(line);
  if (f.size() < 15) return false;
  if (!parse_number(f[0], e.id)) return false;
  e.name = std::string(trim(f[1]));
  if (normalize_name(e.name).empty()) return false;
  e.ascii_name = std::string(trim(f[2]));
  e.alternate_names.clear();
  std::size_t start = 0;
  const std::string_view alternates = f[3];
  while (start <= alternates.size()) {
    const auto comma = std::min(alternates.find(',', start), alternates.size());
    const auto alt = trim(alternates.substr(start, comma - start));
    if (!alt.empty()) e.alternate_names.emplace_back(alt);
    start = comma + 1;
  }
  if (!parse_number(f[4], e.latitude) || !parse_number(f[5], e.longitude)) return false;
  const auto fclass = trim(f[6]);
  if (fclass.size() > 1) return false;
  e.feature_class = fclass.empty() ? ' ' : fclass[0];
  e.feature_code = std::string(trim(f[7]));
  e.country_code = std::string(trim(f[8]));
  if (!valid_country_code(e.country_code)) return false;
  e.admin1 = std::string(trim(f[10]));
  const auto pop = trim(f[14]);
  if (pop.empty()) {
    e.population = 0;
  } else if (!parse_number(pop, e.population)) {
    return false;
  }
  return true;
}

bool tier_order(const Candidate& a, const Candidate& b) {
  if (a.tier != b.tier) return a.tier == MatchTier::kExact;
  if (a.distance != b.distance) return a.distance < b.distance;
  if (a.entry->population != b.entry->population) return a.entry->population > b.entry->population;
  const int pa = feature_class_priority(a.entry->feature_class);
  const int pb = feature_class_priority(b.entry->feature_class);
  if (pa != pb) return pa < pb;
  return a.entry->id < b.entry->id;
}

}  // namespace

int feature_class_priority(char feature_class) {
  if (feature_class == 'P') return 0;
  if (feature_class == 'A') return 1;
  return 2;
}

GazetteerIndex::GazetteerIndex(GazetteerIndex&&) noexcept = default;
GazetteerIndex& GazetteerIndex::operator=(GazetteerIndex&&) noexcept = default;
GazetteerIndex::~GazetteerIndex() = default;

GazetteerIndex GazetteerIndex::build(std::vector<GazetteerEntry> entries, BuildInfo info) {
  GazetteerIndex index;
  index.entries_ = std::move(entries);
  index.info_ = std::move(info);
  index.info_.stats.entries = index.entries_.size();

  std::map<std::string, std::vector<std::uint32_t>> postings;
  for (std::uint32_t i = 0; i < index.entries_.size(); ++i) {
    const auto& e = index.entries_[i];
    const auto add = [&](std::string_view variant) {
      auto key = normalize_name(variant);
      if (key.empty()) return;
      auto& list = postings[std::move(key)];
      if (list.empty() || list.back() != i) list.push_back(i);
    };
    add(e.name);
    add(e.ascii_name);
    for (const auto& alt : e.alternate_names) add(alt);
  }

  index.keys_.reserve(postings.size());
  index.key_offsets_.reserve(postings.size() + 1);
  index.key_offsets_.push_back(0);
  for (auto& [key, list] : postings) {
    index.keys_.push_back(key);
    index.key_postings_.insert(index.key_postings_.end(), list.begin(), list.end());
    index.key_offsets_.push_back(static_cast<std::uint32_t>(index.key_postings_.size()));
  }
  index.key_lookup_.reserve(index.keys_.size());
  for (std::uint32_t i = 0; i < index.keys_.size(); ++i) index.key_lookup_.emplace(index.keys_[i], i);
  index.fuzzy_once_ = std::make_unique<std::once_flag>();
  return index;
}

std::span<const std::uint32_t> GazetteerIndex::key_entries(std::size_t key_index) const {
  const auto begin = key_offsets_[key_index];
  const auto end = key_offsets_[key_index + 1];
  return std::span<const std::uint32_t>(key_postings_).subspan(begin, end - begin);
}

std::span<const std::uint32_t> GazetteerIndex::lookup(std::string_view normalized_key) const {
  const auto it = key_lookup_.find(normalized_key);
  if (it == key_lookup_.end()) return {};
  return key_entries(it->second);
}

const GazetteerIndex::FuzzyIndex& GazetteerIndex::fuzzy() const {
  std::call_once(*fuzzy_once_, [this] { fuzzy_ = std::make_unique<FuzzyIndex>(keys_); });
  return *fuzzy_;
}

std::vector<Candidate> GazetteerIndex::retrieve_topk(std::string_view mention, std::size_t k) const {
  if (k == 0) throw ParameterError("retrieve_topk: k must be positive");
  const std::string key = normalize_name(mention);
  std::vector<Candidate> ranked;
  if (key.empty()) return ranked;

  const auto exact = lookup(key);
  for (const auto pos : exact) ranked.push_back(Candidate{&entries_[pos], MatchTier::kExact, 0, 1.0});

  const std::size_t length = codepoint_length(key);
  const std::size_t radius = length / 4;
  if (ranked.size() < k && radius > 0) {
    const std::unordered_set<std::uint32_t> exact_set(exact.begin(), exact.end());
    std::map<std::uint32_t, std::size_t> best;  // entry -> closest distance
    for (const auto& [key_index, d] : fuzzy().within(to_u32(key), radius)) {
      if (d == 0) continue;
      for (const auto pos : key_entries(key_index)) {
        if (exact_set.contains(pos)) continue;
        auto [it, inserted] = best.emplace(pos, d);
        if (!inserted) it->second = std::min(it->second, d);
      }
    }
    for (const auto& [pos, d] : best) {
      const double score = 1.0 - static_cast<double>(d) / static_cast<double>(length);
      ranked.push_back(Candidate{&entries_[pos], MatchTier::kFuzzy, d, score});
    }
  }

  std::sort(ranked.begin(), ranked.end(), tier_order);
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

namespace {

GazetteerIndex parse_gazetteer(std::istream& in, const LoadOptions& options, std::string checksum) {
  std::vector<GazetteerEntry> entries;
  LoadStats stats;
  std::string line;
  GazetteerEntry entry;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.starts_with('#')) continue;
    ++stats.rows;
    if (!parse_row(line, entry)) {
      ++stats.skipped;
      continue;
    }
    if (entry.population < options.min_population) {
      ++stats.filtered;
      continue;
    }
    entries.push_back(entry);
  }
  if (in.bad()) throw IoError("error reading gazetteer stream");
  if (entries.empty()) {
    throw EmptyGazetteerError("gazetteer has no valid rows (" + std::to_string(stats.rows) + " read, " +
                              std::to_string(stats.skipped) + " skipped, " + std::to_string(stats.filtered) +
                              " filtered)");
  }
  return GazetteerIndex::build(std::move(entries), {std::move(checksum), stats});
}

}  // namespace

GazetteerIndex load_gazetteer(std::istream& in, const LoadOptions& options) {
  return parse_gazetteer(in, options, "");
}

GazetteerIndex load_gazetteer_file(const std::filesystem::path& path, const LoadOptions& options) {
  auto checksum = sha256_file(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read gazetteer " + path.string());
  return parse_gazetteer(in, options, std::move(checksum));
}

void write_index_cache(const GazetteerIndex& index, const LoadOptions& options, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    binary::Writer w(out);
    w.u32(kCacheMagic);
    w.u32(kCacheVersion);
    w.str(index.build_info().source_checksum);
    w.u64(options.min_population);
    const auto& s = index.build_info().stats;
    w.u64(s.rows);
    w.u64(s.skipped);
    w.u64(s.filtered);
    w.u64(index.entries().size());
    for (const auto& e : index.entries()) {
      w.i64(e.id);
      w.str(e.name);
      w.str(e.ascii_name);
      w.u32(static_cast<std::uint32_t>(e.alternate_names.size()));
      for (const auto& alt : e.alternate_names) w.str(alt);
      w.f64(e.latitude);
      w.f64(e.longitude);
      w.u8(static_cast<std::uint8_t>(e.feature_class));
      w.str(e.feature_code);
      w.str(e.country_code);
      w.u64(e.population);
      w.str(e.admin1);
    }
    if (!out) throw IoError("error writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::optional<GazetteerIndex> read_index_cache(const std::filesystem::path& path, const std::string& checksum,
                                               const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    binary::Reader r(in);
    if (r.u32() != kCacheMagic || r.u32() != kCacheVersion) return std::nullopt;
    GazetteerIndex::BuildInfo info;
    info.source_checksum = r.str();
    if (info.source_checksum != checksum || r.u64() != options.min_population) return std::nullopt;
    info.stats.rows = r.u64();
    info.stats.skipped = r.u64();
    info.stats.filtered = r.u64();
    const auto n = r.u64();
    std::vector<GazetteerEntry> entries(n);
    for (auto& e : entries) {
      e.id = r.i64();
      e.name = r.str();
      e.ascii_name = r.str();
      e.alternate_names.resize(r.u32());
      for (auto& alt : e.alternate_names) alt = r.str();
      e.latitude = r.f64();
      e.longitude = r.f64();
      e.feature_class = static_cast<char>(r.u8());
      e.feature_code = r.str();
      e.country_code = r.str();
      e.population = r.u64();
      e.admin1 = r.str();
    }
    return GazetteerIndex::build(std::move(entries), std::move(info));
  } catch (const FormatError&) {
    return std::nullopt;
  }
}

}  // namespace

CacheResult load_or_build_index(const std::filesystem::path& source, const std::filesystem::path& cache,
                                const LoadOptions& options) {
  const auto checksum = sha256_file(source);
  if (std::filesystem::exists(cache)) {
    if (auto cached = read_index_cache(cache, checksum, options)) return {std::move(*cached), true};
  }
  auto index = load_gazetteer_file(source, options);
  write_index_cache(index, options, cache);
  return {std::move(index), false};
}

}  // namespace geoprofile
