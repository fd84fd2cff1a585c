#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "geoprofile/countries.hpp"
#include "geoprofile/gazetteer.hpp"
#include "geoprofile/providers.hpp"
#include "geoprofile/token_matcher.hpp"

namespace geoprofile {

enum class Method { kStringMatch, kZeroShot, kErp, kIcl };

std::string_view to_string(Method m);  // "string_match", "zero_shot", "erp", "icl"
Method method_from_string(std::string_view s);

enum class MentionSource { kStringMatch, kProvider };

struct LocationMention {
  std::string text;
  // Byte range in the caption. For provider mentions this is the first
  // occurrence of `text`, or an empty range at 0 when the reply is not a
  // substring of the caption.
  std::size_t begin = 0;
  std::size_t end = 0;
  MentionSource source = MentionSource::kStringMatch;
};

enum PredictionFlag : std::uint32_t {
  kFlagUnrecognized = 1u << 0,   // provider reply not a known country
  kFlagProviderError = 1u << 1,  // no usable reply; not a country decision
  kFlagVagueRegion = 1u << 2,    // reply named a continent or region
  kFlagTranslated = 1u << 3,     // caption went through the translator
  kFlagUnmapped = 1u << 4,       // gazetteer country code missing from the country table
};

// Flag names in bit order, as written to prediction files.
std::vector<std::string> flag_names(std::uint32_t flags);
std::uint32_t flag_from_name(std::string_view name);

struct CountryPrediction {
  const CanonicalCountry* country = nullptr;  // nullptr = NoCountry (or provider error)
  // ISO code of a gazetteer country missing from the country table; set only
  // together with kFlagUnmapped.
  std::string unmapped_code;
  std::optional<LocationMention> mention;
  std::vector<Candidate> candidates;
  Method method = Method::kStringMatch;
  std::optional<std::string> provider_raw;
  std::uint32_t flags = 0;
  std::string error;  // provider failure message

  bool provider_error() const { return (flags & kFlagProviderError) != 0; }
  bool has_country() const { return country != nullptr; }
};

struct CaptionRecord {
  std::string id;
  std::string caption;
  std::string entity;
  std::string language = "en";
  std::optional<std::string> image_ref;
  std::optional<std::uint64_t> embedding_row;
};

// Produces location mentions from a caption. The string matcher and the
// provider extractor ship; other extractors (an NER backend) can be added.
class MentionExtractor {
 public:
  virtual ~MentionExtractor() = default;
  virtual std::vector<LocationMention> extract(std::string_view caption) const = 0;
};

// Multi-pattern matcher over every normalized gazetteer key of 1 to 4
// tokens. Single-token keys on the stop-list are never matched.
class StringMatcher : public MentionExtractor {
 public:
  static constexpr std::size_t kMaxTokens = 4;

  StringMatcher(const GazetteerIndex& index, const std::unordered_set<std::string>& stop_words);
  // Uses the shipped list of the 1,000 most common English words.
  explicit StringMatcher(const GazetteerIndex& index);

  // Non-overlapping matches chosen longest first, then leftmost; returned in
  // caption order.
  std::vector<LocationMention> extract(std::string_view caption) const override;

  std::size_t pattern_count() const { return matcher_.pattern_count(); }

 private:
  TokenMatcher matcher_;
};

const std::unordered_set<std::string>& builtin_stop_words();

std::vector<LocationMention> extract_string_match(std::string_view caption, const StringMatcher& matcher);

// First mention, resolved through the top-ranked gazetteer candidate.
CountryPrediction geolocate_string_match(std::string_view caption, const GazetteerIndex& index,
                                         const StringMatcher& matcher,
                                         const CountryTable& countries = CountryTable::builtin());

// Primary location per the extract prompt, or nullopt for "no" and blank
// captions. Provider failures propagate as ProviderError.
std::optional<std::string> extract_via_provider(std::string_view caption, TextCompletionProvider& provider);

// `location -> country` lines for the predict prompt.
std::string format_candidates(const std::vector<Candidate>& candidates, const CountryTable& countries);

// Retrieves the top 10 candidates for `mention` and asks the provider to pick
// the country. Provider failures propagate as ProviderError.
CountryPrediction predict_country_erp(std::string_view caption, std::string_view mention,
                                      const GazetteerIndex& index, TextCompletionProvider& provider,
                                      const CountryTable& countries = CountryTable::builtin());

struct IclExample {
  std::string text;
  std::string country;  // empty = no country
};

std::vector<IclExample> load_icl_examples(const std::filesystem::path& path);
std::string format_icl_examples(const std::vector<IclExample>& examples);

struct GeolocateConfig {
  Method method = Method::kStringMatch;
  const GazetteerIndex* index = nullptr;
  const StringMatcher* matcher = nullptr;  // required for string_match
  const CountryTable* countries = nullptr;  // defaults to the builtin table
  std::shared_ptr<TextCompletionProvider> provider;  // required for provider methods
  std::shared_ptr<Translator> translator;            // optional; used for non-English records
  std::string icl_examples;                          // rendered exemplar block for icl
};

// Runs the configured method. Never throws for provider failures: those
// become predictions flagged provider_error.
CountryPrediction geolocate_caption(const CaptionRecord& record, const GeolocateConfig& config);

}  // namespace geoprofile
