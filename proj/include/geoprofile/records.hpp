#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>

#include "geoprofile/geolocate.hpp"

namespace geoprofile {

// True when the normalized tokens of `entity` occur contiguously among the
// normalized tokens of `caption`.
bool caption_contains_entity(std::string_view caption, std::string_view entity);

// Streams caption records from JSON lines
// (`id, caption, entity, language, image_ref?, embedding_row?`) or
// tab-separated `id<TAB>entity<TAB>caption` lines; the format is chosen per
// line by whether it starts with '{'. Records with an empty caption, or whose
// caption does not contain their entity, are rejected and counted.
class CaptionReader {
 public:
  struct Stats {
    std::size_t lines = 0;
    std::size_t accepted = 0;
    std::size_t malformed = 0;
    std::size_t empty_caption = 0;
    std::size_t entity_missing = 0;
  };

  explicit CaptionReader(std::istream& in, std::string source_name = "<captions>");

  // Next accepted record, or nullopt at end of input.
  std::optional<CaptionRecord> next();
  const Stats& stats() const { return stats_; }

 private:
  std::istream& in_;
  std::string source_;
  Stats stats_;
};

// Parses one input line. Throws FormatError on a malformed line.
CaptionRecord parse_caption_line(std::string_view line);

// `{"id","country","method","mention"?,"flags"}` on one line, no trailing
// newline. Keys are written in that fixed order.
std::string prediction_to_json(std::string_view id, const CountryPrediction& p);

struct PredictionLine {
  std::string id;
  std::optional<std::string> country;
  Method method = Method::kStringMatch;
  std::optional<std::string> mention;
  std::uint32_t flags = 0;
};

PredictionLine parse_prediction_line(std::string_view line);

}  // namespace geoprofile
