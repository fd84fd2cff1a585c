#include "geoprofile/records.hpp"

#include <algorithm>

#include <json.hpp>

#include "geoprofile/error.hpp"
#include "geoprofile/text.hpp"

namespace geoprofile {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

bool caption_contains_entity(std::string_view caption, std::string_view entity) {
  const auto needle = tokenize(entity);
  if (needle.empty()) return true;
  const auto hay = tokenize(caption);
  if (hay.size() < needle.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < needle.size() && match; ++j) match = hay[i + j].text == needle[j].text;
    if (match) return true;
  }
  return false;
}

CaptionRecord parse_caption_line(std::string_view line) {
  CaptionRecord r;
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (!trim(line).empty() && trim(line).front() == '{') {
    json j;
    try {
      j = json::parse(line);
      const auto& id = j.at("id");
      r.id = id.is_string() ? id.get<std::string>() : id.dump();
      r.caption = j.at("caption").get<std::string>();
      if (j.contains("entity") && !j["entity"].is_null()) r.entity = j["entity"].get<std::string>();
      if (j.contains("language") && !j["language"].is_null()) r.language = j["language"].get<std::string>();
      if (j.contains("image_ref") && !j["image_ref"].is_null()) r.image_ref = j["image_ref"].get<std::string>();
      if (j.contains("embedding_row") && !j["embedding_row"].is_null()) {
        r.embedding_row = j["embedding_row"].get<std::uint64_t>();
      }
    } catch (const json::exception& e) {
      throw FormatError(std::string("caption record: ") + e.what());
    }
    return r;
  }
  const auto t1 = line.find('\t');
  const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
  if (t2 == std::string_view::npos) throw FormatError("caption record: expected id<TAB>entity<TAB>caption");
  r.id = std::string(line.substr(0, t1));
  r.entity = std::string(line.substr(t1 + 1, t2 - t1 - 1));
  r.caption = std::string(line.substr(t2 + 1));
  if (r.id.empty()) throw FormatError("caption record: empty id");
  return r;
}

CaptionReader::CaptionReader(std::istream& in, std::string source_name) : in_(in), source_(std::move(source_name)) {}

std::optional<CaptionRecord> CaptionReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    if (trim(line).empty()) continue;
    ++stats_.lines;
    CaptionRecord r;
    try {
      r = parse_caption_line(line);
    } catch (const FormatError&) {
      ++stats_.malformed;
      continue;
    }
    if (trim(r.caption).empty()) {
      ++stats_.empty_caption;
      continue;
    }
    if (!r.entity.empty() && !caption_contains_entity(r.caption, r.entity)) {
      ++stats_.entity_missing;
      continue;
    }
    ++stats_.accepted;
    return r;
  }
  return std::nullopt;
}

std::string prediction_to_json(std::string_view id, const CountryPrediction& p) {
  ordered_json j;
  j["id"] = std::string(id);
  if (p.country != nullptr) {
    j["country"] = p.country->name;
  } else if (!p.unmapped_code.empty()) {
    j["country"] = p.unmapped_code;
  } else {
    j["country"] = nullptr;
  }
  j["method"] = std::string(to_string(p.method));
  if (p.mention) j["mention"] = p.mention->text;
  j["flags"] = flag_names(p.flags);
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

PredictionLine parse_prediction_line(std::string_view line) {
  try {
    const auto j = json::parse(line);
    PredictionLine out;
    out.id = j.at("id").get<std::string>();
    if (!j.at("country").is_null()) out.country = j.at("country").get<std::string>();
    out.method = method_from_string(j.at("method").get<std::string>());
    if (j.contains("mention")) out.mention = j.at("mention").get<std::string>();
    for (const auto& f : j.at("flags")) out.flags |= flag_from_name(f.get<std::string>());
    return out;
  } catch (const json::exception& e) {
    throw FormatError(std::string("prediction line: ") + e.what());
  }
}

}  // namespace geoprofile
