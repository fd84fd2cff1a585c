#include "geoprofile/geolocate.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include <json.hpp>

#include "geoprofile/assets.hpp"
#include "geoprofile/error.hpp"
#include "geoprofile/text.hpp"

namespace geoprofile {
namespace {

constexpr std::array<std::pair<Method, std::string_view>, 4> kMethods{{
    {Method::kStringMatch, "string_match"},
    {Method::kZeroShot, "zero_shot"},
    {Method::kErp, "erp"},
    {Method::kIcl, "icl"},
}};

constexpr std::array<std::string_view, 5> kFlagNames{"unrecognized", "provider_error", "vague_region", "translated",
                                                     "unmapped"};

std::vector<std::string> split_spaces(std::string_view key) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= key.size()) {
    const auto sp = key.find(' ', start);
    const auto end = sp == std::string_view::npos ? key.size() : sp;
    if (end > start) out.emplace_back(key.substr(start, end - start));
    if (sp == std::string_view::npos) break;
    start = sp + 1;
  }
  return out;
}

// Folds a provider reply into the prediction.
void apply_reply(CountryPrediction& p, const std::string& reply, const CountryTable& countries) {
  p.provider_raw = reply;
  const auto res = countries.canonicalize(reply);
  p.country = res.country;
  if (res.reason == NoCountryReason::kUnrecognized) p.flags |= kFlagUnrecognized;
  if (res.reason == NoCountryReason::kVagueRegion) p.flags |= kFlagVagueRegion;
}

bool is_english(std::string_view language) {
  const auto lang = trim(language);
  if (lang.empty()) return true;
  const auto primary = lang.substr(0, lang.find_first_of("-_"));
  return iequals(primary, "en");
}

}  // namespace

std::string_view to_string(Method m) {
  for (const auto& [k, name] : kMethods) {
    if (k == m) return name;
  }
  throw LookupError("unknown method");
}

Method method_from_string(std::string_view s) {
  for (const auto& [k, name] : kMethods) {
    if (name == s) return k;
  }
  throw ConfigError("unknown geolocation method '" + std::string(s) +
                    "' (expected string_match, zero_shot, erp or icl)");
}

std::vector<std::string> flag_names(std::uint32_t flags) {
  std::vector<std::string> out;
  for (std::size_t bit = 0; bit < kFlagNames.size(); ++bit) {
    if (flags & (1u << bit)) out.emplace_back(kFlagNames[bit]);
  }
  return out;
}

std::uint32_t flag_from_name(std::string_view name) {
  for (std::size_t bit = 0; bit < kFlagNames.size(); ++bit) {
    if (kFlagNames[bit] == name) return 1u << bit;
  }
  throw FormatError("unknown prediction flag '" + std::string(name) + "'");
}

const std::unordered_set<std::string>& builtin_stop_words() {
  static const std::unordered_set<std::string> words = [] {
    std::unordered_set<std::string> out;
    const std::string_view text = assets::get("stopwords_en.txt");
    std::size_t start = 0;
    while (start < text.size()) {
      auto nl = text.find('\n', start);
      if (nl == std::string_view::npos) nl = text.size();
      const auto word = normalize_name(text.substr(start, nl - start));
      if (!word.empty()) out.insert(word);
      start = nl + 1;
    }
    return out;
  }();
  return words;
}

StringMatcher::StringMatcher(const GazetteerIndex& index, const std::unordered_set<std::string>& stop_words) {
  const auto keys = index.keys();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto tokens = split_spaces(keys[i]);
    if (tokens.empty() || tokens.size() > kMaxTokens) continue;
    if (tokens.size() == 1 && stop_words.contains(tokens.front())) continue;
    matcher_.add(tokens, static_cast<std::uint32_t>(i));
  }
  matcher_.compile();
}

StringMatcher::StringMatcher(const GazetteerIndex& index) : StringMatcher(index, builtin_stop_words()) {}

std::vector<LocationMention> StringMatcher::extract(std::string_view caption) const {
  const auto tokens = tokenize(caption);
  std::vector<std::string_view> words;
  words.reserve(tokens.size());
  for (const auto& t : tokens) words.emplace_back(t.text);

  auto matches = matcher_.find_all(words);
  std::sort(matches.begin(), matches.end(), [](const auto& a, const auto& b) {
    if (a.length != b.length) return a.length > b.length;
    return a.first < b.first;
  });
  std::vector<bool> taken(tokens.size(), false);
  std::vector<TokenMatcher::Match> chosen;
  for (const auto& m : matches) {
    const auto first = taken.begin() + static_cast<std::ptrdiff_t>(m.first);
    const auto last = first + static_cast<std::ptrdiff_t>(m.length);
    if (std::any_of(first, last, [](bool b) { return b; })) continue;
    std::fill(first, last, true);
    chosen.push_back(m);
  }
  std::sort(chosen.begin(), chosen.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<LocationMention> out;
  out.reserve(chosen.size());
  for (const auto& m : chosen) {
    const std::size_t begin = tokens[m.first].begin;
    const std::size_t end = tokens[m.first + m.length - 1].end;
    out.push_back(LocationMention{std::string(caption.substr(begin, end - begin)), begin, end,
                                  MentionSource::kStringMatch});
  }
  return out;
}

std::vector<LocationMention> extract_string_match(std::string_view caption, const StringMatcher& matcher) {
  return matcher.extract(caption);
}

CountryPrediction geolocate_string_match(std::string_view caption, const GazetteerIndex& index,
                                         const StringMatcher& matcher, const CountryTable& countries) {
  CountryPrediction p;
  p.method = Method::kStringMatch;
  auto mentions = matcher.extract(caption);
  if (mentions.empty()) return p;
  p.candidates = index.retrieve_topk(mentions.front().text, 1);
  p.mention = std::move(mentions.front());
  if (p.candidates.empty()) return p;
  p.country = countries.by_iso2(p.candidates.front().entry->country_code);
  if (p.country == nullptr) {
    p.flags |= kFlagUnmapped;
    p.unmapped_code = p.candidates.front().entry->country_code;
  }
  return p;
}

std::optional<std::string> extract_via_provider(std::string_view caption, TextCompletionProvider& provider) {
  if (trim(caption).empty()) return std::nullopt;
  const auto reply = provider.complete(make_request(PromptKind::kExtract, {{"text", std::string(caption)}}));
  const auto mention = trim(reply);
  if (mention.empty() || iequals(mention, "no")) return std::nullopt;
  return std::string(mention);
}

std::string format_candidates(const std::vector<Candidate>& candidates, const CountryTable& countries) {
  if (candidates.empty()) return "\n(no matching locations found)";
  std::string out;
  for (const auto& c : candidates) {
    const auto* country = countries.by_iso2(c.entry->country_code);
    out += '\n';
    out += c.entry->name;
    out += " -> ";
    out += country != nullptr ? country->name : c.entry->country_code;
  }
  return out;
}

CountryPrediction predict_country_erp(std::string_view caption, std::string_view mention,
                                      const GazetteerIndex& index, TextCompletionProvider& provider,
                                      const CountryTable& countries) {
  if (trim(mention).empty()) throw ParameterError("predict_country_erp needs a non-empty mention");
  CountryPrediction p;
  p.method = Method::kErp;
  LocationMention m;
  m.text = std::string(trim(mention));
  m.source = MentionSource::kProvider;
  if (const auto at = caption.find(m.text); at != std::string_view::npos) {
    m.begin = at;
    m.end = at + m.text.size();
  }
  p.mention = std::move(m);
  p.candidates = index.retrieve_topk(mention, 10);
  const auto request = make_request(
      PromptKind::kPredict, {{"text", std::string(caption)}, {"examples", format_candidates(p.candidates, countries)}});
  apply_reply(p, provider.complete(request), countries);
  return p;
}

std::vector<IclExample> load_icl_examples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open in-context example file " + path.string());
  std::vector<IclExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      IclExample e;
      e.text = j.at("text").get<std::string>();
      if (j.contains("country") && !j.at("country").is_null()) e.country = j.at("country").get<std::string>();
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

std::string format_icl_examples(const std::vector<IclExample>& examples) {
  std::string out;
  for (const auto& e : examples) {
    out += '\n';
    out += e.text;
    out += " -> ";
    out += e.country.empty() ? "no" : e.country;
  }
  return out;
}

CountryPrediction geolocate_caption(const CaptionRecord& record, const GeolocateConfig& config) {
  const CountryTable& countries = config.countries != nullptr ? *config.countries : CountryTable::builtin();
  const bool needs_provider = config.method != Method::kStringMatch;
  if (needs_provider && !config.provider) throw ConfigError("method " + std::string(to_string(config.method)) +
                                                            " needs a provider");
  if (config.index == nullptr && (config.method == Method::kStringMatch || config.method == Method::kErp)) {
    throw ConfigError("method " + std::string(to_string(config.method)) + " needs a gazetteer index");
  }

  CountryPrediction p;
  p.method = config.method;
  try {
    std::string caption = record.caption;
    if (config.translator && !is_english(record.language) && !trim(caption).empty()) {
      caption = config.translator->translate(caption, record.language);
      p.flags |= kFlagTranslated;
    }
    if (trim(caption).empty()) return p;

    const std::uint32_t carried = p.flags;
    switch (config.method) {
      case Method::kStringMatch:
        if (config.matcher == nullptr) throw ConfigError("string_match needs a StringMatcher");
        p = geolocate_string_match(caption, *config.index, *config.matcher, countries);
        break;
      case Method::kZeroShot:
        apply_reply(p, config.provider->complete(make_request(PromptKind::kZeroShot, {{"text", caption}})), countries);
        break;
      case Method::kErp: {
        const auto mention = extract_via_provider(caption, *config.provider);
        if (!mention) break;
        p = predict_country_erp(caption, *mention, *config.index, *config.provider, countries);
        break;
      }
      case Method::kIcl:
        apply_reply(p,
                    config.provider->complete(
                        make_request(PromptKind::kIcl, {{"text", caption}, {"examples", config.icl_examples}})),
                    countries);
        break;
    }
    p.flags |= carried;
  } catch (const ProviderError& e) {
    CountryPrediction failed;
    failed.method = config.method;
    failed.flags = (p.flags & kFlagTranslated) | kFlagProviderError;
    failed.error = e.what();
    return failed;
  }
  return p;
}

}  // namespace geoprofile
