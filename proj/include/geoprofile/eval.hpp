#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "geoprofile/countries.hpp"
#include "geoprofile/gazetteer.hpp"
#include "geoprofile/geolocate.hpp"

namespace geoprofile {

enum class Origin { kManual, kSynthesized, kMarginalized };
std::string_view to_string(Origin o);
Origin origin_from_string(std::string_view s);

struct AnnotatedCaption {
  std::string caption;
  const CanonicalCountry* gold = nullptr;  // nullptr = no country (manual origin only)
  Origin origin = Origin::kManual;
};

// A caption with exactly one `{LOC}` placeholder.
struct CaptionTemplate {
  std::string text;
  std::string entity;
};

inline constexpr std::string_view kLocPlaceholder = "{LOC}";

// JSON lines `{template, entity}`. Throws FormatError when a template does
// not hold exactly one placeholder.
std::vector<CaptionTemplate> load_templates(const std::filesystem::path& path);
std::vector<CaptionTemplate> load_templates(std::istream& in);

// JSON lines `{caption, gold_country|null, origin}`. Gold countries go
// through canonicalization; an unknown one is a FormatError, as is a missing
// gold country on a synthesized caption.
std::vector<AnnotatedCaption> load_testset(std::istream& in, const CountryTable& countries = CountryTable::builtin());
std::vector<AnnotatedCaption> load_testset(const std::filesystem::path& path,
                                           const CountryTable& countries = CountryTable::builtin());
void write_testset(std::ostream& out, const std::vector<AnnotatedCaption>& testset);

// One caption per gazetteer entry with population >= min_population whose
// country is in the table, in index order. Templates are assigned round-robin
// from a seeded starting offset. Throws ParameterError without templates or
// without a qualifying entry.
std::vector<AnnotatedCaption> synthesize_geo_testset(const std::vector<CaptionTemplate>& templates,
                                                     const GazetteerIndex& index, std::uint64_t min_population,
                                                     std::uint64_t seed,
                                                     const CountryTable& countries = CountryTable::builtin());

using MethodFn = std::function<CountryPrediction(const std::string& caption)>;

enum class Averaging { kMicro, kMacro };

struct EvalResult {
  // A correct country is a true positive. A wrong country is both a false
  // positive and a false negative. No country (or a provider error) on a
  // located caption is a false negative. A country on an unlocated caption is
  // a false positive.
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::uint64_t provider_errors = 0;
  std::uint64_t samples = 0;
  std::optional<double> precision;  // micro; nullopt without positive predictions
  std::optional<double> recall;     // micro; nullopt without located captions
  std::optional<double> macro_precision;
  std::optional<double> macro_recall;
  // (gold, predicted) -> count; labels are country names, "none" or
  // "provider_error".
  std::map<std::pair<std::string, std::string>, std::uint64_t> confusion;
};

// Throws ParameterError on an empty testset.
EvalResult evaluate_method(const MethodFn& method, const std::vector<AnnotatedCaption>& testset);

struct NamedMethod {
  std::string name;
  std::string type;  // free label, e.g. "Pre-LLM" or "LLM"
  MethodFn fn;
};

struct ComparisonRow {
  std::string name;
  std::string type;
  std::optional<double> precision;
  std::optional<double> recall;
  EvalResult detail;
};

// One row per method on the same testset, sorted by name.
std::vector<ComparisonRow> compare_methods(const std::vector<NamedMethod>& methods,
                                           const std::vector<AnnotatedCaption>& testset,
                                           Averaging averaging = Averaging::kMicro);

// `method_type,method,precision,recall,tp,fp,fn`; undefined values are empty.
void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

}  // namespace geoprofile
