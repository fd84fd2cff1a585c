#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geoprofile/countries.hpp"
#include "geoprofile/geolocate.hpp"

namespace geoprofile {

// Per-entity country frequencies. Keys are canonical country names, or the
// raw ISO code for gazetteer countries missing from the country table.
struct EntityDistribution {
  std::string entity;
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t underspecified = 0;
  std::uint64_t provider_errors = 0;
  std::uint64_t total_processed = 0;

  void add(const CountryPrediction& p);
  std::uint64_t located() const;

  bool operator==(const EntityDistribution&) const = default;
};

EntityDistribution aggregate(std::span<const CountryPrediction> predictions, std::string_view entity);

// Pointwise sum. Throws ParameterError when the entities differ; a
// distribution with an empty entity name and no records acts as identity.
EntityDistribution merge(const EntityDistribution& a, const EntityDistribution& b);

// 100 * underspecified / (total_processed - provider_errors); nullopt when
// that denominator is 0.
std::optional<double> underspecified_rate(const EntityDistribution& d);

struct Concentration {
  std::vector<std::pair<std::string, std::uint64_t>> top;
  double share = 0.0;  // percent of located records

  bool operator==(const Concentration&) const = default;
};

// Countries by count descending, ties by name. Throws ParameterError when no
// record is located.
Concentration topn_concentration(const EntityDistribution& d, std::size_t n = 15);

enum class RollupLevel { kContinent, kRegion, kIncome };
std::string_view to_string(RollupLevel level);  // "continent", "un_region", "income"

struct Rollup {
  std::map<std::string, std::uint64_t> counts;
  std::map<std::string, double> shares;  // percent of mapped records
  std::uint64_t unmapped = 0;

  bool operator==(const Rollup&) const = default;
};

Rollup rollup(const EntityDistribution& d, RollupLevel level, const CountryTable& countries = CountryTable::builtin());

struct Correlation {
  std::string name;
  std::optional<double> rho;
  std::optional<double> p_value;
  std::size_t n = 0;
  double coverage = 0.0;  // fraction of located mass whose country has a value

  bool operator==(const Correlation&) const = default;
};

// Country -> value, keyed by canonical name.
using CountryValues = std::map<std::string, double>;

struct IndicatorLoad {
  CountryValues values;
  std::vector<std::string> unresolved;  // rows whose country did not canonicalize
};

// CSV `country,value`; the country column may hold a name, an alias or an
// ISO alpha-2 code.
IndicatorLoad load_country_values(const std::filesystem::path& path,
                                  const CountryTable& countries = CountryTable::builtin());
IndicatorLoad load_country_values(std::istream& in, const CountryTable& countries = CountryTable::builtin());

// Spearman between counts and indicator values over the countries present
// in both. rho is nullopt with fewer than 3 shared countries or constant
// input.
Correlation correlate_indicator(const EntityDistribution& d, const CountryValues& indicator, std::string name = {});

// Spearman between counts and diversity over countries with count >
// min_count that have a diversity value.
Correlation frequency_diversity_correlation(const EntityDistribution& d, const CountryValues& diversity,
                                            std::uint64_t min_count = 100, std::string name = "frequency_diversity");

struct EntityReport {
  EntityDistribution distribution;
  std::optional<double> underspecified_rate;
  std::optional<Concentration> concentration;
  std::map<std::string, Rollup> rollups;  // by level name
  std::vector<Correlation> correlations;

  bool operator==(const EntityReport&) const = default;
};

struct RunCounters {
  std::uint64_t records_read = 0;
  std::uint64_t rejected = 0;      // failed ingestion checks
  std::uint64_t no_embedding = 0;  // filter on, embedding row missing
  std::uint64_t filtered_out = 0;  // classifier said absent
  std::uint64_t other_entity = 0;  // entity not in the configured list

  bool operator==(const RunCounters&) const = default;
};

struct ProfileReport {
  static constexpr int kVersion = 1;

  std::string config_hash;
  std::map<std::string, std::string> prompt_checksums;
  std::string method;
  std::size_t top_n = 15;
  std::vector<EntityReport> entities;  // sorted by entity name
  EntityReport combined;               // all entities merged (entity name "*")
  RunCounters counters;

  bool operator==(const ProfileReport&) const = default;
};

struct ReportOptions {
  std::size_t top_n = 15;
  std::map<std::string, CountryValues> indicators;  // name -> values
  std::uint64_t min_count = 100;
  // entity -> country -> diversity score; feeds the frequency-diversity
  // correlation when present.
  std::map<std::string, CountryValues> diversity;
};

EntityReport build_entity_report(const EntityDistribution& d, const ReportOptions& options,
                                 const CountryTable& countries = CountryTable::builtin());

// Pretty-printed JSON with sorted keys; doubles round-trip exactly.
std::string report_to_json(const ProfileReport& report);
ProfileReport report_from_json(std::string_view text);

// Flattened tables for plotting: summary.csv, countries.csv, rollups.csv,
// correlations.csv and choropleth.csv (`entity,iso2,share`).
void write_report_csvs(const ProfileReport& report, const std::filesystem::path& dir,
                       const CountryTable& countries = CountryTable::builtin());

}  // namespace geoprofile
