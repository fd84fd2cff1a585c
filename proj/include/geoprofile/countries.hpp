#pragma once

#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace geoprofile {

enum class Continent { NorthAmerica, SouthAmerica, Europe, Asia, Africa, Oceania };

enum class IncomeGroup { Low, LowerMiddle, UpperMiddle, High };

// Two-letter code used in reports: NA, SA, EU, AS, AF, OC.
std::string_view to_code(Continent c);
Continent continent_from_code(std::string_view code);

// "Low", "Lower Middle", "Upper Middle", "High".
std::string_view to_string(IncomeGroup g);
IncomeGroup income_group_from_string(std::string_view s);

struct CanonicalCountry {
  std::string name;
  std::string iso2;
  Continent continent;
  std::string un_region;
  IncomeGroup income_group;
};

struct CountryMeta {
  Continent continent;
  std::string un_region;
  IncomeGroup income_group;

  bool operator==(const CountryMeta&) const = default;
};

// Why a string did not resolve to a country.
enum class NoCountryReason {
  kNone,          // resolved
  kEmpty,         // blank input
  kSentinel,      // the literal "no"
  kVagueRegion,   // continent or region name
  kUnrecognized,  // nothing in any table matched
};

struct CountryResolution {
  const CanonicalCountry* country = nullptr;
  NoCountryReason reason = NoCountryReason::kNone;

  bool resolved() const { return country != nullptr; }
};

// Canonical country table with the rule tables that fold synonyms, UK
// constituents and US states onto canonical entries. Entries are stored once;
// pointers returned by lookups stay valid for the table's lifetime (including
// after a move).
class CountryTable {
 public:
  struct RuleTables {
    std::vector<std::pair<std::string, std::string>> aliases;  // alias -> iso2
    std::vector<std::string> us_states;
    std::vector<std::string> uk_constituents;
    std::vector<std::string> vague_regions;
  };

  // Table built from the shipped assets.
  static const CountryTable& builtin();

  // CSV with header `iso2,name,continent,un_region,income_group`.
  static CountryTable from_csv(std::istream& in, RuleTables rules);
  static CountryTable from_csv_file(const std::filesystem::path& path);

  // Rule tables shipped with the library.
  static RuleTables builtin_rules();

  CountryTable(CountryTable&&) noexcept = default;
  CountryTable& operator=(CountryTable&&) noexcept = default;
  CountryTable(const CountryTable&) = delete;
  CountryTable& operator=(const CountryTable&) = delete;

  std::span<const CanonicalCountry> countries() const { return countries_; }

  const CanonicalCountry* by_iso2(std::string_view iso2) const;
  // Exact canonical-name lookup after normalize_name.
  const CanonicalCountry* by_name(std::string_view name) const;

  // Maps free text (a provider reply, a CSV key) onto a canonical country.
  // Order: sentinel "no", canonical names, UK constituents, US states,
  // aliases, vague regions; anything else is unrecognized.
  CountryResolution canonicalize(std::string_view raw) const;

  // Throws LookupError when `country` does not belong to this table.
  CountryMeta meta(const CanonicalCountry& country) const;

 private:
  CountryTable() = default;
  void index();

  std::vector<CanonicalCountry> countries_;
  RuleTables rules_;
  std::unordered_map<std::string, std::size_t> by_iso2_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::unordered_map<std::string, std::size_t> folded_;  // UK/US/alias keys
  std::unordered_set<std::string> vague_;
};

// Resolves against the builtin table.
CountryResolution canonicalize_country(std::string_view raw);
CountryMeta country_meta(const CanonicalCountry& country);

}  // namespace geoprofile
