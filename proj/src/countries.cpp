#include "geoprofile/countries.hpp"

#include <fstream>
#include <sstream>

#include "geoprofile/assets.hpp"
#include "geoprofile/csv.hpp"
#include "geoprofile/error.hpp"
#include "geoprofile/text.hpp"

namespace geoprofile {
namespace {

std::vector<std::string> read_lines(std::string_view content) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (!t.empty() && !t.starts_with('#')) lines.emplace_back(t);
  }
  return lines;
}

bool valid_iso2(std::string_view code) {
  return code.size() == 2 && code[0] >= 'A' && code[0] <= 'Z' && code[1] >= 'A' && code[1] <= 'Z';
}

}  // namespace

std::string_view to_code(Continent c) {
  switch (c) {
    case Continent::NorthAmerica: return "NA";
    case Continent::SouthAmerica: return "SA";
    case Continent::Europe: return "EU";
    case Continent::Asia: return "AS";
    case Continent::Africa: return "AF";
    case Continent::Oceania: return "OC";
  }
  return "??";
}

Continent continent_from_code(std::string_view code) {
  if (code == "NA") return Continent::NorthAmerica;
  if (code == "SA") return Continent::SouthAmerica;
  if (code == "EU") return Continent::Europe;
  if (code == "AS") return Continent::Asia;
  if (code == "AF") return Continent::Africa;
  if (code == "OC") return Continent::Oceania;
  throw FormatError("unknown continent code '" + std::string(code) + "'");
}

std::string_view to_string(IncomeGroup g) {
  switch (g) {
    case IncomeGroup::Low: return "Low";
    case IncomeGroup::LowerMiddle: return "Lower Middle";
    case IncomeGroup::UpperMiddle: return "Upper Middle";
    case IncomeGroup::High: return "High";
  }
  return "?";
}

IncomeGroup income_group_from_string(std::string_view s) {
  if (s == "Low") return IncomeGroup::Low;
  if (s == "Lower Middle") return IncomeGroup::LowerMiddle;
  if (s == "Upper Middle") return IncomeGroup::UpperMiddle;
  if (s == "High") return IncomeGroup::High;
  throw FormatError("unknown income group '" + std::string(s) + "'");
}

const CountryTable& CountryTable::builtin() {
  static const CountryTable table = [] {
    std::istringstream in{std::string(assets::get("countries.csv"))};
    return from_csv(in, builtin_rules());
  }();
  return table;
}

CountryTable::RuleTables CountryTable::builtin_rules() {
  RuleTables rules;
  std::istringstream aliases{std::string(assets::get("country_aliases.csv"))};
  const auto table = csv::read(aliases, "country_aliases.csv");
  const auto alias_col = table.column("alias");
  const auto iso_col = table.column("iso2");
  for (const auto& row : table.rows) rules.aliases.emplace_back(row[alias_col], row[iso_col]);
  rules.us_states = read_lines(assets::get("us_states.txt"));
  rules.uk_constituents = read_lines(assets::get("uk_constituents.txt"));
  rules.vague_regions = read_lines(assets::get("vague_regions.txt"));
  return rules;
}

CountryTable CountryTable::from_csv(std::istream& in, RuleTables rules) {
  const auto table = csv::read(in, "country table");
  const auto iso_col = table.column("iso2");
  const auto name_col = table.column("name");
  const auto continent_col = table.column("continent");
  const auto region_col = table.column("un_region");
  const auto income_col = table.column("income_group");

  CountryTable out;
  out.countries_.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const std::string iso2(trim(row[iso_col]));
    if (!valid_iso2(iso2)) throw FormatError("country table: invalid iso2 '" + iso2 + "'");
    out.countries_.push_back(CanonicalCountry{
        std::string(trim(row[name_col])), iso2, continent_from_code(trim(row[continent_col])),
        std::string(trim(row[region_col])), income_group_from_string(trim(row[income_col]))});
  }
  out.rules_ = std::move(rules);
  out.index();
  return out;
}

CountryTable CountryTable::from_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return from_csv(in, builtin_rules());
}

void CountryTable::index() {
  for (std::size_t i = 0; i < countries_.size(); ++i) {
    const auto& c = countries_[i];
    if (!by_iso2_.emplace(c.iso2, i).second) throw FormatError("country table: duplicate iso2 " + c.iso2);
    by_name_.emplace(normalize_name(c.name), i);
  }
  const auto fold_to = [&](const std::string& key, std::string_view iso2) {
    const auto it = by_iso2_.find(std::string(iso2));
    if (it == by_iso2_.end()) return;
    folded_.emplace(normalize_name(key), it->second);
  };
  for (const auto& name : rules_.uk_constituents) fold_to(name, "GB");
  for (const auto& name : rules_.us_states) fold_to(name, "US");
  for (const auto& [alias, iso2] : rules_.aliases) fold_to(alias, iso2);
  for (const auto& region : rules_.vague_regions) vague_.insert(normalize_name(region));
}

const CanonicalCountry* CountryTable::by_iso2(std::string_view iso2) const {
  const auto it = by_iso2_.find(std::string(iso2));
  return it == by_iso2_.end() ? nullptr : &countries_[it->second];
}

const CanonicalCountry* CountryTable::by_name(std::string_view name) const {
  const auto it = by_name_.find(normalize_name(name));
  return it == by_name_.end() ? nullptr : &countries_[it->second];
}

CountryResolution CountryTable::canonicalize(std::string_view raw) const {
  const std::string key = normalize_name(raw);
  if (key.empty()) return {nullptr, NoCountryReason::kEmpty};
  if (key == "no") return {nullptr, NoCountryReason::kSentinel};
  if (const auto it = by_name_.find(key); it != by_name_.end()) return {&countries_[it->second], NoCountryReason::kNone};
  if (const auto it = folded_.find(key); it != folded_.end()) return {&countries_[it->second], NoCountryReason::kNone};
  if (vague_.contains(key)) return {nullptr, NoCountryReason::kVagueRegion};
  return {nullptr, NoCountryReason::kUnrecognized};
}

CountryMeta CountryTable::meta(const CanonicalCountry& country) const {
  const auto* own = by_iso2(country.iso2);
  if (own == nullptr || own->name != country.name) {
    throw LookupError("country '" + country.name + "' is not in the metadata table");
  }
  return {own->continent, own->un_region, own->income_group};
}

CountryResolution canonicalize_country(std::string_view raw) { return CountryTable::builtin().canonicalize(raw); }

CountryMeta country_meta(const CanonicalCountry& country) { return CountryTable::builtin().meta(country); }

}  // namespace geoprofile
