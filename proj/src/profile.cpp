#include "geoprofile/profile.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "geoprofile/csv.hpp"
#include "geoprofile/error.hpp"
#include "geoprofile/metrics.hpp"
#include "geoprofile/text.hpp"

namespace geoprofile {

using nlohmann::json;

void EntityDistribution::add(const CountryPrediction& p) {
  ++total_processed;
  if (p.provider_error()) {
    ++provider_errors;
  } else if (p.country != nullptr) {
    ++counts[p.country->name];
  } else if (!p.unmapped_code.empty()) {
    ++counts[p.unmapped_code];
  } else {
    ++underspecified;
  }
}

std::uint64_t EntityDistribution::located() const {
  std::uint64_t n = 0;
  for (const auto& [country, c] : counts) n += c;
  return n;
}

EntityDistribution aggregate(std::span<const CountryPrediction> predictions, std::string_view entity) {
  EntityDistribution d;
  d.entity = std::string(entity);
  for (const auto& p : predictions) d.add(p);
  return d;
}

namespace {
bool is_identity(const EntityDistribution& d) { return d.entity.empty() && d.total_processed == 0; }
}  // namespace

EntityDistribution merge(const EntityDistribution& a, const EntityDistribution& b) {
  if (is_identity(a)) return b;
  if (is_identity(b)) return a;
  if (a.entity != b.entity) throw ParameterError("cannot merge distributions of '" + a.entity + "' and '" + b.entity + "'");
  EntityDistribution out = a;
  for (const auto& [country, c] : b.counts) out.counts[country] += c;
  out.underspecified += b.underspecified;
  out.provider_errors += b.provider_errors;
  out.total_processed += b.total_processed;
  return out;
}

std::optional<double> underspecified_rate(const EntityDistribution& d) {
  const auto denom = d.total_processed - d.provider_errors;
  if (denom == 0) return std::nullopt;
  return 100.0 * static_cast<double>(d.underspecified) / static_cast<double>(denom);
}

Concentration topn_concentration(const EntityDistribution& d, std::size_t n) {
  const auto located = d.located();
  if (located == 0) throw ParameterError("top-n concentration of a distribution with no located records");
  std::vector<std::pair<std::string, std::uint64_t>> ranked(d.counts.begin(), d.counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  ranked.erase(std::remove_if(ranked.begin(), ranked.end(), [](const auto& e) { return e.second == 0; }), ranked.end());
  if (ranked.size() > n) ranked.resize(n);
  std::uint64_t top = 0;
  for (const auto& [country, c] : ranked) top += c;
  return Concentration{std::move(ranked), 100.0 * static_cast<double>(top) / static_cast<double>(located)};
}

std::string_view to_string(RollupLevel level) {
  switch (level) {
    case RollupLevel::kContinent:
      return "continent";
    case RollupLevel::kRegion:
      return "un_region";
    case RollupLevel::kIncome:
      return "income";
  }
  throw LookupError("unknown rollup level");
}

Rollup rollup(const EntityDistribution& d, RollupLevel level, const CountryTable& countries) {
  Rollup r;
  std::uint64_t mapped = 0;
  for (const auto& [name, c] : d.counts) {
    if (c == 0) continue;
    const auto* country = countries.by_name(name);
    if (country == nullptr) {
      r.unmapped += c;
      continue;
    }
    std::string key;
    switch (level) {
      case RollupLevel::kContinent:
        key = std::string(to_code(country->continent));
        break;
      case RollupLevel::kRegion:
        key = country->un_region;
        break;
      case RollupLevel::kIncome:
        key = std::string(to_string(country->income_group));
        break;
    }
    r.counts[key] += c;
    mapped += c;
  }
  for (const auto& [key, c] : r.counts) {
    r.shares[key] = 100.0 * static_cast<double>(c) / static_cast<double>(mapped);
  }
  return r;
}

IndicatorLoad load_country_values(std::istream& in, const CountryTable& countries) {
  const auto table = csv::read(in, "country values");
  const auto c_country = table.column("country");
  const auto c_value = table.column("value");
  IndicatorLoad out;
  for (const auto& row : table.rows) {
    const std::string raw(trim(row[c_country]));
    const CanonicalCountry* country = nullptr;
    if (raw.size() == 2 && std::isupper(static_cast<unsigned char>(raw[0])) &&
        std::isupper(static_cast<unsigned char>(raw[1]))) {
      country = countries.by_iso2(raw);
    }
    if (country == nullptr) country = countries.canonicalize(raw).country;
    if (country == nullptr) {
      out.unresolved.push_back(raw);
      continue;
    }
    double value = 0.0;
    try {
      std::size_t used = 0;
      const std::string v(trim(row[c_value]));
      value = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw FormatError("country values: bad value '" + row[c_value] + "' for " + raw);
    }
    if (value < 0) throw FormatError("country values: negative value for " + raw);
    out.values[country->name] = value;
  }
  return out;
}

IndicatorLoad load_country_values(const std::filesystem::path& path, const CountryTable& countries) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return load_country_values(in, countries);
}

namespace {

Correlation correlate(const std::vector<double>& x, const std::vector<double>& y, std::string name) {
  Correlation c;
  c.name = std::move(name);
  c.n = x.size();
  if (c.n < 3) return c;
  const auto s = spearman(x, y);
  c.rho = s.rho;
  c.p_value = s.p_value;
  return c;
}

}  // namespace

Correlation correlate_indicator(const EntityDistribution& d, const CountryValues& indicator, std::string name) {
  std::vector<double> x, y;
  std::uint64_t located = 0, covered = 0;
  for (const auto& [country, c] : d.counts) {
    if (c == 0) continue;
    located += c;
    const auto it = indicator.find(country);
    if (it == indicator.end()) continue;
    covered += c;
    x.push_back(static_cast<double>(c));
    y.push_back(it->second);
  }
  auto out = correlate(x, y, std::move(name));
  out.coverage = located == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(located);
  return out;
}

Correlation frequency_diversity_correlation(const EntityDistribution& d, const CountryValues& diversity,
                                            std::uint64_t min_count, std::string name) {
  std::vector<double> x, y;
  std::uint64_t located = 0, covered = 0;
  for (const auto& [country, c] : d.counts) {
    located += c;
    if (c <= min_count) continue;
    const auto it = diversity.find(country);
    if (it == diversity.end()) continue;
    covered += c;
    x.push_back(static_cast<double>(c));
    y.push_back(it->second);
  }
  auto out = correlate(x, y, std::move(name));
  out.coverage = located == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(located);
  return out;
}

EntityReport build_entity_report(const EntityDistribution& d, const ReportOptions& options,
                                 const CountryTable& countries) {
  EntityReport r;
  r.distribution = d;
  r.underspecified_rate = underspecified_rate(d);
  if (d.located() > 0) r.concentration = topn_concentration(d, options.top_n);
  for (const auto level : {RollupLevel::kContinent, RollupLevel::kRegion, RollupLevel::kIncome}) {
    r.rollups[std::string(to_string(level))] = rollup(d, level, countries);
  }
  for (const auto& [name, values] : options.indicators) r.correlations.push_back(correlate_indicator(d, values, name));
  if (const auto it = options.diversity.find(d.entity); it != options.diversity.end()) {
    r.correlations.push_back(frequency_diversity_correlation(d, it->second, options.min_count));
  }
  return r;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json to_json(const EntityDistribution& d) {
  return json{{"entity", d.entity},
              {"counts", d.counts},
              {"underspecified", d.underspecified},
              {"provider_errors", d.provider_errors},
              {"total_processed", d.total_processed}};
}

EntityDistribution distribution_from(const json& j) {
  EntityDistribution d;
  d.entity = j.at("entity").get<std::string>();
  d.counts = j.at("counts").get<std::map<std::string, std::uint64_t>>();
  d.underspecified = j.at("underspecified").get<std::uint64_t>();
  d.provider_errors = j.at("provider_errors").get<std::uint64_t>();
  d.total_processed = j.at("total_processed").get<std::uint64_t>();
  return d;
}

json to_json(const EntityReport& r) {
  json j;
  j["distribution"] = to_json(r.distribution);
  j["underspecified_rate"] = opt(r.underspecified_rate);
  if (r.concentration) {
    json top = json::array();
    for (const auto& [country, c] : r.concentration->top) top.push_back(json{{"country", country}, {"count", c}});
    j["concentration"] = json{{"top", top}, {"share", r.concentration->share}};
  } else {
    j["concentration"] = nullptr;
  }
  json rollups = json::object();
  for (const auto& [level, roll] : r.rollups) {
    rollups[level] = json{{"counts", roll.counts}, {"shares", roll.shares}, {"unmapped", roll.unmapped}};
  }
  j["rollups"] = rollups;
  json corr = json::array();
  for (const auto& c : r.correlations) {
    corr.push_back(json{{"name", c.name}, {"rho", opt(c.rho)}, {"p_value", opt(c.p_value)}, {"n", c.n},
                        {"coverage", c.coverage}});
  }
  j["correlations"] = corr;
  return j;
}

EntityReport entity_report_from(const json& j) {
  EntityReport r;
  r.distribution = distribution_from(j.at("distribution"));
  r.underspecified_rate = opt_from(j.at("underspecified_rate"));
  if (!j.at("concentration").is_null()) {
    Concentration c;
    for (const auto& e : j.at("concentration").at("top")) {
      c.top.emplace_back(e.at("country").get<std::string>(), e.at("count").get<std::uint64_t>());
    }
    c.share = j.at("concentration").at("share").get<double>();
    r.concentration = std::move(c);
  }
  for (const auto& [level, roll] : j.at("rollups").items()) {
    Rollup x;
    x.counts = roll.at("counts").get<std::map<std::string, std::uint64_t>>();
    x.shares = roll.at("shares").get<std::map<std::string, double>>();
    x.unmapped = roll.at("unmapped").get<std::uint64_t>();
    r.rollups[level] = std::move(x);
  }
  for (const auto& c : j.at("correlations")) {
    Correlation x;
    x.name = c.at("name").get<std::string>();
    x.rho = opt_from(c.at("rho"));
    x.p_value = opt_from(c.at("p_value"));
    x.n = c.at("n").get<std::size_t>();
    x.coverage = c.at("coverage").get<double>();
    r.correlations.push_back(std::move(x));
  }
  return r;
}

}  // namespace

std::string report_to_json(const ProfileReport& report) {
  json j;
  j["format"] = "geoprofile-report";
  j["version"] = ProfileReport::kVersion;
  j["config_hash"] = report.config_hash;
  j["prompt_checksums"] = report.prompt_checksums;
  j["method"] = report.method;
  j["top_n"] = report.top_n;
  json entities = json::array();
  for (const auto& e : report.entities) entities.push_back(to_json(e));
  j["entities"] = entities;
  j["combined"] = to_json(report.combined);
  j["counters"] = json{{"records_read", report.counters.records_read},
                       {"rejected", report.counters.rejected},
                       {"no_embedding", report.counters.no_embedding},
                       {"filtered_out", report.counters.filtered_out},
                       {"other_entity", report.counters.other_entity}};
  return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

ProfileReport report_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    if (j.at("format").get<std::string>() != "geoprofile-report") throw FormatError("not a profile report");
    if (j.at("version").get<int>() != ProfileReport::kVersion) throw FormatError("unsupported report version");
    ProfileReport r;
    r.config_hash = j.at("config_hash").get<std::string>();
    r.prompt_checksums = j.at("prompt_checksums").get<std::map<std::string, std::string>>();
    r.method = j.at("method").get<std::string>();
    r.top_n = j.at("top_n").get<std::size_t>();
    for (const auto& e : j.at("entities")) r.entities.push_back(entity_report_from(e));
    r.combined = entity_report_from(j.at("combined"));
    const auto& c = j.at("counters");
    r.counters.records_read = c.at("records_read").get<std::uint64_t>();
    r.counters.rejected = c.at("rejected").get<std::uint64_t>();
    r.counters.no_embedding = c.at("no_embedding").get<std::uint64_t>();
    r.counters.filtered_out = c.at("filtered_out").get<std::uint64_t>();
    r.counters.other_entity = c.at("other_entity").get<std::uint64_t>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("profile report: ") + e.what());
  }
}

namespace {

std::string fmt(double v) {
  // Shortest representation that round-trips, same as the JSON report.
  return json(v).dump();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_report_csvs(const ProfileReport& report, const std::filesystem::path& dir, const CountryTable& countries) {
  std::filesystem::create_directories(dir);
  std::vector<const EntityReport*> all;
  for (const auto& e : report.entities) all.push_back(&e);
  all.push_back(&report.combined);

  auto summary = open_csv(dir / "summary.csv");
  summary << "entity,total_processed,located,underspecified,provider_errors,underspecified_rate,top_n,top_n_share\n";
  auto country_rows = open_csv(dir / "countries.csv");
  country_rows << "entity,country,iso2,count,share\n";
  auto rollup_rows = open_csv(dir / "rollups.csv");
  rollup_rows << "entity,level,key,count,share\n";
  auto corr_rows = open_csv(dir / "correlations.csv");
  corr_rows << "entity,name,rho,p_value,n,coverage\n";
  auto choropleth = open_csv(dir / "choropleth.csv");
  choropleth << "entity,iso2,share\n";

  for (const auto* e : all) {
    const auto& d = e->distribution;
    const auto name = csv::escape(d.entity);
    const auto located = d.located();
    summary << name << ',' << d.total_processed << ',' << located << ',' << d.underspecified << ','
            << d.provider_errors << ',' << fmt(e->underspecified_rate) << ',' << report.top_n << ','
            << (e->concentration ? fmt(e->concentration->share) : std::string()) << '\n';
    for (const auto& [country, c] : d.counts) {
      const auto* meta = countries.by_name(country);
      const std::string iso = meta != nullptr ? meta->iso2 : country;
      const double share = located == 0 ? 0.0 : 100.0 * static_cast<double>(c) / static_cast<double>(located);
      country_rows << name << ',' << csv::escape(country) << ',' << iso << ',' << c << ',' << fmt(share) << '\n';
      choropleth << name << ',' << iso << ',' << fmt(share) << '\n';
    }
    for (const auto& [level, roll] : e->rollups) {
      for (const auto& [key, c] : roll.counts) {
        rollup_rows << name << ',' << level << ',' << csv::escape(key) << ',' << c << ',' << fmt(roll.shares.at(key))
                    << '\n';
      }
      if (roll.unmapped > 0) rollup_rows << name << ',' << level << ",unmapped," << roll.unmapped << ",\n";
    }
    for (const auto& c : e->correlations) {
      corr_rows << name << ',' << csv::escape(c.name) << ',' << fmt(c.rho) << ',' << fmt(c.p_value) << ',' << c.n
                << ',' << fmt(c.coverage) << '\n';
    }
  }
}

}  // namespace geoprofile
