#include "geoprofile/eval.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>

#include <json.hpp>

#include "geoprofile/csv.hpp"
#include "geoprofile/error.hpp"
#include "geoprofile/random.hpp"
#include "geoprofile/text.hpp"

namespace geoprofile {

using nlohmann::json;

std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::kManual:
      return "manual";
    case Origin::kSynthesized:
      return "synthesized";
    case Origin::kMarginalized:
      return "marginalized";
  }
  throw LookupError("unknown origin");
}

Origin origin_from_string(std::string_view s) {
  if (s == "manual") return Origin::kManual;
  if (s == "synthesized") return Origin::kSynthesized;
  if (s == "marginalized") return Origin::kMarginalized;
  throw FormatError("unknown caption origin '" + std::string(s) + "'");
}

namespace {

std::size_t count_placeholders(std::string_view text) {
  std::size_t n = 0;
  for (auto at = text.find(kLocPlaceholder); at != std::string_view::npos;
       at = text.find(kLocPlaceholder, at + kLocPlaceholder.size())) {
    ++n;
  }
  return n;
}

template <typename Fn>
void for_each_json_line(std::istream& in, std::string_view source, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw FormatError(std::string(source) + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(std::string(source) + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<CaptionTemplate> load_templates(std::istream& in) {
  std::vector<CaptionTemplate> out;
  for_each_json_line(in, "templates", [&](const json& j) {
    CaptionTemplate t{j.at("template").get<std::string>(), j.value("entity", std::string())};
    if (count_placeholders(t.text) != 1) throw FormatError("template must contain exactly one {LOC}");
    out.push_back(std::move(t));
  });
  return out;
}

std::vector<CaptionTemplate> load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return load_templates(in);
}

std::vector<AnnotatedCaption> load_testset(std::istream& in, const CountryTable& countries) {
  std::vector<AnnotatedCaption> out;
  for_each_json_line(in, "testset", [&](const json& j) {
    AnnotatedCaption a;
    a.caption = j.at("caption").get<std::string>();
    a.origin = origin_from_string(j.value("origin", std::string("manual")));
    const auto& gold = j.at("gold_country");
    if (!gold.is_null()) {
      const auto name = gold.get<std::string>();
      a.gold = countries.canonicalize(name).country;
      if (a.gold == nullptr) throw FormatError("unknown gold country '" + name + "'");
    }
    if (a.gold == nullptr && a.origin != Origin::kManual) {
      throw FormatError("only manual captions may lack a gold country");
    }
    out.push_back(std::move(a));
  });
  return out;
}

std::vector<AnnotatedCaption> load_testset(const std::filesystem::path& path, const CountryTable& countries) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return load_testset(in, countries);
}

void write_testset(std::ostream& out, const std::vector<AnnotatedCaption>& testset) {
  for (const auto& a : testset) {
    nlohmann::ordered_json j;
    j["caption"] = a.caption;
    j["gold_country"] = a.gold != nullptr ? nlohmann::ordered_json(a.gold->name) : nlohmann::ordered_json(nullptr);
    j["origin"] = std::string(to_string(a.origin));
    out << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }
}

std::vector<AnnotatedCaption> synthesize_geo_testset(const std::vector<CaptionTemplate>& templates,
                                                     const GazetteerIndex& index, std::uint64_t min_population,
                                                     std::uint64_t seed, const CountryTable& countries) {
  if (templates.empty()) throw ParameterError("synthesis needs at least one template");
  for (const auto& t : templates) {
    if (count_placeholders(t.text) != 1) throw ParameterError("template without exactly one {LOC}: " + t.text);
  }
  rng::Engine engine(seed);
  std::size_t next = rng::index(engine, templates.size());
  std::vector<AnnotatedCaption> out;
  for (const auto& entry : index.entries()) {
    if (entry.population < min_population) continue;
    const auto* country = countries.by_iso2(entry.country_code);
    if (country == nullptr) continue;
    const auto& text = templates[next].text;
    next = (next + 1) % templates.size();
    const auto at = text.find(kLocPlaceholder);
    std::string caption = text.substr(0, at);
    caption += entry.name;
    caption += text.substr(at + kLocPlaceholder.size());
    out.push_back(AnnotatedCaption{std::move(caption), country, Origin::kSynthesized});
  }
  if (out.empty()) throw ParameterError("no gazetteer entry reaches the minimum population");
  return out;
}

EvalResult evaluate_method(const MethodFn& method, const std::vector<AnnotatedCaption>& testset) {
  if (testset.empty()) throw ParameterError("evaluation needs a non-empty testset");
  EvalResult r;
  std::map<std::string, std::array<std::uint64_t, 3>> per_country;  // tp, fp, fn
  for (const auto& sample : testset) {
    ++r.samples;
    const auto p = method(sample.caption);
    const std::string gold = sample.gold != nullptr ? sample.gold->name : "none";
    std::string predicted = "none";
    if (p.provider_error()) {
      predicted = "provider_error";
      ++r.provider_errors;
    } else if (p.country != nullptr) {
      predicted = p.country->name;
    } else if (!p.unmapped_code.empty()) {
      predicted = p.unmapped_code;
    }
    ++r.confusion[{gold, predicted}];

    const bool gold_located = sample.gold != nullptr;
    const bool predicted_country = predicted != "none" && predicted != "provider_error";
    if (gold_located && predicted_country && predicted == gold) {
      ++r.tp;
      ++per_country[gold][0];
    } else {
      if (predicted_country) {
        ++r.fp;
        ++per_country[predicted][1];
      }
      if (gold_located) {
        ++r.fn;
        ++per_country[gold][2];
      }
      if (!gold_located && !predicted_country) ++r.tn;
    }
  }
  if (r.tp + r.fp > 0) r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  if (r.tp + r.fn > 0) r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);

  double p_sum = 0.0, r_sum = 0.0;
  std::size_t p_n = 0, r_n = 0;
  for (const auto& [country, c] : per_country) {
    if (c[0] + c[1] > 0) {
      p_sum += static_cast<double>(c[0]) / static_cast<double>(c[0] + c[1]);
      ++p_n;
    }
    if (c[0] + c[2] > 0) {
      r_sum += static_cast<double>(c[0]) / static_cast<double>(c[0] + c[2]);
      ++r_n;
    }
  }
  if (p_n > 0) r.macro_precision = p_sum / static_cast<double>(p_n);
  if (r_n > 0) r.macro_recall = r_sum / static_cast<double>(r_n);
  return r;
}

std::vector<ComparisonRow> compare_methods(const std::vector<NamedMethod>& methods,
                                           const std::vector<AnnotatedCaption>& testset, Averaging averaging) {
  std::vector<ComparisonRow> rows;
  for (const auto& m : methods) {
    ComparisonRow row;
    row.name = m.name;
    row.type = m.type;
    row.detail = evaluate_method(m.fn, testset);
    row.precision = averaging == Averaging::kMicro ? row.detail.precision : row.detail.macro_precision;
    row.recall = averaging == Averaging::kMicro ? row.detail.recall : row.detail.macro_recall;
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return rows;
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  const auto fmt = [](const std::optional<double>& v) { return v ? json(*v).dump() : std::string(); };
  out << "method_type,method,precision,recall,tp,fp,fn\n";
  for (const auto& r : rows) {
    out << csv::escape(r.type) << ',' << csv::escape(r.name) << ',' << fmt(r.precision) << ',' << fmt(r.recall) << ','
        << r.detail.tp << ',' << r.detail.fp << ',' << r.detail.fn << '\n';
  }
}

}  // namespace geoprofile
