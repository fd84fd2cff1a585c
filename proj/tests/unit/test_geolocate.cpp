#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "geoprofile/error.hpp"
#include "geoprofile/gazetteer.hpp"
#include "geoprofile/geolocate.hpp"
#include "geoprofile/providers.hpp"

using namespace geoprofile;

namespace {

const GazetteerIndex& index() {
  static const auto idx = load_gazetteer_file(fixtures::path("gazetteer_small.tsv"));
  return idx;
}

const StringMatcher& matcher() {
  static const StringMatcher m(index());
  return m;
}

std::vector<std::string> texts(const std::vector<LocationMention>& ms) {
  std::vector<std::string> out;
  for (const auto& m : ms) out.push_back(m.text);
  return out;
}

std::string country(const CountryPrediction& p) { return p.country ? p.country->name : ""; }

std::shared_ptr<TextCompletionProvider> transcripts(const std::string& jsonl) {
  std::istringstream in(jsonl);
  return std::make_shared<RecordedTranscriptProvider>(RecordedTranscriptProvider::from_jsonl(in));
}

// Answers extract prompts with a fixed mention and records predict prompts.
class Scripted : public TextCompletionProvider {
 public:
  explicit Scripted(std::string mention, std::string reply) : mention_(std::move(mention)), reply_(std::move(reply)) {}
  std::string complete(const PromptRequest& r) override {
    if (r.template_id == "extract") return mention_;
    last_examples = r.slots.at("examples");
    return reply_;
  }
  std::string last_examples;

 private:
  std::string mention_, reply_;
};

}  // namespace

TEST_SUITE("geolocate") {
  TEST_CASE("string match extraction examples") {
    CHECK(texts(extract_string_match("Thumbnail 4 bed detached house for sale in Southfields, Rochester", matcher())) ==
          std::vector<std::string>{"Southfields", "Rochester"});
    CHECK(extract_string_match("Exterior house colors with brown roof 04", matcher()).empty());
    CHECK(texts(extract_string_match("buffalo grazing in the field", matcher())) == std::vector<std::string>{"buffalo"});
  }

  TEST_CASE("mention spans slice the caption") {
    const std::string caption = "From São Paulo to New York, via York.";
    const auto ms = extract_string_match(caption, matcher());
    REQUIRE(ms.size() == 3);
    for (const auto& m : ms) {
      CHECK(caption.substr(m.begin, m.end - m.begin) == m.text);
      CHECK(m.source == MentionSource::kStringMatch);
    }
    CHECK(ms[1].text == "New York");  // longest wins over "York"
  }

  TEST_CASE("stop words suppress single-token matches only") {
    std::unordered_set<std::string> stop{"buffalo"};
    const StringMatcher custom(index(), stop);
    CHECK(extract_string_match("buffalo grazing", custom).empty());
    CHECK(extract_string_match("a nice day", matcher()).empty());
    CHECK(texts(extract_string_match("New York City marathon", custom)) == std::vector<std::string>{"New York City"});
  }

  TEST_CASE("string match geolocation examples") {
    CHECK(country(geolocate_string_match("a weekend in Paris", index(), matcher())) == "France");
    CHECK_FALSE(geolocate_string_match("a cat on a sofa", index(), matcher()).has_country());
    CHECK(country(geolocate_string_match("Rules for using the toilet in Sochi", index(), matcher())) == "Russia");
    CHECK(country(geolocate_string_match("Happy boys at Copacabana Beach", index(), matcher())) == "Brazil");
  }

  TEST_CASE("golden captions") {
    std::ifstream in(fixtures::path("geolocate_golden.jsonl"));
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line);
      const std::string caption = j.at("caption");
      const auto p = geolocate_string_match(caption, index(), matcher());
      INFO(caption);
      if (j.at("mention").is_null()) {
        CHECK_FALSE(p.mention.has_value());
      } else {
        REQUIRE(p.mention.has_value());
        CHECK(p.mention->text == j.at("mention").get<std::string>());
      }
      CHECK(country(p) == (j.at("country").is_null() ? std::string() : j.at("country").get<std::string>()));
      ++n;
    }
    CHECK(n == 30);
  }

  TEST_CASE("gazetteer country missing from the table is flagged, not dropped") {
    const auto p = geolocate_string_match("huts at McMurdo Station", index(), matcher());
    CHECK_FALSE(p.has_country());
    CHECK(p.unmapped_code == "AQ");
    CHECK((p.flags & kFlagUnmapped) != 0);
  }

  TEST_CASE("provider extraction") {
    auto p = transcripts(
        R"({"template":"extract","text":"Jade Court Motor Lodge, hotel in Hokitika","reply":"Hokitika"})" "\n"
        R"({"template":"extract","text":"Kitchen and dining space","reply":"No"})" "\n");
    CHECK(extract_via_provider("Jade Court Motor Lodge, hotel in Hokitika", *p) == std::optional<std::string>("Hokitika"));
    CHECK_FALSE(extract_via_provider("Kitchen and dining space", *p).has_value());
    CHECK_FALSE(extract_via_provider("", *p).has_value());  // no provider call
  }

  TEST_CASE("erp prediction") {
    Scripted nz("Hokitika", "New Zealand");
    auto p = predict_country_erp("hotel in Hokitika", "Hokitika", index(), nz);
    CHECK(country(p) == "New Zealand");
    CHECK(p.method == Method::kErp);
    CHECK(nz.last_examples == "\nHokitika -> New Zealand");

    Scripted cam("Cambridge", "United Kingdom");
    p = predict_country_erp("punting in Cambridge", "Cambridge", index(), cam);
    CHECK(country(p) == "United Kingdom");
    REQUIRE(p.candidates.size() == 2);
    CHECK(p.candidates[0].entry->country_code != p.candidates[1].entry->country_code);
    CHECK(*p.provider_raw == "United Kingdom");

    Scripted uk("Cambridge", "UK");
    CHECK(country(predict_country_erp("punting in Cambridge", "Cambridge", index(), uk)) == "United Kingdom");

    Scripted junk("Cambridge", "Wakanda");
    p = predict_country_erp("x", "Cambridge", index(), junk);
    CHECK_FALSE(p.has_country());
    CHECK((p.flags & kFlagUnrecognized) != 0);

    Scripted none("Zzyzx", "no");
    predict_country_erp("x", "Zzyzx", index(), none);
    CHECK(none.last_examples == "\n(no matching locations found)");
  }

  TEST_CASE("geolocate_caption dispatch") {
    auto p = transcripts(
        R"({"template":"extract","text":"Car on Rent in Vadodara with Driver","reply":"Vadodara"})" "\n"
        R"({"template":"predict","text":"Car on Rent in Vadodara with Driver","reply":"India"})" "\n"
        R"({"template":"zero_shot","text":"Car on Rent in Vadodara with Driver","reply":"india"})" "\n"
        R"({"template":"icl","text":"Car on Rent in Vadodara with Driver","reply":"India"})" "\n");
    GeolocateConfig cfg;
    cfg.index = &index();
    cfg.matcher = &matcher();
    cfg.provider = p;
    cfg.icl_examples = "\na -> b";
    CaptionRecord rec{"r1", "Car on Rent in Vadodara with Driver", "car", "en", {}, {}};
    for (auto m : {Method::kStringMatch, Method::kZeroShot, Method::kErp, Method::kIcl}) {
      cfg.method = m;
      const auto pred = geolocate_caption(rec, cfg);
      CHECK_MESSAGE(country(pred) == "India", to_string(m));
      CHECK(pred.method == m);
      if (m == Method::kErp) CHECK(pred.mention.has_value());
    }
    rec.caption = "";
    for (auto m : {Method::kStringMatch, Method::kZeroShot, Method::kErp, Method::kIcl}) {
      cfg.method = m;
      const auto pred = geolocate_caption(rec, cfg);
      CHECK_FALSE(pred.has_country());
      CHECK_FALSE(pred.provider_error());
    }
  }

  TEST_CASE("provider failures become provider_error predictions") {
    GeolocateConfig cfg;
    cfg.method = Method::kErp;
    cfg.index = &index();
    cfg.provider = transcripts("");
    const auto p = geolocate_caption({"r", "somewhere", "", "en", {}, {}}, cfg);
    CHECK(p.provider_error());
    CHECK_FALSE(p.has_country());
    CHECK_FALSE(p.error.empty());
    cfg.provider = nullptr;
    CHECK_THROWS_AS(geolocate_caption({"r", "somewhere", "", "en", {}, {}}, cfg), ConfigError);
  }

  TEST_CASE("translation runs before geolocation for other languages") {
    auto p = transcripts(
        R"({"template":"translate","text":"Ein Hund in Sotschi","reply":"A dog in Sochi"})" "\n");
    GeolocateConfig cfg;
    cfg.method = Method::kStringMatch;
    cfg.index = &index();
    cfg.matcher = &matcher();
    cfg.translator = std::make_shared<ProviderTranslator>(p);
    const auto de = geolocate_caption({"r", "Ein Hund in Sotschi", "Hund", "de", {}, {}}, cfg);
    CHECK(country(de) == "Russia");
    CHECK((de.flags & kFlagTranslated) != 0);
    const auto en = geolocate_caption({"r", "A dog in Sochi", "dog", "en-GB", {}, {}}, cfg);
    CHECK((en.flags & kFlagTranslated) == 0);
  }

  TEST_CASE("property: erp with the echo provider matches string match on the same mention") {
    // Provider-extracted mention = the string matcher's first mention.
    const std::vector<std::string> captions{"Tokyo tower",       "Cambridge colleges", "Paris, Texas",
                                            "lunch in Rochester", "Rome at night",     "Manchester rain",
                                            "Birmingham canals",  "London calling",    "Baroda palace",
                                            "Hanoi streets",      "a cat on a sofa",   "Sydney harbour"};
    std::string lines;
    for (const auto& c : captions) {
      const auto ms = extract_string_match(c, matcher());
      lines += nlohmann::json{{"template", "extract"}, {"text", c}, {"reply", ms.empty() ? "no" : ms[0].text}}.dump() + "\n";
    }
    GeolocateConfig erp;
    erp.method = Method::kErp;
    erp.index = &index();
    erp.provider = std::make_shared<EchoTopCandidateProvider>(transcripts(lines));
    for (const auto& c : captions) {
      CHECK_MESSAGE(country(geolocate_caption({"r", c, "", "en", {}, {}}, erp)) ==
                        country(geolocate_string_match(c, index(), matcher())),
                    c);
    }
  }

  TEST_CASE("icl exemplars") {
    const auto ex = load_icl_examples(fixtures::path("icl_examples.jsonl"));
    REQUIRE(ex.size() == 3);
    CHECK(ex[2].country.empty());
    CHECK(format_icl_examples(ex) ==
          "\na dog walking along the Seine in Paris -> France\nbreakfast at a diner in Ohio -> United States"
          "\na sunny beach somewhere in the caribbean -> no");
  }

  TEST_CASE("flags and methods round-trip through names") {
    for (auto m : {Method::kStringMatch, Method::kZeroShot, Method::kErp, Method::kIcl})
      CHECK(method_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(method_from_string("ner"), ConfigError);
    const auto names = flag_names(kFlagProviderError | kFlagTranslated);
    CHECK(names == std::vector<std::string>{"provider_error", "translated"});
    for (const auto& n : names) CHECK(flag_from_name(n) != 0);
  }
}
