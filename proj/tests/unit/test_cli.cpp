#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "corpus.hpp"
#include "fixtures.hpp"
#include "geoprofile/embeddings.hpp"
#include "geoprofile/eval.hpp"
#include "geoprofile/geolocate.hpp"

using namespace geoprofile;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

Run cli(const fixtures::TempDir& tmp, const std::vector<std::string>& args) {
  std::string cmd = quote(GEOPROFILE_CLI);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " > " + quote((tmp / "stdout.txt").string()) + " 2> " + quote((tmp / "stderr.txt").string());
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = fixtures::read(tmp / "stdout.txt");
  r.err = fixtures::read(tmp / "stderr.txt");
  return r;
}

json read_json(const std::filesystem::path& p) { return json::parse(fixtures::read(p)); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("build-gazetteer") {
    fixtures::TempDir tmp;
    const auto src = fixtures::path("gazetteer_tiny.tsv").string();
    const auto cache = (tmp / "g.cache").string();
    auto r = cli(tmp, {"build-gazetteer", "--source", src, "--cache", cache, "--stats", (tmp / "s.json").string()});
    CHECK(r.code == 0);
    CHECK(r.out == "3 entries, 0 skipped\n");
    CHECK(read_json(tmp / "s.json")["entries"] == 3);
    r = cli(tmp, {"build-gazetteer", "--source", src, "--cache", cache});
    CHECK(r.code == 0);
    CHECK(r.out == "3 entries, 0 skipped (cache reused)\n");
    r = cli(tmp, {"build-gazetteer", "--source", (tmp / "missing.tsv").string(), "--cache", (tmp / "x").string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("error:") != std::string::npos);
  }

  TEST_CASE("usage errors") {
    fixtures::TempDir tmp;
    CHECK(cli(tmp, {}).code != 0);
    CHECK(cli(tmp, {"no-such-command"}).code != 0);
    CHECK(cli(tmp, {"metrics", "vendi"}).code != 0);
    CHECK(cli(tmp, {"--help"}).code == 0);
  }

  TEST_CASE("profile with resume and the error ceiling") {
    fixtures::TempDir tmp;
    const auto f = corpus::generate(tmp.path(), 80, 2);
    json doc{{"version", 1},
             {"gazetteer", fixtures::path("gazetteer_small.tsv").string()},
             {"inputs", json::array({f.captions.string()})},
             {"output_dir", (tmp / "out").string()},
             {"profile", {{"checkpoint_every", 10}}}};
    fixtures::write(tmp / "c.json", doc.dump());
    auto r = cli(tmp, {"profile", "--config", (tmp / "c.json").string()});
    CHECK(r.code == 0);
    const auto report = fixtures::read(tmp / "out" / "report.json");
    std::filesystem::remove_all(tmp / "out");
    r = cli(tmp, {"profile", "--config", (tmp / "c.json").string(), "--halt-after", "35"});
    CHECK(r.code == 0);
    CHECK(r.out.find("halted after") != std::string::npos);
    r = cli(tmp, {"profile", "--config", (tmp / "c.json").string(), "--resume"});
    CHECK(r.code == 0);
    CHECK(fixtures::read(tmp / "out" / "report.json") == report);

    fixtures::write(tmp / "empty.jsonl", "");
    doc["method"] = "zero_shot";
    doc["provider"] = {{"kind", "recorded"}, {"transcripts", (tmp / "empty.jsonl").string()}, {"retries", 0}};
    fixtures::write(tmp / "bad.json", doc.dump());
    CHECK(cli(tmp, {"profile", "--config", (tmp / "bad.json").string()}).code == 3);

    fixtures::write(tmp / "broken.json", "{\"version\": 1}");
    r = cli(tmp, {"profile", "--config", (tmp / "broken.json").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("'inputs' is required") != std::string::npos);
  }

  TEST_CASE("eval matches the library comparison") {
    fixtures::TempDir tmp;
    json doc{{"version", 1},
             {"gazetteer", fixtures::path("gazetteer_small.tsv").string()},
             {"inputs", json::array({fixtures::path("eval_ambiguous.jsonl").string()})},
             {"output_dir", (tmp / "out").string()},
             {"provider", {{"kind", "recorded"}, {"transcripts", fixtures::path("transcripts_eval.jsonl").string()}}}};
    fixtures::write(tmp / "c.json", doc.dump());
    const auto r = cli(tmp, {"eval", "--config", (tmp / "c.json").string(), "--testset",
                             fixtures::path("eval_ambiguous.jsonl").string(), "--methods", "string_match,erp", "--out",
                             (tmp / "cmp.csv").string(), "--detail", (tmp / "d.json").string()});
    REQUIRE(r.code == 0);

    const auto idx = load_gazetteer_file(fixtures::path("gazetteer_small.tsv"));
    const StringMatcher matcher(idx);
    auto provider = std::make_shared<RecordedTranscriptProvider>(
        RecordedTranscriptProvider::from_file(fixtures::path("transcripts_eval.jsonl")));
    const auto run = [&](Method m) {
      return [&, m](const std::string& c) {
        GeolocateConfig g;
        g.method = m;
        g.index = &idx;
        g.matcher = &matcher;
        g.provider = provider;
        CaptionRecord rec;
        rec.caption = c;
        return geolocate_caption(rec, g);
      };
    };
    const auto rows = compare_methods({{"string_match", "pre_llm", run(Method::kStringMatch)}, {"erp", "llm", run(Method::kErp)}},
                                      load_testset(fixtures::path("eval_ambiguous.jsonl")));
    std::ostringstream want;
    write_comparison_csv(want, rows);
    CHECK(fixtures::read(tmp / "cmp.csv") == want.str());
    CHECK(r.out == want.str());
    const auto detail = read_json(tmp / "d.json");
    CHECK(detail.size() == 2);
    CHECK(detail[0]["method"] == "erp");
    CHECK(detail[0]["tp"] == 15);
  }

  TEST_CASE("metrics subcommands") {
    fixtures::TempDir tmp;
    EmbeddingMatrix eye;
    eye.rows = 5;
    eye.dim = 5;
    eye.data.assign(25, 0.0f);
    for (int i = 0; i < 5; ++i) eye.data[i * 6] = 1.0f;
    write_embeddings(tmp / "eye.bin", eye);
    auto r = cli(tmp, {"metrics", "vendi", "--embeddings", (tmp / "eye.bin").string(), "--out", (tmp / "v.json").string()});
    CHECK(r.code == 0);
    CHECK(std::abs(read_json(tmp / "v.json")["vendi"].get<double>() - 5.0) < 1e-9);

    r = cli(tmp, {"metrics", "pr", "--real", (tmp / "eye.bin").string(), "--generated", (tmp / "eye.bin").string(),
                  "--k", "1", "--out", (tmp / "pr.json").string()});
    CHECK(r.code == 0);
    CHECK(read_json(tmp / "pr.json")["precision"] == 1.0);

    fixtures::write(tmp / "a.csv", "country,count\nJapan,10\nFrance,30\n");
    r = cli(tmp, {"metrics", "misalign", "--dataset", (tmp / "a.csv").string(), "--reference", (tmp / "a.csv").string(),
                  "--out", (tmp / "m.json").string()});
    CHECK(r.code == 0);
    const auto m = read_json(tmp / "m.json");
    CHECK(m["over"].empty());
    CHECK(m["under"].empty());
    CHECK(m["r"] == 1.5);

    fixtures::write(tmp / "x.csv", "country,value\nA,1\nB,2\nC,3\nD,4\nE,5\n");
    fixtures::write(tmp / "y.csv", "country,value\nA,3\nB,1\nC,2\nD,4\nE,5\nF,9\n");
    r = cli(tmp, {"metrics", "spearman", "--x", (tmp / "x.csv").string(), "--y", (tmp / "y.csv").string(), "--out",
                  (tmp / "s.json").string()});
    CHECK(r.code == 0);
    const auto s = read_json(tmp / "s.json");
    CHECK(std::abs(s["rho"].get<double>() - 0.7) < 1e-12);
    CHECK(s["n"] == 5);
  }

  TEST_CASE("annotate-stats") {
    fixtures::TempDir tmp;
    const auto r = cli(tmp, {"annotate-stats", "--votes", fixtures::path("votes_small.csv").string(), "--out",
                             (tmp / "a.json").string()});
    CHECK(r.code == 0);
    const auto j = read_json(tmp / "a.json");
    CHECK(std::abs(j["fleiss_kappa"].get<double>() - 1.0 / 3.0) < 1e-12);
    CHECK(std::abs(j["agreement_overall"].get<double>() - 200.0 / 3.0) < 1e-12);
    CHECK(j["majority"] == json{{"a", 1}, {"b", 1}, {"c", 0}, {"d", 0}});
  }

  TEST_CASE("train-filter") {
    fixtures::TempDir tmp;
    const auto f = corpus::generate(tmp.path(), 120, 4);
    std::string labels = "row,label\n";
    for (int i = 0; i < 120; ++i) labels += std::to_string(i) + "," + (i % 2 == 0 ? "1" : "0") + "\n";
    fixtures::write(tmp / "labels.csv", labels);
    const auto r = cli(tmp, {"train-filter", "--embeddings", f.embeddings.string(), "--labels",
                             (tmp / "labels.csv").string(), "--model", (tmp / "m.bin").string(), "--metrics",
                             (tmp / "tm.json").string()});
    CHECK(r.code == 0);
    CHECK(std::filesystem::exists(tmp / "m.bin"));
    CHECK(read_json(tmp / "tm.json")["f1"].get<double>() >= 0.95);
  }

  TEST_CASE("synth-testset") {
    fixtures::TempDir tmp;
    const auto r = cli(tmp, {"synth-testset", "--gazetteer", fixtures::path("gazetteer_tiny.tsv").string(), "--templates",
                             fixtures::path("templates.jsonl").string(), "--out", (tmp / "t.jsonl").string()});
    CHECK(r.code == 0);
    CHECK(r.out == "2 captions\n");
    const auto t = load_testset(tmp / "t.jsonl");
    REQUIRE(t.size() == 2);
    CHECK(t[0].caption.find("Alpha Town") != std::string::npos);
    CHECK(t[1].gold->iso2 == "DE");
  }
}
