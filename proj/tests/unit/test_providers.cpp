#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "geoprofile/error.hpp"
#include "geoprofile/providers.hpp"

using namespace geoprofile;

namespace {

// Fails with the given retryability for the first `failures` calls.
class Flaky : public TextCompletionProvider {
 public:
  Flaky(int failures, bool retryable) : failures_(failures), retryable_(retryable) {}
  std::string complete(const PromptRequest&) override {
    if (calls++ < failures_) throw ProviderError("flaky", retryable_);
    return "ok";
  }
  std::atomic<int> calls{0};

 private:
  int failures_;
  bool retryable_;
};

class Counting : public TextCompletionProvider {
 public:
  std::string complete(const PromptRequest& r) override {
    ++calls;
    const int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --in_flight;
    return "reply:" + r.slots.at("text");
  }
  std::atomic<int> calls{0}, in_flight{0}, peak{0};
};

}  // namespace

TEST_SUITE("providers") {
  TEST_CASE("recorded transcripts") {
    std::istringstream in(
        R"({"template":"extract","text":"Kitchen and dining space","reply":"no"})" "\n"
        R"({"template":"predict","text":"x","slots":{"examples":"\na -> B"},"reply":"B"})" "\n"
        R"({"template":"predict","text":"x","reply":"fallback"})" "\n");
    auto p = RecordedTranscriptProvider::from_jsonl(in);
    CHECK(p.size() == 3);
    CHECK(p.complete(make_request(PromptKind::kExtract, {{"text", "Kitchen and dining space"}})) == "no");
    CHECK(p.complete(make_request(PromptKind::kPredict, {{"text", "x"}, {"examples", "\na -> B"}})) == "B");
    CHECK(p.complete(make_request(PromptKind::kPredict, {{"text", "x"}, {"examples", "\nc -> D"}})) == "fallback");
    try {
      p.complete(make_request(PromptKind::kExtract, {{"text", "unknown"}}));
      FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
      CHECK_FALSE(e.retryable());
    }
    std::istringstream bad("{not json}\n");
    CHECK_THROWS_AS(RecordedTranscriptProvider::from_jsonl(bad), FormatError);
  }

  TEST_CASE("echo provider returns the first candidate's country") {
    EchoTopCandidateProvider echo;
    CHECK(echo.complete(make_request(PromptKind::kPredict,
                                     {{"text", "t"}, {"examples", "\nTokyo -> Japan\nTokyo -> Papua New Guinea"}})) ==
          "Japan");
    CHECK(echo.complete(make_request(PromptKind::kPredict, {{"text", "t"}, {"examples", "\n(no matching locations found)"}})) ==
          "no");
    CHECK_THROWS_AS(echo.complete(make_request(PromptKind::kExtract, {{"text", "t"}})), ProviderError);
  }

  TEST_CASE("retries stop at the budget") {
    auto flaky = std::make_shared<Flaky>(2, true);
    RetryingProvider ok(flaky, 2, std::chrono::milliseconds(0));
    CHECK(ok.complete(make_request(PromptKind::kExtract, {{"text", "a"}})) == "ok");
    CHECK(flaky->calls == 3);

    auto worse = std::make_shared<Flaky>(5, true);
    RetryingProvider gives_up(worse, 2, std::chrono::milliseconds(0));
    CHECK_THROWS_AS(gives_up.complete(make_request(PromptKind::kExtract, {{"text", "a"}})), ProviderError);
    CHECK(worse->calls == 3);

    auto final_error = std::make_shared<Flaky>(5, false);
    RetryingProvider no_retry(final_error, 4, std::chrono::milliseconds(0));
    CHECK_THROWS_AS(no_retry.complete(make_request(PromptKind::kExtract, {{"text", "a"}})), ProviderError);
    CHECK(final_error->calls == 1);
  }

  TEST_CASE("bounded provider caps concurrency") {
    auto inner = std::make_shared<Counting>();
    BoundedProvider bounded(inner, 2);
    std::vector<std::jthread> threads;
    for (int i = 0; i < 8; ++i)
      threads.emplace_back([&, i] {
        for (int j = 0; j < 5; ++j) bounded.complete(make_request(PromptKind::kExtract, {{"text", std::to_string(i)}}));
      });
    threads.clear();
    CHECK(inner->calls == 40);
    CHECK(inner->peak <= 2);
  }

  TEST_CASE("request keys depend on template and every slot") {
    const auto a = make_request(PromptKind::kPredict, {{"text", "ab"}, {"examples", "c"}});
    const auto b = make_request(PromptKind::kPredict, {{"text", "a"}, {"examples", "bc"}});
    const auto c = make_request(PromptKind::kIcl, {{"text", "ab"}, {"examples", "c"}});
    CHECK(request_key(a) != request_key(b));
    CHECK(request_key(a) != request_key(c));
    CHECK(request_key(a) == request_key(make_request(PromptKind::kPredict, {{"examples", "c"}, {"text", "ab"}})));
  }

  TEST_CASE("cache survives reopen and ignores a torn tail") {
    fixtures::TempDir tmp;
    const auto path = tmp / "cache.jsonl";
    auto inner = std::make_shared<Counting>();
    {
      CachingProvider p(inner, std::make_shared<ProviderCache>(path));
      CHECK(p.complete(make_request(PromptKind::kExtract, {{"text", "one"}})) == "reply:one");
      CHECK(p.complete(make_request(PromptKind::kExtract, {{"text", "one"}})) == "reply:one");
      CHECK(p.hits() == 1);
      CHECK(p.misses() == 1);
    }
    fixtures::write(path, fixtures::read(path) + "{\"key\":\"abc\",\"rep");
    {
      auto cache = std::make_shared<ProviderCache>(path);
      CHECK(cache->size() == 1);
      CachingProvider p(inner, cache);
      CHECK(p.complete(make_request(PromptKind::kExtract, {{"text", "one"}})) == "reply:one");
      CHECK(inner->calls == 1);
    }
    fixtures::write(tmp / "foreign.jsonl", "{\"format\":\"other\",\"version\":1}\n");
    CHECK_THROWS_AS(ProviderCache(tmp / "foreign.jsonl"), FormatError);
    fixtures::write(tmp / "newer.jsonl", "{\"format\":\"geoprofile-provider-cache\",\"version\":9}\n");
    CHECK_THROWS_AS(ProviderCache(tmp / "newer.jsonl"), FormatError);
  }

  TEST_CASE("concurrent cache writers") {
    fixtures::TempDir tmp;
    auto inner = std::make_shared<Counting>();
    CachingProvider p(inner, std::make_shared<ProviderCache>(tmp / "c.jsonl"));
    std::vector<std::jthread> threads;
    for (int i = 0; i < 6; ++i)
      threads.emplace_back([&] {
        for (int j = 0; j < 20; ++j) p.complete(make_request(PromptKind::kExtract, {{"text", std::to_string(j)}}));
      });
    threads.clear();
    CHECK(p.hits() + p.misses() == 120);
    ProviderCache reopened(tmp / "c.jsonl");
    CHECK(reopened.size() == 20);
  }

  TEST_CASE("http provider") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string seen_auth;
    server.Post("/v1/complete", [&](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      seen_auth = req.get_header_value("Authorization");
      const auto body = nlohmann::json::parse(req.body);
      const std::string prompt = body.at("prompt");
      if (body.at("temperature") != 0) {
        res.status = 400;
        return;
      }
      if (prompt.find("Text: busy") != std::string::npos) {
        res.status = 503;
        return;
      }
      if (prompt.find("Text: bad") != std::string::npos) {
        res.status = 400;
        return;
      }
      if (prompt.find("Text: garbled") != std::string::npos) {
        res.set_content("{\"nope\":1}", "application/json");
        return;
      }
      res.set_content(nlohmann::json{{"text", "Japan"}}.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::jthread runner([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("GEOPROFILE_TEST_TOKEN", "secret", 1);
    HttpProviderConfig cfg{"http://127.0.0.1:" + std::to_string(port) + "/v1/complete", "GEOPROFILE_TEST_TOKEN",
                           std::chrono::milliseconds(2000)};
    HttpCompletionProvider http(cfg);
    CHECK(http.complete(make_request(PromptKind::kZeroShot, {{"text", "Tokyo"}})) == "Japan");
    CHECK(seen_auth == "Bearer secret");

    auto is_retryable = [&](const std::string& text) {
      try {
        http.complete(make_request(PromptKind::kZeroShot, {{"text", text}}));
      } catch (const ProviderError& e) {
        return e.retryable() ? 1 : 0;
      }
      return -1;
    };
    CHECK(is_retryable("busy") == 1);
    CHECK(is_retryable("bad") == 0);
    CHECK(is_retryable("garbled") == 0);

    server.stop();
    runner.join();
    CHECK(is_retryable("anything") == 1);  // connection refused

    ::unsetenv("GEOPROFILE_TEST_UNSET");
    CHECK_THROWS_AS(HttpCompletionProvider({cfg.endpoint, "GEOPROFILE_TEST_UNSET", cfg.timeout}), ConfigError);
    CHECK_THROWS(HttpCompletionProvider({"not a url", "", cfg.timeout}));
  }

  TEST_CASE("translator trims the reply and skips blank text") {
    std::istringstream in(R"({"template":"translate","text":"Hund in Berlin","slots":{"language":"de"},"reply":" dog in Berlin \n"})" "\n");
    auto p = std::make_shared<RecordedTranscriptProvider>(RecordedTranscriptProvider::from_jsonl(in));
    ProviderTranslator t(p);
    CHECK(t.translate("Hund in Berlin", "de") == "dog in Berlin");
    CHECK(t.translate("  ", "de") == "  ");
  }
}
