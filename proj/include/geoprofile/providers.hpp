#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "geoprofile/prompts.hpp"

namespace geoprofile {

// A rendered prompt plus the template and slots it came from. Recorded
// transcripts and the response cache key on (template_id, slots); the HTTP
// backend only sees `prompt`.
struct PromptRequest {
  std::string template_id;
  SlotMap slots;
  std::string prompt;
};

PromptRequest make_request(PromptKind kind, SlotMap slots);

// Contract: one prompt in, one text reply out, deterministic decoding.
// Implementations must tolerate concurrent complete() calls. Failures throw
// ProviderError.
class TextCompletionProvider {
 public:
  virtual ~TextCompletionProvider() = default;
  virtual std::string complete(const PromptRequest& request) = 0;
};

// Replays replies captured earlier. Transcript lines are JSON objects
// `{"template": id, "text": caption, "reply": string}`; an optional "slots"
// object narrows the match further (every listed slot must equal the
// request's). A request with no recorded reply is a non-retryable error.
class RecordedTranscriptProvider : public TextCompletionProvider {
 public:
  struct Entry {
    std::string template_id;
    SlotMap slots;  // always contains "text"
    std::string reply;
  };

  explicit RecordedTranscriptProvider(std::vector<Entry> entries);
  static RecordedTranscriptProvider from_jsonl(std::istream& in);
  static RecordedTranscriptProvider from_file(const std::filesystem::path& path);

  std::string complete(const PromptRequest& request) override;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_key_;  // template + text
};

// Answers predict prompts with the country of the first `location -> country`
// line in the examples slot (or "no" when the slot holds no such line).
// Other templates go to `fallback`, or fail when there is none.
class EchoTopCandidateProvider : public TextCompletionProvider {
 public:
  explicit EchoTopCandidateProvider(std::shared_ptr<TextCompletionProvider> fallback = nullptr);
  std::string complete(const PromptRequest& request) override;

 private:
  std::shared_ptr<TextCompletionProvider> fallback_;
};

struct HttpProviderConfig {
  std::string endpoint;  // http[s]://host[:port]/path
  std::string auth_env;  // environment variable holding a bearer token; empty = no auth
  std::chrono::milliseconds timeout{30000};
};

// POSTs `{"prompt": ..., "temperature": 0}` and reads `{"text": ...}`.
// Transport failures, 429 and 5xx are retryable; other statuses and
// malformed bodies are not.
class HttpCompletionProvider : public TextCompletionProvider {
 public:
  explicit HttpCompletionProvider(HttpProviderConfig config);
  std::string complete(const PromptRequest& request) override;

 private:
  HttpProviderConfig config_;
  std::string origin_;  // scheme://host:port
  std::string path_;
  std::string token_;
};

// Retries retryable errors up to `max_retries` extra attempts with
// exponential backoff starting at `backoff`.
class RetryingProvider : public TextCompletionProvider {
 public:
  RetryingProvider(std::shared_ptr<TextCompletionProvider> inner, int max_retries,
                   std::chrono::milliseconds backoff = std::chrono::milliseconds(200));
  std::string complete(const PromptRequest& request) override;

 private:
  std::shared_ptr<TextCompletionProvider> inner_;
  int max_retries_;
  std::chrono::milliseconds backoff_;
};

// Caps the number of in-flight calls to `inner`.
class BoundedProvider : public TextCompletionProvider {
 public:
  BoundedProvider(std::shared_ptr<TextCompletionProvider> inner, int limit);
  std::string complete(const PromptRequest& request) override;

 private:
  std::shared_ptr<TextCompletionProvider> inner_;
  std::counting_semaphore<> slots_;
};

// Hash of (template id, slots): the cache key.
std::string request_key(const PromptRequest& request);

// Append-only reply cache. The file starts with a header line
// `{"format":"geoprofile-provider-cache","version":1}` followed by one
// `{"key","template","prompt","reply"}` object per line. Later lines win on
// duplicate keys; a torn final line (crash mid-write) is ignored.
class ProviderCache {
 public:
  static constexpr int kVersion = 1;

  // Opens or creates the file. Throws FormatError on a foreign or newer
  // header.
  explicit ProviderCache(const std::filesystem::path& path);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const PromptRequest& request, const std::string& reply);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> replies_;
  std::ofstream out_;
};

class CachingProvider : public TextCompletionProvider {
 public:
  CachingProvider(std::shared_ptr<TextCompletionProvider> inner, std::shared_ptr<ProviderCache> cache);
  std::string complete(const PromptRequest& request) override;

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  std::shared_ptr<TextCompletionProvider> inner_;
  std::shared_ptr<ProviderCache> cache_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

// Translation into English for non-English captions.
class Translator {
 public:
  virtual ~Translator() = default;
  virtual std::string translate(const std::string& text, const std::string& language) = 0;
};

// Translation through a completion provider using the translate template.
class ProviderTranslator : public Translator {
 public:
  explicit ProviderTranslator(std::shared_ptr<TextCompletionProvider> provider);
  std::string translate(const std::string& text, const std::string& language) override;

 private:
  std::shared_ptr<TextCompletionProvider> provider_;
};

}  // namespace geoprofile
