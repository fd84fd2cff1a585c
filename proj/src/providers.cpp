#include "geoprofile/providers.hpp"

#include <thread>

#include <json.hpp>

#include "geoprofile/checksum.hpp"
#include "geoprofile/error.hpp"
#include "geoprofile/text.hpp"

namespace geoprofile {
namespace {

using nlohmann::json;

std::string transcript_key(std::string_view template_id, std::string_view text) {
  std::string key(template_id);
  key.push_back('\x1f');
  key.append(text);
  return key;
}

const std::string& text_slot(const PromptRequest& request) {
  static const std::string empty;
  const auto it = request.slots.find("text");
  return it == request.slots.end() ? empty : it->second;
}

}  // namespace

PromptRequest make_request(PromptKind kind, SlotMap slots) {
  PromptRequest request;
  request.template_id = std::string(template_id(kind));
  request.prompt = render_prompt(kind, slots);
  request.slots = std::move(slots);
  return request;
}

RecordedTranscriptProvider::RecordedTranscriptProvider(std::vector<Entry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto it = entries_[i].slots.find("text");
    if (it == entries_[i].slots.end()) throw FormatError("transcript entry without a text slot");
    by_key_[transcript_key(entries_[i].template_id, it->second)].push_back(i);
  }
}

RecordedTranscriptProvider RecordedTranscriptProvider::from_jsonl(std::istream& in) {
  std::vector<Entry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      Entry e;
      e.template_id = j.at("template").get<std::string>();
      if (j.contains("slots")) {
        for (const auto& [name, value] : j.at("slots").items()) e.slots[name] = value.get<std::string>();
      }
      if (j.contains("text")) e.slots["text"] = j.at("text").get<std::string>();
      e.reply = j.at("reply").get<std::string>();
      entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw FormatError("transcript line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return RecordedTranscriptProvider(std::move(entries));
}

RecordedTranscriptProvider RecordedTranscriptProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open transcript file " + path.string());
  return from_jsonl(in);
}

std::string RecordedTranscriptProvider::complete(const PromptRequest& request) {
  const auto it = by_key_.find(transcript_key(request.template_id, text_slot(request)));
  if (it != by_key_.end()) {
    for (const auto idx : it->second) {
      const auto& entry = entries_[idx];
      bool match = true;
      for (const auto& [name, value] : entry.slots) {
        const auto slot = request.slots.find(name);
        if (slot == request.slots.end() || slot->second != value) {
          match = false;
          break;
        }
      }
      if (match) return entry.reply;
    }
  }
  throw ProviderError("no recorded reply for template '" + request.template_id + "' and text '" +
                          text_slot(request) + "'",
                      false);
}

EchoTopCandidateProvider::EchoTopCandidateProvider(std::shared_ptr<TextCompletionProvider> fallback)
    : fallback_(std::move(fallback)) {}

std::string EchoTopCandidateProvider::complete(const PromptRequest& request) {
  if (request.template_id == template_id(PromptKind::kPredict)) {
    const auto it = request.slots.find("examples");
    if (it == request.slots.end()) return "no";
    std::string_view rest = it->second;
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      const std::string_view line = rest.substr(0, nl);
      rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
      const auto arrow = line.rfind(" -> ");
      if (arrow != std::string_view::npos) return std::string(trim(line.substr(arrow + 4)));
    }
    return "no";
  }
  if (fallback_) return fallback_->complete(request);
  throw ProviderError("echo provider cannot answer template '" + request.template_id + "'", false);
}

RetryingProvider::RetryingProvider(std::shared_ptr<TextCompletionProvider> inner, int max_retries,
                                   std::chrono::milliseconds backoff)
    : inner_(std::move(inner)), max_retries_(max_retries), backoff_(backoff) {
  if (max_retries_ < 0) throw ParameterError("retry budget must be non-negative");
}

std::string RetryingProvider::complete(const PromptRequest& request) {
  auto delay = backoff_;
  for (int attempt = 0;; ++attempt) {
    try {
      return inner_->complete(request);
    } catch (const ProviderError& e) {
      if (!e.retryable()) throw;
      if (attempt >= max_retries_) {
        throw ProviderError(std::string(e.what()) + " (gave up after " + std::to_string(attempt + 1) + " attempts)",
                            false);
      }
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

BoundedProvider::BoundedProvider(std::shared_ptr<TextCompletionProvider> inner, int limit)
    : inner_(std::move(inner)), slots_(limit > 0 ? limit : 1) {
  if (limit < 1) throw ParameterError("provider concurrency limit must be at least 1");
}

std::string BoundedProvider::complete(const PromptRequest& request) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{slots_};
  return inner_->complete(request);
}

std::string request_key(const PromptRequest& request) {
  // Length-prefixed fields so no slot value can forge another key.
  Sha256 h;
  const auto field = [&h](std::string_view s) {
    h.update(std::to_string(s.size()));
    h.update(":");
    h.update(s);
  };
  field(request.template_id);
  for (const auto& [name, value] : request.slots) {
    field(name);
    field(value);
  }
  return h.hex_digest();
}

ProviderCache::ProviderCache(const std::filesystem::path& path) {
  bool need_header = true;
  if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read provider cache " + path.string());
    std::string line;
    std::getline(in, line);
    json header;
    try {
      header = json::parse(line);
    } catch (const json::exception&) {
      throw FormatError("provider cache " + path.string() + " has no valid header");
    }
    if (header.value("format", "") != "geoprofile-provider-cache") {
      throw FormatError("provider cache " + path.string() + " has a foreign header");
    }
    if (header.value("version", 0) != kVersion) {
      throw FormatError("provider cache " + path.string() + " has unsupported version " +
                        std::to_string(header.value("version", 0)));
    }
    need_header = false;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      try {
        const json j = json::parse(line);
        replies_[j.at("key").get<std::string>()] = j.at("reply").get<std::string>();
      } catch (const json::exception&) {
        // torn write; the entry is recomputed on demand
      }
    }
  }
  out_.open(path, std::ios::app | std::ios::binary);
  if (!out_) throw IoError("cannot open provider cache " + path.string() + " for append");
  if (need_header) {
    out_ << json{{"format", "geoprofile-provider-cache"}, {"version", kVersion}}.dump() << '\n';
    out_.flush();
  }
}

std::optional<std::string> ProviderCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  const auto it = replies_.find(key);
  if (it == replies_.end()) return std::nullopt;
  return it->second;
}

void ProviderCache::put(const std::string& key, const PromptRequest& request, const std::string& reply) {
  const std::string line =
      json{{"key", key}, {"template", request.template_id}, {"prompt", request.prompt}, {"reply", reply}}.dump(
          -1, ' ', false, json::error_handler_t::replace);
  std::lock_guard lock(mu_);
  replies_[key] = reply;
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw IoError("write to provider cache failed");
}

std::size_t ProviderCache::size() const {
  std::lock_guard lock(mu_);
  return replies_.size();
}

CachingProvider::CachingProvider(std::shared_ptr<TextCompletionProvider> inner, std::shared_ptr<ProviderCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

std::string CachingProvider::complete(const PromptRequest& request) {
  const std::string key = request_key(request);
  if (auto hit = cache_->get(key)) {
    ++hits_;
    return *hit;
  }
  ++misses_;
  std::string reply = inner_->complete(request);
  cache_->put(key, request, reply);
  return reply;
}

ProviderTranslator::ProviderTranslator(std::shared_ptr<TextCompletionProvider> provider)
    : provider_(std::move(provider)) {}

std::string ProviderTranslator::translate(const std::string& text, const std::string& language) {
  if (trim(text).empty()) return text;
  const auto request = make_request(PromptKind::kTranslate, {{"text", text}, {"language", language}});
  return std::string(trim(provider_->complete(request)));
}

}  // namespace geoprofile
