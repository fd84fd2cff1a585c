#include "geoprofile/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "geoprofile/checksum.hpp"
#include "geoprofile/error.hpp"

namespace geoprofile {
namespace {

using nlohmann::json;

// Collects problems instead of stopping at the first.
class Checker {
 public:
  explicit Checker(std::filesystem::path base) : base_(std::move(base)) {}

  void problem(std::string msg) { problems_.push_back(std::move(msg)); }
  const std::vector<std::string>& problems() const { return problems_; }

  void known_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
      if (!allowed.contains(key)) problem("unknown key '" + where + key + "'");
    }
  }

  template <typename T>
  std::optional<T> get(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      problem("'" + where + key + "' has the wrong type");
      return std::nullopt;
    }
  }

  std::optional<std::filesystem::path> path(const json& obj, const std::string& key, const std::string& where,
                                            bool must_exist = true) {
    const auto raw = get<std::string>(obj, key, where);
    if (!raw) return std::nullopt;
    if (raw->empty()) {
      problem("'" + where + key + "' is empty");
      return std::nullopt;
    }
    std::filesystem::path p(*raw);
    if (p.is_relative()) p = base_ / p;
    if (must_exist && !std::filesystem::exists(p)) problem("'" + where + key + "' does not exist: " + p.string());
    return p;
  }

 private:
  std::filesystem::path base_;
  std::vector<std::string> problems_;
};

}  // namespace

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  Checker c(base_dir);
  RunConfig cfg;
  c.known_keys(doc,
               {"version", "gazetteer", "gazetteer_cache", "min_population", "countries", "method", "provider",
                "icl_examples", "translation", "entities", "inputs", "filter", "indicators", "profile", "r", "k",
                "min_count", "seed", "output_dir"},
               "");

  const auto version = c.get<int>(doc, "version", "");
  if (!version) c.problem("'version' is required");
  else if (*version != RunConfig::kVersion) c.problem("unsupported config version " + std::to_string(*version));

  if (auto p = c.path(doc, "gazetteer", "")) cfg.gazetteer = *p;
  else if (!doc.contains("gazetteer")) c.problem("'gazetteer' is required");
  cfg.gazetteer_cache = c.path(doc, "gazetteer_cache", "", false);
  if (auto v = c.get<std::uint64_t>(doc, "min_population", "")) cfg.min_population = *v;
  cfg.countries = c.path(doc, "countries", "");

  if (auto m = c.get<std::string>(doc, "method", "")) {
    try {
      cfg.method = method_from_string(*m);
    } catch (const ConfigError& e) {
      c.problem(e.what());
    }
  }

  if (doc.contains("provider") && !doc["provider"].is_null()) {
    const auto& pj = doc["provider"];
    if (!pj.is_object()) {
      c.problem("'provider' must be an object");
    } else {
      c.known_keys(pj,
                   {"kind", "transcripts", "endpoint", "auth_env", "timeout_ms", "cache", "concurrency", "retries",
                    "backoff_ms"},
                   "provider.");
      ProviderSettings ps;
      ps.kind = c.get<std::string>(pj, "kind", "provider.").value_or("");
      ps.transcripts = c.path(pj, "transcripts", "provider.");
      ps.endpoint = c.get<std::string>(pj, "endpoint", "provider.").value_or("");
      ps.auth_env = c.get<std::string>(pj, "auth_env", "provider.").value_or("");
      ps.timeout_ms = c.get<int>(pj, "timeout_ms", "provider.").value_or(ps.timeout_ms);
      ps.cache = c.path(pj, "cache", "provider.", false);
      ps.concurrency = c.get<int>(pj, "concurrency", "provider.").value_or(ps.concurrency);
      ps.retries = c.get<int>(pj, "retries", "provider.").value_or(ps.retries);
      ps.backoff_ms = c.get<int>(pj, "backoff_ms", "provider.").value_or(ps.backoff_ms);
      if (ps.kind != "recorded" && ps.kind != "echo" && ps.kind != "http") {
        c.problem("'provider.kind' must be recorded, echo or http");
      }
      if (ps.kind == "recorded" && !ps.transcripts) c.problem("recorded provider needs 'provider.transcripts'");
      if (ps.kind == "http" && ps.endpoint.empty()) c.problem("http provider needs 'provider.endpoint'");
      if (ps.concurrency < 1) c.problem("'provider.concurrency' must be at least 1");
      if (ps.retries < 0) c.problem("'provider.retries' must be non-negative");
      if (ps.timeout_ms < 1) c.problem("'provider.timeout_ms' must be positive");
      if (ps.backoff_ms < 0) c.problem("'provider.backoff_ms' must be non-negative");
      cfg.provider = std::move(ps);
    }
  }
  if (cfg.method != Method::kStringMatch && !cfg.provider) {
    c.problem("method " + std::string(to_string(cfg.method)) + " needs a 'provider' section");
  }

  cfg.icl_examples = c.path(doc, "icl_examples", "");
  if (cfg.method == Method::kIcl && !cfg.icl_examples) c.problem("method icl needs 'icl_examples'");
  cfg.translation = c.get<bool>(doc, "translation", "").value_or(false);
  if (cfg.translation && !cfg.provider) c.problem("'translation' needs a 'provider' section");

  cfg.entities = c.get<std::vector<std::string>>(doc, "entities", "").value_or(std::vector<std::string>{});

  if (doc.contains("inputs")) {
    if (!doc["inputs"].is_array() || doc["inputs"].empty()) {
      c.problem("'inputs' must be a non-empty array of paths");
    } else {
      for (std::size_t i = 0; i < doc["inputs"].size(); ++i) {
        json holder{{"input", doc["inputs"][i]}};
        if (auto p = c.path(holder, "input", "inputs[" + std::to_string(i) + "]/")) cfg.inputs.push_back(*p);
      }
    }
  } else {
    c.problem("'inputs' is required");
  }

  if (doc.contains("filter") && !doc["filter"].is_null()) {
    const auto& fj = doc["filter"];
    c.known_keys(fj, {"embeddings", "model"}, "filter.");
    cfg.filter_embeddings = c.path(fj, "embeddings", "filter.");
    cfg.filter_model = c.path(fj, "model", "filter.");
    if (!cfg.filter_embeddings) c.problem("'filter.embeddings' is required when 'filter' is present");
  }

  if (doc.contains("indicators") && !doc["indicators"].is_null()) {
    if (!doc["indicators"].is_object()) {
      c.problem("'indicators' must map names to CSV paths");
    } else {
      for (const auto& [name, value] : doc["indicators"].items()) {
        if (auto p = c.path(doc["indicators"], name, "indicators.")) cfg.indicators[name] = *p;
      }
    }
  }

  if (doc.contains("profile") && !doc["profile"].is_null()) {
    const auto& pj = doc["profile"];
    c.known_keys(pj, {"top_n", "checkpoint_every", "max_provider_error_rate", "workers", "diversity", "vendi_cap"},
                 "profile.");
    cfg.top_n = c.get<std::size_t>(pj, "top_n", "profile.").value_or(cfg.top_n);
    cfg.checkpoint_every = c.get<std::uint64_t>(pj, "checkpoint_every", "profile.").value_or(cfg.checkpoint_every);
    cfg.max_provider_error_rate =
        c.get<double>(pj, "max_provider_error_rate", "profile.").value_or(cfg.max_provider_error_rate);
    cfg.workers = c.get<std::size_t>(pj, "workers", "profile.").value_or(cfg.workers);
    cfg.diversity = c.get<bool>(pj, "diversity", "profile.").value_or(false);
    cfg.vendi_cap = c.get<std::size_t>(pj, "vendi_cap", "profile.").value_or(cfg.vendi_cap);
    if (cfg.top_n == 0) c.problem("'profile.top_n' must be positive");
    if (cfg.checkpoint_every == 0) c.problem("'profile.checkpoint_every' must be positive");
    if (cfg.workers == 0) c.problem("'profile.workers' must be positive");
    if (cfg.vendi_cap == 0) c.problem("'profile.vendi_cap' must be positive");
    if (cfg.max_provider_error_rate < 0 || cfg.max_provider_error_rate > 1) {
      c.problem("'profile.max_provider_error_rate' must lie in [0, 1]");
    }
    if (cfg.diversity && !cfg.filter_embeddings) c.problem("'profile.diversity' needs 'filter.embeddings'");
  }

  cfg.r = c.get<double>(doc, "r", "").value_or(cfg.r);
  if (!(cfg.r > 1.0)) c.problem("'r' must exceed 1");
  cfg.k = c.get<std::size_t>(doc, "k", "").value_or(cfg.k);
  if (cfg.k == 0) c.problem("'k' must be positive");
  cfg.min_count = c.get<std::uint64_t>(doc, "min_count", "").value_or(cfg.min_count);
  cfg.seed = c.get<std::uint64_t>(doc, "seed", "").value_or(cfg.seed);
  if (auto p = c.path(doc, "output_dir", "", false)) cfg.output_dir = *p;
  else c.problem("'output_dir' is required");

  if (!c.problems().empty()) {
    std::ostringstream msg;
    msg << c.problems().size() << " configuration problem" << (c.problems().size() == 1 ? "" : "s") << ":";
    for (const auto& p : c.problems()) msg << "\n  - " << p;
    throw ConfigError(msg.str());
  }
  cfg.hash = sha256_hex(doc.dump());
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace geoprofile
