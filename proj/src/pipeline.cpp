#include "geoprofile/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "geoprofile/embeddings.hpp"
#include "geoprofile/entity_filter.hpp"
#include "geoprofile/error.hpp"
#include "geoprofile/metrics.hpp"
#include "geoprofile/prompts.hpp"
#include "geoprofile/records.hpp"

namespace geoprofile {

using nlohmann::json;

std::shared_ptr<TextCompletionProvider> make_provider(const ProviderSettings& s,
                                                      std::shared_ptr<CachingProvider>* cache_layer) {
  std::shared_ptr<TextCompletionProvider> base;
  if (s.kind == "recorded") {
    if (!s.transcripts) throw ConfigError("recorded provider needs a transcripts file");
    base = std::make_shared<RecordedTranscriptProvider>(RecordedTranscriptProvider::from_file(*s.transcripts));
  } else if (s.kind == "echo") {
    std::shared_ptr<TextCompletionProvider> fallback;
    if (s.transcripts) {
      fallback = std::make_shared<RecordedTranscriptProvider>(RecordedTranscriptProvider::from_file(*s.transcripts));
    }
    base = std::make_shared<EchoTopCandidateProvider>(fallback);
  } else if (s.kind == "http") {
    base = std::make_shared<HttpCompletionProvider>(
        HttpProviderConfig{s.endpoint, s.auth_env, std::chrono::milliseconds(s.timeout_ms)});
  } else {
    throw ConfigError("unknown provider kind '" + s.kind + "'");
  }
  std::shared_ptr<TextCompletionProvider> p =
      std::make_shared<RetryingProvider>(base, s.retries, std::chrono::milliseconds(s.backoff_ms));
  p = std::make_shared<BoundedProvider>(p, s.concurrency);
  if (s.cache) {
    auto caching = std::make_shared<CachingProvider>(p, std::make_shared<ProviderCache>(*s.cache));
    if (cache_layer) *cache_layer = caching;
    p = caching;
  }
  return p;
}

Toolkit::Toolkit(const RunConfig& config) : config_(config) {
  if (config.countries) {
    owned_countries_ = std::make_unique<CountryTable>(CountryTable::from_csv_file(*config.countries));
    countries_ = owned_countries_.get();
  } else {
    countries_ = &CountryTable::builtin();
  }
  LoadOptions lo{config.min_population};
  if (config.gazetteer_cache) {
    auto res = load_or_build_index(config.gazetteer, *config.gazetteer_cache, lo);
    index_reused_ = res.reused;
    index_.emplace(std::move(res.index));
  } else {
    index_.emplace(load_gazetteer_file(config.gazetteer, lo));
  }
  if (config.method == Method::kStringMatch) matcher_ = std::make_unique<StringMatcher>(*index_);
  if (config.provider) {
    provider_ = make_provider(*config.provider, &cache_layer_);
    if (config.translation) translator_ = std::make_shared<ProviderTranslator>(provider_);
  }
  if (config.icl_examples) icl_block_ = format_icl_examples(load_icl_examples(*config.icl_examples));
}

GeolocateConfig Toolkit::geolocate_config() const { return geolocate_config(config_.method); }

GeolocateConfig Toolkit::geolocate_config(Method method) const {
  if (method == Method::kStringMatch && !matcher_) {
    const_cast<Toolkit*>(this)->matcher_ = std::make_unique<StringMatcher>(*index_);
  }
  if (method != Method::kStringMatch && !provider_) {
    throw ConfigError("method " + std::string(to_string(method)) + " needs a provider");
  }
  if (method == Method::kIcl && icl_block_.empty()) throw ConfigError("method icl needs exemplars");
  GeolocateConfig g;
  g.method = method;
  g.index = &*index_;
  g.matcher = matcher_.get();
  g.countries = countries_;
  g.provider = provider_;
  g.translator = translator_;
  g.icl_examples = icl_block_;
  return g;
}

namespace {

constexpr const char* kNoEntity = "(none)";
constexpr const char* kCheckpointFormat = "geoprofile-checkpoint";
constexpr int kCheckpointVersion = 1;

void write_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw IoError("error writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Streams accepted records across every input file in order.
class InputStream {
 public:
  explicit InputStream(const std::vector<std::filesystem::path>& paths) : paths_(paths) {}

  std::optional<CaptionRecord> next() {
    while (true) {
      if (reader_) {
        if (auto r = reader_->next()) return r;
        absorb();
      }
      if (pos_ >= paths_.size()) return std::nullopt;
      file_.close();
      file_.clear();
      file_.open(paths_[pos_]);
      if (!file_) throw IoError("cannot read input " + paths_[pos_].string());
      reader_.emplace(file_, paths_[pos_].string());
      ++pos_;
    }
  }

  // Totals over every file opened so far (call after exhausting input).
  CaptionReader::Stats stats() {
    if (reader_) absorb();
    return totals_;
  }

 private:
  void absorb() {
    const auto& s = reader_->stats();
    totals_.lines += s.lines;
    totals_.accepted += s.accepted;
    totals_.malformed += s.malformed;
    totals_.empty_caption += s.empty_caption;
    totals_.entity_missing += s.entity_missing;
    reader_.reset();
  }

  const std::vector<std::filesystem::path>& paths_;
  std::size_t pos_ = 0;
  std::ifstream file_;
  std::optional<CaptionReader> reader_;
  CaptionReader::Stats totals_;
};

enum class Fate { kPredicted, kOtherEntity, kNoEmbedding, kFilteredOut };

struct Outcome {
  Fate fate = Fate::kPredicted;
  CountryPrediction prediction;
};

// Mutable run state; everything a checkpoint has to carry.
struct State {
  std::uint64_t records_done = 0;
  std::uint64_t predictions_offset = 0;
  std::map<std::string, EntityDistribution> distributions;
  RunCounters counters;  // only the per-record counters live here
  std::map<std::string, std::map<std::string, std::vector<std::uint64_t>>> rows;  // entity -> country -> rows
};

std::string checkpoint_json(const State& s, const std::string& config_hash) {
  json dists = json::object();
  for (const auto& [name, d] : s.distributions) {
    dists[name] = json{{"counts", d.counts},
                       {"underspecified", d.underspecified},
                       {"provider_errors", d.provider_errors},
                       {"total_processed", d.total_processed}};
  }
  json j{{"format", kCheckpointFormat},
         {"version", kCheckpointVersion},
         {"config_hash", config_hash},
         {"records_done", s.records_done},
         {"predictions_offset", s.predictions_offset},
         {"distributions", dists},
         {"counters",
          {{"no_embedding", s.counters.no_embedding},
           {"filtered_out", s.counters.filtered_out},
           {"other_entity", s.counters.other_entity}}},
         {"rows", s.rows}};
  return j.dump() + "\n";
}

State read_checkpoint(const std::filesystem::path& path, const std::string& config_hash) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  State s;
  try {
    const auto j = json::parse(buf.str());
    if (j.at("format") != kCheckpointFormat || j.at("version").get<int>() != kCheckpointVersion) {
      throw FormatError("unrecognized checkpoint " + path.string());
    }
    if (j.at("config_hash").get<std::string>() != config_hash) {
      throw ConfigError("checkpoint " + path.string() + " belongs to a different configuration");
    }
    s.records_done = j.at("records_done").get<std::uint64_t>();
    s.predictions_offset = j.at("predictions_offset").get<std::uint64_t>();
    for (const auto& [name, d] : j.at("distributions").items()) {
      EntityDistribution e;
      e.entity = name;
      e.counts = d.at("counts").get<std::map<std::string, std::uint64_t>>();
      e.underspecified = d.at("underspecified").get<std::uint64_t>();
      e.provider_errors = d.at("provider_errors").get<std::uint64_t>();
      e.total_processed = d.at("total_processed").get<std::uint64_t>();
      s.distributions.emplace(name, std::move(e));
    }
    const auto& c = j.at("counters");
    s.counters.no_embedding = c.at("no_embedding").get<std::uint64_t>();
    s.counters.filtered_out = c.at("filtered_out").get<std::uint64_t>();
    s.counters.other_entity = c.at("other_entity").get<std::uint64_t>();
    s.rows = j.at("rows").get<decltype(s.rows)>();
  } catch (const json::exception& e) {
    throw FormatError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return s;
}

std::string country_key(const CountryPrediction& p) {
  if (p.provider_error()) return {};
  if (p.country) return p.country->name;
  return p.unmapped_code;
}

// Vendi score per (entity, country) cell with more than `min_count` rows.
std::map<std::string, CountryValues> diversity_scores(
    const std::map<std::string, std::map<std::string, std::vector<std::uint64_t>>>& rows, const RunConfig& config,
    const EmbeddingFile& emb) {
  std::map<std::string, CountryValues> out;
  auto score = [&](const std::string& entity, const std::string& country, const std::vector<std::uint64_t>& ids) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(ids.size()), emb.dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto v = emb.read_row(ids[i]);
      for (std::uint32_t c = 0; c < emb.dim(); ++c) m(static_cast<Eigen::Index>(i), c) = v[c];
    }
    const auto set = EmbeddingSet::from_rows(std::move(m));
    const auto capped = subsample(set, config.vendi_cap, config.seed ^ fnv1a(entity + "\x1f" + country));
    return vendi_score(capped);
  };
  std::map<std::string, std::vector<std::uint64_t>> pooled;
  for (const auto& [entity, by_country] : rows) {
    for (const auto& [country, ids] : by_country) {
      auto& pool = pooled[country];
      pool.insert(pool.end(), ids.begin(), ids.end());
      if (ids.size() > config.min_count) out[entity][country] = score(entity, country, ids);
    }
  }
  for (const auto& [country, ids] : pooled) {
    if (ids.size() > config.min_count) out["*"][country] = score("*", country, ids);
  }
  return out;
}

}  // namespace

RunResult run_profile(const RunConfig& config, const RunOptions& options) {
  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);
  const auto predictions_path = config.output_dir / "predictions.jsonl";
  const auto checkpoint_path = config.output_dir / "checkpoint.json";

  RunResult result;
  State state;
  if (options.resume && fs::exists(checkpoint_path)) {
    state = read_checkpoint(checkpoint_path, config.hash);
    result.resumed = true;
  }

  Toolkit toolkit(config);
  const auto geo = toolkit.geolocate_config();

  std::optional<EmbeddingFile> embeddings;
  if (config.filter_embeddings) embeddings.emplace(*config.filter_embeddings);
  std::optional<ClassifierModel> model;
  if (config.filter_model) {
    model = load_model(*config.filter_model);
    if (embeddings && model->weights.size() != embeddings->dim()) {
      throw DimensionError("filter model expects dimension " + std::to_string(model->weights.size()) +
                           ", embeddings have " + std::to_string(embeddings->dim()));
    }
  }
  std::set<std::string, std::less<>> wanted(config.entities.begin(), config.entities.end());
  for (const auto& e : config.entities) {
    state.distributions.try_emplace(e, EntityDistribution{e, {}, 0, 0, 0});
  }

  // Predictions written past the last checkpoint are discarded.
  if (result.resumed) {
    if (!fs::exists(predictions_path) || fs::file_size(predictions_path) < state.predictions_offset) {
      throw IoError("predictions file is shorter than the checkpoint records");
    }
    fs::resize_file(predictions_path, state.predictions_offset);
  }
  std::ofstream predictions(predictions_path,
                            std::ios::binary | (result.resumed ? std::ios::app : std::ios::trunc));
  if (!predictions) throw IoError("cannot write " + predictions_path.string());

  InputStream input(config.inputs);
  for (std::uint64_t i = 0; i < state.records_done; ++i) {
    if (!input.next()) throw IoError("inputs hold fewer records than the checkpoint says were processed");
  }

  auto process = [&](const CaptionRecord& rec) {
    Outcome o;
    if (!wanted.empty() && !wanted.contains(rec.entity)) {
      o.fate = Fate::kOtherEntity;
      return o;
    }
    if (model) {
      if (!rec.embedding_row || *rec.embedding_row >= embeddings->rows()) {
        o.fate = Fate::kNoEmbedding;
        return o;
      }
      if (!predict_presence(*model, std::span<const float>(embeddings->read_row(*rec.embedding_row)))) {
        o.fate = Fate::kFilteredOut;
        return o;
      }
    }
    o.prediction = geolocate_caption(rec, geo);
    return o;
  };

  const std::size_t workers = std::max<std::size_t>(1, config.workers);
  while (true) {
    std::uint64_t chunk_size = config.checkpoint_every;
    if (options.halt_after) {
      if (state.records_done >= *options.halt_after) {
        result.halted = true;
        break;
      }
      chunk_size = std::min(chunk_size, *options.halt_after - state.records_done);
    }
    std::vector<CaptionRecord> chunk;
    while (chunk.size() < chunk_size) {
      auto rec = input.next();
      if (!rec) break;
      chunk.push_back(std::move(*rec));
    }
    if (chunk.empty()) break;

    std::vector<Outcome> outcomes(chunk.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < std::min(workers, chunk.size()); ++w) {
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < chunk.size(); i = next++) {
            try {
              outcomes[i] = process(chunk[i]);
            } catch (...) {
              std::lock_guard lock(failure_mu);
              if (!failure) failure = std::current_exception();
              next = chunk.size();
            }
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto& rec = chunk[i];
      const auto& o = outcomes[i];
      switch (o.fate) {
        case Fate::kOtherEntity: ++state.counters.other_entity; continue;
        case Fate::kNoEmbedding: ++state.counters.no_embedding; continue;
        case Fate::kFilteredOut: ++state.counters.filtered_out; continue;
        case Fate::kPredicted: break;
      }
      const std::string entity = rec.entity.empty() ? kNoEntity : rec.entity;
      auto [it, inserted] = state.distributions.try_emplace(entity);
      if (inserted) it->second.entity = entity;
      it->second.add(o.prediction);
      predictions << prediction_to_json(rec.id, o.prediction) << '\n';
      if (config.diversity && rec.embedding_row && *rec.embedding_row < embeddings->rows()) {
        if (auto key = country_key(o.prediction); !key.empty()) state.rows[entity][key].push_back(*rec.embedding_row);
      }
    }
    predictions.flush();
    if (!predictions) throw IoError("error writing " + predictions_path.string());
    state.records_done += chunk.size();
    result.processed_this_run += chunk.size();

    // A halted run stops here without recording the last chunk, the way a
    // crash between checkpoints would.
    if (options.halt_after && state.records_done >= *options.halt_after) {
      result.halted = true;
      break;
    }
    state.predictions_offset = static_cast<std::uint64_t>(predictions.tellp());
    write_atomic(checkpoint_path, checkpoint_json(state, config.hash));
  }
  predictions.close();
  if (result.halted) return result;

  // Finished: assemble the report.
  const auto& countries = toolkit.countries();
  ReportOptions ro;
  ro.top_n = config.top_n;
  ro.min_count = config.min_count;
  for (const auto& [name, path] : config.indicators) ro.indicators[name] = load_country_values(path, countries).values;
  if (config.diversity) ro.diversity = diversity_scores(state.rows, config, *embeddings);

  ProfileReport report;
  report.config_hash = config.hash;
  report.prompt_checksums = PromptLibrary::builtin().checksums();
  report.method = std::string(to_string(config.method));
  report.top_n = config.top_n;
  EntityDistribution all;
  all.entity = "*";
  for (const auto& [name, d] : state.distributions) {
    report.entities.push_back(build_entity_report(d, ro, countries));
    auto renamed = d;
    renamed.entity = "*";
    all = merge(all, renamed);
  }
  report.combined = build_entity_report(all, ro, countries);

  const auto stats = input.stats();
  report.counters = state.counters;
  report.counters.records_read = stats.lines;
  report.counters.rejected = stats.malformed + stats.empty_caption + stats.entity_missing;

  write_atomic(config.output_dir / "report.json", report_to_json(report));
  write_report_csvs(report, config.output_dir, countries);
  fs::remove(checkpoint_path);

  const std::uint64_t attempted = all.total_processed;
  result.provider_error_rate = attempted == 0 ? 0.0 : static_cast<double>(all.provider_errors) / attempted;
  result.within_error_ceiling = result.provider_error_rate <= config.max_provider_error_rate;
  result.report = std::move(report);
  return result;
}

}  // namespace geoprofile
