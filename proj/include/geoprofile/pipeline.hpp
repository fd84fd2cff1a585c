#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "geoprofile/config.hpp"
#include "geoprofile/countries.hpp"
#include "geoprofile/gazetteer.hpp"
#include "geoprofile/geolocate.hpp"
#include "geoprofile/profile.hpp"
#include "geoprofile/providers.hpp"

namespace geoprofile {

// Provider chain for the settings: backend, then retries, then the
// concurrency bound, then the response cache (outermost, so hits skip the
// bound). `cache_layer` receives the caching wrapper when one is configured.
std::shared_ptr<TextCompletionProvider> make_provider(const ProviderSettings& settings,
                                                      std::shared_ptr<CachingProvider>* cache_layer = nullptr);

// Everything a geolocation run needs, built once from a config.
class Toolkit {
 public:
  explicit Toolkit(const RunConfig& config);

  const CountryTable& countries() const { return *countries_; }
  const GazetteerIndex& index() const { return *index_; }
  bool index_reused() const { return index_reused_; }
  GeolocateConfig geolocate_config() const;
  // Same toolkit, another method (for comparisons).
  GeolocateConfig geolocate_config(Method method) const;
  const std::shared_ptr<CachingProvider>& cache_layer() const { return cache_layer_; }

 private:
  const RunConfig& config_;
  std::unique_ptr<CountryTable> owned_countries_;
  const CountryTable* countries_ = nullptr;
  std::optional<GazetteerIndex> index_;
  bool index_reused_ = false;
  std::unique_ptr<StringMatcher> matcher_;
  std::shared_ptr<TextCompletionProvider> provider_;
  std::shared_ptr<CachingProvider> cache_layer_;
  std::shared_ptr<Translator> translator_;
  std::string icl_block_;
};

struct RunOptions {
  bool resume = false;
  // Stop abruptly once this many records are done, leaving the state a
  // crash would leave (used to exercise resume).
  std::optional<std::uint64_t> halt_after;
};

struct RunResult {
  ProfileReport report;
  bool halted = false;
  bool resumed = false;
  std::uint64_t processed_this_run = 0;
  double provider_error_rate = 0.0;
  bool within_error_ceiling = true;  // provider_error_rate <= configured ceiling
};

// Streams the inputs through filter -> geolocate -> aggregate, writing
// <output_dir>/predictions.jsonl, report.json and the CSV tables. A
// checkpoint (<output_dir>/checkpoint.json) is written every
// `checkpoint_every` records; with `resume` the run continues from it and the
// final outputs are byte-identical to an uninterrupted run.
RunResult run_profile(const RunConfig& config, const RunOptions& options = {});

}  // namespace geoprofile
