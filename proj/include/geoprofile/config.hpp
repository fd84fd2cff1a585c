#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geoprofile/geolocate.hpp"

namespace geoprofile {

struct ProviderSettings {
  std::string kind;  // "recorded", "echo" or "http"
  std::optional<std::filesystem::path> transcripts;  // recorded; fallback for echo
  std::string endpoint;                              // http
  std::string auth_env;                              // http
  int timeout_ms = 30000;
  std::optional<std::filesystem::path> cache;
  int concurrency = 4;
  int retries = 3;
  int backoff_ms = 200;
};

// Run configuration, a JSON document with `"version": 1`. Relative paths
// resolve against the directory of the config file. See README for the full
// key list.
struct RunConfig {
  static constexpr int kVersion = 1;

  std::filesystem::path gazetteer;
  std::optional<std::filesystem::path> gazetteer_cache;
  std::uint64_t min_population = 0;
  std::optional<std::filesystem::path> countries;
  Method method = Method::kStringMatch;
  std::optional<ProviderSettings> provider;
  std::optional<std::filesystem::path> icl_examples;
  bool translation = false;
  std::vector<std::string> entities;  // empty = every entity
  std::vector<std::filesystem::path> inputs;
  std::optional<std::filesystem::path> filter_embeddings;
  std::optional<std::filesystem::path> filter_model;
  std::map<std::string, std::filesystem::path> indicators;

  std::size_t top_n = 15;
  std::uint64_t checkpoint_every = 1000;
  double max_provider_error_rate = 0.05;
  std::size_t workers = 4;
  bool diversity = false;
  std::size_t vendi_cap = 2000;

  double r = 1.5;
  std::size_t k = 3;
  std::uint64_t min_count = 100;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;

  // sha256 of the document re-serialized with sorted keys.
  std::string hash;
};

// Parses and validates. Every problem found (unknown keys, wrong types,
// missing files, inconsistent settings) is collected into one ConfigError.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace geoprofile
