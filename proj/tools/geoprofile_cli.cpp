// geoprofile command line. Every result goes to a file; stdout only carries a
// short summary.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "geoprofile/config.hpp"
#include "geoprofile/csv.hpp"
#include "geoprofile/embeddings.hpp"
#include "geoprofile/entity_filter.hpp"
#include "geoprofile/error.hpp"
#include "geoprofile/eval.hpp"
#include "geoprofile/gazetteer.hpp"
#include "geoprofile/metrics.hpp"
#include "geoprofile/pipeline.hpp"
#include "geoprofile/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace geoprofile;

namespace {

constexpr int kExitError = 1;
constexpr int kExitErrorCeiling = 3;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("error writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

EmbeddingSet load_set(const fs::path& path, bool* renormalized = nullptr) {
  const auto m = read_embeddings(path);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(m.rows), m.dim);
  for (std::uint64_t i = 0; i < m.rows; ++i) {
    const auto r = m.row(i);
    for (std::uint32_t c = 0; c < m.dim; ++c) rows(static_cast<Eigen::Index>(i), c) = r[c];
  }
  return EmbeddingSet::from_rows(std::move(rows), path.filename().string(), renormalized);
}

// `country,value` (or any two columns named by the caller).
std::map<std::string, double> read_keyed(const fs::path& path, const std::string& key_col, const std::string& val_col) {
  const auto t = csv::read_file(path);
  const auto k = t.column(key_col);
  const auto v = t.column(val_col);
  std::map<std::string, double> out;
  for (const auto& row : t.rows) {
    try {
      out[row[k]] += std::stod(row[v]);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": non-numeric value '" + row[v] + "'");
    }
  }
  return out;
}

int cmd_build_gazetteer(const fs::path& source, const fs::path& cache, std::uint64_t min_pop,
                        const std::optional<fs::path>& stats_out) {
  LoadOptions lo{min_pop};
  const auto res = load_or_build_index(source, cache, lo);
  const auto& info = res.index.build_info();
  std::cout << info.stats.entries << " entries, " << info.stats.skipped << " skipped"
            << (res.reused ? " (cache reused)" : "") << "\n";
  if (stats_out) {
    write_json(*stats_out, {{"source", source.string()},
                            {"cache", cache.string()},
                            {"checksum", info.source_checksum},
                            {"rows", info.stats.rows},
                            {"entries", info.stats.entries},
                            {"skipped", info.stats.skipped},
                            {"filtered", info.stats.filtered},
                            {"reused", res.reused}});
  }
  return 0;
}

int cmd_profile(const fs::path& config_path, bool resume, std::optional<std::uint64_t> halt_after) {
  const auto config = load_config(config_path);
  RunOptions ro;
  ro.resume = resume;
  ro.halt_after = halt_after;
  const auto res = run_profile(config, ro);
  if (res.halted) {
    std::cout << "halted after " << res.processed_this_run << " records\n";
    return 0;
  }
  const auto& c = res.report.counters;
  std::cout << "records " << c.records_read << ", rejected " << c.rejected << ", filtered " << c.filtered_out
            << ", no embedding " << c.no_embedding << ", other entity " << c.other_entity << "\n";
  std::cout << "provider error rate " << res.provider_error_rate << " (ceiling " << config.max_provider_error_rate
            << ")\n";
  std::cout << "report: " << (config.output_dir / "report.json").string() << "\n";
  return res.within_error_ceiling ? 0 : kExitErrorCeiling;
}

int cmd_eval(const fs::path& config_path, const fs::path& testset_path, const std::vector<std::string>& methods,
             const fs::path& out, const std::string& averaging, const std::optional<fs::path>& detail_out) {
  const auto config = load_config(config_path);
  Toolkit toolkit(config);
  const auto testset = load_testset(testset_path, toolkit.countries());
  std::vector<NamedMethod> named;
  for (const auto& m : methods) {
    const Method method = method_from_string(m);
    auto geo = toolkit.geolocate_config(method);
    named.push_back({m, method == Method::kStringMatch ? "pre_llm" : "llm", [geo](const std::string& caption) {
                       CaptionRecord rec;
                       rec.caption = caption;
                       return geolocate_caption(rec, geo);
                     }});
  }
  const auto rows = compare_methods(named, testset, averaging == "macro" ? Averaging::kMacro : Averaging::kMicro);
  std::ostringstream csv_out;
  write_comparison_csv(csv_out, rows);
  write_text(out, csv_out.str());
  if (detail_out) {
    json j = json::array();
    for (const auto& r : rows) {
      json confusion = json::array();
      for (const auto& [pair, n] : r.detail.confusion) {
        confusion.push_back({{"gold", pair.first}, {"predicted", pair.second}, {"count", n}});
      }
      j.push_back({{"method", r.name},
                   {"tp", r.detail.tp},
                   {"fp", r.detail.fp},
                   {"fn", r.detail.fn},
                   {"tn", r.detail.tn},
                   {"provider_errors", r.detail.provider_errors},
                   {"precision", opt(r.detail.precision)},
                   {"recall", opt(r.detail.recall)},
                   {"macro_precision", opt(r.detail.macro_precision)},
                   {"macro_recall", opt(r.detail.macro_recall)},
                   {"confusion", confusion}});
    }
    write_json(*detail_out, j);
  }
  std::cout << csv_out.str();
  return 0;
}

int cmd_vendi(const fs::path& in, std::size_t cap, std::uint64_t seed, const fs::path& out) {
  bool renorm = false;
  const auto set = load_set(in, &renorm);
  const auto used = subsample(set, cap, seed);
  const double v = vendi_score(used);
  write_json(out, {{"vendi", v}, {"n", set.size()}, {"used", used.size()}, {"renormalized", renorm}});
  std::cout << "vendi " << v << " over " << used.size() << " rows\n";
  return 0;
}

int cmd_misalign(const fs::path& dataset, const fs::path& reference, double r, const fs::path& out) {
  CountryDistribution d{read_keyed(dataset, "country", "count")};
  CountryDistribution ref{read_keyed(reference, "country", "count")};
  const auto rep = misalignment(d, ref, r);
  write_json(out, {{"r", rep.r},
                   {"ratios", rep.ratios},
                   {"over", rep.over},
                   {"under", rep.under},
                   {"excluded", rep.excluded},
                   {"reference_countries", rep.reference_countries},
                   {"percent_over", rep.percent_over},
                   {"percent_under", rep.percent_under}});
  std::cout << rep.over.size() << " over-represented, " << rep.under.size() << " under-represented\n";
  return 0;
}

int cmd_pr(const fs::path& real, const fs::path& generated, std::size_t k, const fs::path& out) {
  const auto pr = knn_precision_recall(load_set(real), load_set(generated), k);
  write_json(out, {{"precision", pr.precision}, {"recall", pr.recall}, {"k", k}});
  std::cout << "precision " << pr.precision << ", recall " << pr.recall << "\n";
  return 0;
}

int cmd_spearman(const fs::path& x_path, const fs::path& y_path, const std::string& mode, std::size_t permutations,
                 std::uint64_t seed, const fs::path& out) {
  const auto xs = read_keyed(x_path, "country", "value");
  const auto ys = read_keyed(y_path, "country", "value");
  std::vector<double> x, y;
  std::vector<std::string> keys;
  for (const auto& [k, v] : xs) {
    if (auto it = ys.find(k); it != ys.end()) {
      keys.push_back(k);
      x.push_back(v);
      y.push_back(it->second);
    }
  }
  SpearmanOptions so;
  so.mode = mode == "permutation" ? PValueMode::kPermutation : PValueMode::kTApproximation;
  so.permutations = permutations;
  so.seed = seed;
  const auto res = spearman(x, y, so);
  write_json(out, {{"rho", opt(res.rho)}, {"p_value", opt(res.p_value)}, {"n", res.n}, {"countries", keys}});
  std::cout << "rho " << (res.rho ? std::to_string(*res.rho) : "undefined") << " over " << res.n << " countries\n";
  return 0;
}

int cmd_annotate_stats(const fs::path& votes, const fs::path& out) {
  const auto m = AnnotationMatrix::from_csv_file(votes);
  json labels = json::object();
  for (std::size_t i = 0; i < m.items(); ++i) {
    const auto row = m.row(i);
    const bool any = std::any_of(row.begin(), row.end(), [](Vote v) { return v != Vote::kMissing; });
    labels[m.item_ids()[i]] = any ? json(majority_label(row) ? 1 : 0) : json(nullptr);
  }
  const auto overall = overall_agreement(m);
  json j{{"items", m.items()},
         {"raters", m.raters()},
         {"agreement_present", opt(pairwise_agreement(m, true))},
         {"agreement_absent", opt(pairwise_agreement(m, false))},
         {"agreement_overall", opt(overall)},
         {"majority", labels}};
  try {
    j["fleiss_kappa"] = opt(fleiss_kappa(m));
  } catch (const ParameterError&) {
    j["fleiss_kappa"] = nullptr;  // incomplete ratings
  }
  write_json(out, j);
  std::cout << "overall agreement " << (overall ? std::to_string(*overall) : "undefined") << "\n";
  return 0;
}

// Labels CSV `row,label`: embedding row index and 0/1. A seeded holdout
// fraction is kept aside for the reported F1.
int cmd_train_filter(const fs::path& emb_path, const fs::path& labels_path, const fs::path& model_out, double C,
                     double holdout, std::uint64_t seed, const std::optional<fs::path>& metrics_out) {
  const auto emb = read_embeddings(emb_path);
  const auto t = csv::read_file(labels_path);
  const auto rc = t.column("row");
  const auto lc = t.column("label");
  std::vector<std::uint64_t> rows;
  std::vector<int> labels;
  for (const auto& r : t.rows) {
    const auto row = std::stoull(r[rc]);
    if (row >= emb.rows) throw LookupError("label row " + r[rc] + " outside the embedding file");
    if (r[lc] != "0" && r[lc] != "1") throw FormatError("label must be 0 or 1, got '" + r[lc] + "'");
    rows.push_back(row);
    labels.push_back(r[lc] == "1" ? 1 : 0);
  }
  if (holdout < 0.0 || holdout >= 1.0) throw ParameterError("holdout must lie in [0, 1)");

  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng::Engine engine(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng::index(engine, i)]);
  const auto n_test = static_cast<std::size_t>(holdout * static_cast<double>(order.size()));
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());

  auto features = [&](const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()), emb.dim);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto r = emb.row(rows[idx[i]]);
      for (std::uint32_t c = 0; c < emb.dim; ++c) x(static_cast<Eigen::Index>(i), c) = r[c];
    }
    return EmbeddingSet::from_rows(std::move(x)).vectors;
  };
  std::vector<int> train_labels;
  for (auto i : train) train_labels.push_back(labels[i]);
  TrainOptions to;
  to.C = C;
  const auto model = train_classifier(features(train), train_labels, to);
  save_model(model, model_out);

  json j{{"train", train.size()}, {"holdout", test.size()}, {"iterations", model.iterations},
         {"converged", model.converged}, {"f1", nullptr}};
  if (!test.empty()) {
    const auto x = features(test);
    std::vector<int> pred, gold;
    for (std::size_t i = 0; i < test.size(); ++i) {
      std::vector<double> row(x.cols());
      for (Eigen::Index c = 0; c < x.cols(); ++c) row[c] = x(static_cast<Eigen::Index>(i), c);
      pred.push_back(predict_presence(model, std::span<const double>(row)) ? 1 : 0);
      gold.push_back(labels[test[i]]);
    }
    j["f1"] = f1_score(pred, gold);
  }
  if (metrics_out) write_json(*metrics_out, j);
  std::cout << "model written to " << model_out.string() << "; held-out F1 " << j["f1"].dump() << "\n";
  return 0;
}

int cmd_synth_testset(const fs::path& gazetteer, const fs::path& templates, std::uint64_t min_pop,
                      std::uint64_t seed, const std::optional<fs::path>& countries_path, const fs::path& out) {
  std::unique_ptr<CountryTable> owned;
  const CountryTable* countries = &CountryTable::builtin();
  if (countries_path) {
    owned = std::make_unique<CountryTable>(CountryTable::from_csv_file(*countries_path));
    countries = owned.get();
  }
  const auto index = load_gazetteer_file(gazetteer);
  const auto set = synthesize_geo_testset(load_templates(templates), index, min_pop, seed, *countries);
  std::ostringstream s;
  write_testset(s, set);
  write_text(out, s.str());
  std::cout << set.size() << " captions\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geographic profiling of image-caption corpora"};
  app.require_subcommand(1);
  std::function<int()> action;

  // build-gazetteer
  auto* bg = app.add_subcommand("build-gazetteer", "Parse a GeoNames dump into a binary index cache");
  fs::path bg_source, bg_cache;
  std::uint64_t bg_min_pop = 0;
  std::optional<fs::path> bg_stats;
  bg->add_option("--source", bg_source, "GeoNames TSV")->required();
  bg->add_option("--cache", bg_cache, "index cache to write or reuse")->required();
  bg->add_option("--min-population", bg_min_pop, "drop smaller places");
  bg->add_option("--stats", bg_stats, "write load statistics as JSON");
  bg->callback([&] { action = [&] { return cmd_build_gazetteer(bg_source, bg_cache, bg_min_pop, bg_stats); }; });

  // profile
  auto* pr = app.add_subcommand("profile", "Geolocate, filter and aggregate captions into reports");
  fs::path pr_config;
  bool pr_resume = false;
  std::optional<std::uint64_t> pr_halt;
  pr->add_option("--config", pr_config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  pr->add_flag("--resume", pr_resume, "continue from the checkpoint in the output directory");
  pr->add_option("--halt-after", pr_halt, "stop after N records without finishing (testing)")->group("");
  pr->callback([&] { action = [&] { return cmd_profile(pr_config, pr_resume, pr_halt); }; });

  // eval
  auto* ev = app.add_subcommand("eval", "Score geolocation methods on an annotated test set");
  fs::path ev_config, ev_testset, ev_out;
  std::vector<std::string> ev_methods{"string_match"};
  std::string ev_avg = "micro";
  std::optional<fs::path> ev_detail;
  ev->add_option("--config", ev_config, "run configuration supplying gazetteer and provider")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--testset", ev_testset, "JSONL test set")->required()->check(CLI::ExistingFile);
  ev->add_option("--methods", ev_methods, "methods to compare")
      ->delimiter(',')
      ->check(CLI::IsMember({"string_match", "zero_shot", "erp", "icl"}));
  ev->add_option("--averaging", ev_avg, "micro or macro")->check(CLI::IsMember({"micro", "macro"}));
  ev->add_option("--out", ev_out, "comparison CSV")->required();
  ev->add_option("--detail", ev_detail, "per-method counts and confusion as JSON");
  ev->callback([&] { action = [&] { return cmd_eval(ev_config, ev_testset, ev_methods, ev_out, ev_avg, ev_detail); }; });

  // metrics
  auto* me = app.add_subcommand("metrics", "Dataset-level metrics");
  me->require_subcommand(1);
  fs::path m_out;

  auto* mv = me->add_subcommand("vendi", "Vendi diversity of an embedding file");
  fs::path mv_in;
  std::size_t mv_cap = 2000;
  std::uint64_t mv_seed = 0;
  mv->add_option("--embeddings", mv_in)->required()->check(CLI::ExistingFile);
  mv->add_option("--cap", mv_cap, "subsample to at most this many rows");
  mv->add_option("--seed", mv_seed);
  mv->add_option("--out", m_out)->required();
  mv->callback([&] { action = [&] { return cmd_vendi(mv_in, mv_cap, mv_seed, m_out); }; });

  auto* mm = me->add_subcommand("misalign", "Over/under-representation against a reference");
  fs::path mm_data, mm_ref;
  double mm_r = 1.5;
  mm->add_option("--dataset", mm_data, "CSV country,count")->required()->check(CLI::ExistingFile);
  mm->add_option("--reference", mm_ref, "CSV country,count")->required()->check(CLI::ExistingFile);
  mm->add_option("--r", mm_r, "ratio threshold");
  mm->add_option("--out", m_out)->required();
  mm->callback([&] { action = [&] { return cmd_misalign(mm_data, mm_ref, mm_r, m_out); }; });

  auto* mp = me->add_subcommand("pr", "k-NN manifold precision and recall");
  fs::path mp_real, mp_gen;
  std::size_t mp_k = 3;
  mp->add_option("--real", mp_real)->required()->check(CLI::ExistingFile);
  mp->add_option("--generated", mp_gen)->required()->check(CLI::ExistingFile);
  mp->add_option("--k", mp_k);
  mp->add_option("--out", m_out)->required();
  mp->callback([&] { action = [&] { return cmd_pr(mp_real, mp_gen, mp_k, m_out); }; });

  auto* ms = me->add_subcommand("spearman", "Rank correlation of two country,value tables");
  fs::path ms_x, ms_y;
  std::string ms_mode = "t";
  std::size_t ms_perm = 10000;
  std::uint64_t ms_seed = 0;
  ms->add_option("--x", ms_x)->required()->check(CLI::ExistingFile);
  ms->add_option("--y", ms_y)->required()->check(CLI::ExistingFile);
  ms->add_option("--p-value", ms_mode, "t or permutation")->check(CLI::IsMember({"t", "permutation"}));
  ms->add_option("--permutations", ms_perm);
  ms->add_option("--seed", ms_seed);
  ms->add_option("--out", m_out)->required();
  ms->callback([&] { action = [&] { return cmd_spearman(ms_x, ms_y, ms_mode, ms_perm, ms_seed, m_out); }; });

  // annotate-stats
  auto* an = app.add_subcommand("annotate-stats", "Inter-annotator agreement and majority labels");
  fs::path an_votes, an_out;
  an->add_option("--votes", an_votes, "CSV record_id,rater_id,vote")->required()->check(CLI::ExistingFile);
  an->add_option("--out", an_out)->required();
  an->callback([&] { action = [&] { return cmd_annotate_stats(an_votes, an_out); }; });

  // train-filter
  auto* tf = app.add_subcommand("train-filter", "Train the entity-presence classifier");
  fs::path tf_emb, tf_labels, tf_model;
  double tf_C = 1.0, tf_holdout = 0.2;
  std::uint64_t tf_seed = 0;
  std::optional<fs::path> tf_metrics;
  tf->add_option("--embeddings", tf_emb)->required()->check(CLI::ExistingFile);
  tf->add_option("--labels", tf_labels, "CSV row,label")->required()->check(CLI::ExistingFile);
  tf->add_option("--model", tf_model, "model file to write")->required();
  tf->add_option("--C", tf_C);
  tf->add_option("--holdout", tf_holdout, "held-out fraction for F1");
  tf->add_option("--seed", tf_seed);
  tf->add_option("--metrics", tf_metrics, "write training metrics as JSON");
  tf->callback([&] {
    action = [&] { return cmd_train_filter(tf_emb, tf_labels, tf_model, tf_C, tf_holdout, tf_seed, tf_metrics); };
  });

  // synth-testset
  auto* sy = app.add_subcommand("synth-testset", "Synthesize a location test set from templates");
  fs::path sy_gaz, sy_templates, sy_out;
  std::uint64_t sy_min_pop = 10000, sy_seed = 0;
  std::optional<fs::path> sy_countries;
  sy->add_option("--gazetteer", sy_gaz)->required()->check(CLI::ExistingFile);
  sy->add_option("--templates", sy_templates, "JSONL {template, entity}")->required()->check(CLI::ExistingFile);
  sy->add_option("--min-population", sy_min_pop);
  sy->add_option("--seed", sy_seed);
  sy->add_option("--countries", sy_countries, "country metadata CSV")->check(CLI::ExistingFile);
  sy->add_option("--out", sy_out)->required();
  sy->callback([&] {
    action = [&] { return cmd_synth_testset(sy_gaz, sy_templates, sy_min_pop, sy_seed, sy_countries, sy_out); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return action();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
