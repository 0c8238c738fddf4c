#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "clinsynth/corpus.hpp"
#include "clinsynth/errors.hpp"
#include "clinsynth/manifest.hpp"
#include "clinsynth/ngram.hpp"
#include "clinsynth/synthesis.hpp"

// The perplexity experiment grid: one n-gram model per training corpus,
// evaluated on every test corpus. Report rows are sorted so CSV output
// diffs stably run to run.

namespace clinsynth {

struct NgramConfig {
  int order = 3;
  double discount = 0.75;
  int min_count = 2;
};

struct PerplexityRow {
  std::string train_corpus_id;
  std::string test_set_id;
  double perplexity = 0.0;
  std::uint64_t token_count = 0;
  double oov_rate = 0.0;
};

struct PerplexityReport {
  std::vector<PerplexityRow> rows;
  NgramConfig config;
};

// Resolves corpus ids inside a run directory (chunks/, corpora/,
// manifests/). Bare ids go through their manifest to find the right loader;
// anything that looks like a path is loaded directly.
class CorpusResolver {
 public:
  explicit CorpusResolver(fs::path run_dir) : run_dir_(std::move(run_dir)) {}

  fs::path manifest_dir() const { return run_dir_ / "manifests"; }

  bool resolvable(const std::string& ref) const {
    if (looks_like_path(ref)) return fs::exists(ref);
    return fs::exists(manifest_path(manifest_dir(), ref));
  }

  Corpus load(const std::string& ref) const {
    if (looks_like_path(ref)) return load_path(ref);
    const CorpusManifest m = read_manifest(manifest_path(manifest_dir(), ref));
    if (std::holds_alternative<IngestedRecipe>(m.recipe)) {
      return load_corpus_jsonl(run_dir_ / "chunks" / (ref + ".jsonl"), ref);
    }
    if (std::holds_alternative<SynthesizedRecipe>(m.recipe)) {
      return load_generation_corpus(run_dir_ / "corpora" / (ref + ".jsonl"),
                                    ref);
    }
    return load_corpus_jsonl(run_dir_ / "corpora" / (ref + ".jsonl"), ref);
  }

  std::optional<CorpusManifest> manifest_of(const std::string& ref) const {
    if (looks_like_path(ref)) return std::nullopt;
    const fs::path p = manifest_path(manifest_dir(), ref);
    if (!fs::exists(p)) return std::nullopt;
    return read_manifest(p);
  }

 private:
  static bool looks_like_path(const std::string& ref) {
    return ref.find('/') != std::string::npos ||
           ref.ends_with(".jsonl") || ref.ends_with(".txt");
  }

  Corpus load_path(const std::string& ref) const {
    const fs::path p(ref);
    const std::string id = p.stem().string();
    if (ref.ends_with(".txt")) return load_corpus_text(p, id);
    // Sniff the row shape: generation records carry clean_text.
    const std::string content = read_file(p);
    for (std::string_view line : split_lines(content)) {
      if (trim_view(line).empty()) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (!j.is_discarded() && j.contains("clean_text")) {
        return load_generation_corpus(p, id);
      }
      break;
    }
    return load_corpus_jsonl(p, id);
  }

  fs::path run_dir_;
};

inline PerplexityReport run_matrix(const std::vector<std::string>& train_refs,
                                   const std::vector<std::string>& test_refs,
                                   const NgramConfig& config,
                                   const CorpusResolver& resolver) {
  if (train_refs.empty() || test_refs.empty()) {
    throw ConfigError("matrix needs at least one train and one test corpus");
  }
  {
    std::set<std::string> seen;
    for (const auto& t : train_refs) {
      if (!seen.insert(t).second) {
        throw ConfigError("duplicate train corpus '" + t +
                          "' would make row labels ambiguous");
      }
    }
    seen.clear();
    for (const auto& t : test_refs) {
      if (!seen.insert(t).second) {
        throw ConfigError("duplicate test corpus '" + t + "'");
      }
    }
  }
  // Resolve everything up front: a missing corpus must fail the whole run
  // before any training starts.
  for (const auto& ref : train_refs) {
    if (!resolver.resolvable(ref)) {
      throw DataError("train corpus '" + ref + "' cannot be resolved");
    }
  }
  for (const auto& ref : test_refs) {
    if (!resolver.resolvable(ref)) {
      throw DataError("test corpus '" + ref + "' cannot be resolved");
    }
  }

  std::vector<std::string> trains = train_refs;
  std::vector<std::string> tests = test_refs;
  std::sort(trains.begin(), trains.end());
  std::sort(tests.begin(), tests.end());

  std::vector<Corpus> test_corpora;
  test_corpora.reserve(tests.size());
  for (const auto& ref : tests) test_corpora.push_back(resolver.load(ref));

  PerplexityReport report;
  report.config = config;
  for (const auto& train_ref : trains) {
    const Corpus train = resolver.load(train_ref);
    const Vocab vocab = build_vocab(train, config.min_count);
    const NgramModel model =
        train_ngram(train, config.order, config.discount, vocab);
    for (std::size_t t = 0; t < tests.size(); ++t) {
      const PerplexityResult res = perplexity(model, test_corpora[t]);
      report.rows.push_back({train_ref, tests[t], res.perplexity,
                             res.scored_tokens, res.oov_rate});
    }
  }
  return report;
}

// --- CSV output ------------------------------------------------------------

namespace detail {

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

}  // namespace detail

inline std::string report_to_csv(const PerplexityReport& report) {
  std::string out =
      "train_corpus_id,test_set_id,perplexity,token_count,oov_rate,order,"
      "discount,min_count\n";
  for (const auto& r : report.rows) {
    out += detail::csv_escape(r.train_corpus_id) + ",";
    out += detail::csv_escape(r.test_set_id) + ",";
    out += detail::format_fixed(r.perplexity, 6) + ",";
    out += std::to_string(r.token_count) + ",";
    out += detail::format_fixed(r.oov_rate, 6) + ",";
    out += std::to_string(report.config.order) + ",";
    out += detail::format_fixed(report.config.discount, 2) + ",";
    out += std::to_string(report.config.min_count) + "\n";
  }
  return out;
}

// Sources x test sets pivot: one row per training corpus, one perplexity
// column per test set.
inline std::string fig1_csv(const PerplexityReport& report) {
  std::set<std::string> tests;
  std::set<std::string> trains;
  std::map<std::pair<std::string, std::string>, double> cell;
  for (const auto& r : report.rows) {
    tests.insert(r.test_set_id);
    trains.insert(r.train_corpus_id);
    cell[{r.train_corpus_id, r.test_set_id}] = r.perplexity;
  }
  std::string out = "train_corpus_id";
  for (const auto& t : tests) out += "," + detail::csv_escape(t);
  out += "\n";
  for (const auto& tr : trains) {
    out += detail::csv_escape(tr);
    for (const auto& t : tests) {
      auto it = cell.find({tr, t});
      out += ",";
      out += it == cell.end() ? "" : detail::format_fixed(it->second, 6);
    }
    out += "\n";
  }
  return out;
}

// What a corpus is made of, judged from its manifest ancestry.
struct LineageInfo {
  std::set<std::string> prompts;
  std::set<std::string> models;
  bool has_synthetic = false;
  bool has_ingested = false;
};

// Walks the *content* lineage: what kinds of records ended up in the
// corpus. A synthesized corpus's chunk parent is generation provenance, not
// content, so the walk does not descend through it -- a pure synthetic
// corpus never counts as containing real text.
inline LineageInfo lineage_info(const std::string& corpus_id,
                                const fs::path& manifest_dir) {
  LineageInfo info;
  std::set<std::string> visited;
  auto visit = [&](auto&& self, const std::string& id) -> void {
    if (!visited.insert(id).second) return;
    const fs::path p = manifest_path(manifest_dir, id);
    if (!fs::exists(p)) return;
    CorpusManifest m;
    try {
      m = read_manifest(p);
    } catch (const DataError&) {
      return;
    }
    if (std::holds_alternative<IngestedRecipe>(m.recipe)) {
      info.has_ingested = true;
    } else if (const auto* r = std::get_if<SynthesizedRecipe>(&m.recipe)) {
      info.has_synthetic = true;
      info.prompts.insert(r->prompt_id);
      info.models.insert(r->model_id);
    } else if (const auto* r = std::get_if<TruncatedRecipe>(&m.recipe)) {
      self(self, r->parent);
    } else if (const auto* r = std::get_if<SampledRecipe>(&m.recipe)) {
      self(self, r->parent);
    } else if (const auto* r = std::get_if<MixedRecipe>(&m.recipe)) {
      for (const auto& parent : r->parents) self(self, parent.corpus_id);
    }
  };
  visit(visit, corpus_id);
  return info;
}

inline std::string prompt_label(const LineageInfo& info) {
  std::string label;
  for (const auto& p : info.prompts) {
    if (!label.empty()) label += "+";
    label += p;
  }
  return label.empty() ? "none" : label;
}

// Augmented corpora (real + synthetic ancestry) against the real-only
// baseline, one row per (augmented corpus, test set).
inline std::string fig2_csv(const PerplexityReport& report,
                            const std::string& baseline_id,
                            const fs::path& manifest_dir) {
  std::map<std::string, double> baseline_ppl;
  for (const auto& r : report.rows) {
    if (r.train_corpus_id == baseline_id) {
      baseline_ppl[r.test_set_id] = r.perplexity;
    }
  }
  if (baseline_ppl.empty()) {
    throw ConfigError("baseline corpus '" + baseline_id +
                      "' is not among the matrix train corpora");
  }
  std::string out =
      "train_corpus_id,test_set_id,perplexity,baseline_perplexity,delta\n";
  for (const auto& r : report.rows) {
    if (r.train_corpus_id == baseline_id) continue;
    const LineageInfo info = lineage_info(r.train_corpus_id, manifest_dir);
    if (!(info.has_synthetic && info.has_ingested)) continue;
    const double base = baseline_ppl.at(r.test_set_id);
    out += detail::csv_escape(r.train_corpus_id) + ",";
    out += detail::csv_escape(r.test_set_id) + ",";
    out += detail::format_fixed(r.perplexity, 6) + ",";
    out += detail::format_fixed(base, 6) + ",";
    out += detail::format_fixed(r.perplexity - base, 6) + "\n";
  }
  return out;
}

// Per-prompt averages across models for augmented corpora. Corpora whose
// ancestry spans several prompts land in combined rows ("P1+P2").
inline std::string fig3_csv(const PerplexityReport& report,
                            const fs::path& manifest_dir) {
  struct Acc {
    double sum = 0.0;
    int n = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> groups;
  for (const auto& r : report.rows) {
    const LineageInfo info = lineage_info(r.train_corpus_id, manifest_dir);
    if (!info.has_synthetic) continue;
    auto& acc = groups[{prompt_label(info), r.test_set_id}];
    acc.sum += r.perplexity;
    acc.n += 1;
  }
  std::string out = "prompt_label,test_set_id,mean_perplexity,corpus_count\n";
  for (const auto& [key, acc] : groups) {
    out += detail::csv_escape(key.first) + ",";
    out += detail::csv_escape(key.second) + ",";
    out += detail::format_fixed(acc.sum / acc.n, 6) + ",";
    out += std::to_string(acc.n) + "\n";
  }
  return out;
}

}  // namespace clinsynth
