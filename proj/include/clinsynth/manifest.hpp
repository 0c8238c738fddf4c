#pragma once

#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "clinsynth/chat.hpp"
#include "clinsynth/corpus.hpp"
#include "clinsynth/errors.hpp"
#include "clinsynth/io.hpp"
#include "clinsynth/version.hpp"

// Machine-readable lineage for every corpus this tool produces. A manifest
// records exactly how its corpus came to be -- source file and filters,
// prompt/model/decoding, truncation budgets, sample seeds, mixture recipes
// -- so any experiment can be re-run from manifests alone and any output
// token can be traced back to its source note.
//
// Serialization is canonical: sorted keys, two-space indent, trailing
// newline. read(write(m)) == m and write(read(p)) is byte-identical to p.

namespace clinsynth {

inline constexpr int kManifestSchemaVersion = 1;

struct FilterSpec {
  std::optional<std::string> note_type;
  std::optional<int> min_year;
  std::optional<int> max_year;

  bool empty() const { return !note_type && !min_year && !max_year; }
  bool operator==(const FilterSpec&) const = default;
};

struct IngestedRecipe {
  std::string source_path;
  std::string format;  // "jsonl" | "csv"
  FilterSpec filter;
  std::uint64_t chunk_budget = 0;
  bool operator==(const IngestedRecipe&) const = default;
};

struct SynthesizedRecipe {
  std::string prompt_id;
  std::string model_id;
  std::string base_url;
  std::string chunks_corpus;  // parent: the chunk corpus fed to the LLM
  double temperature = 0.0;
  double top_p = 0.0;
  int max_new_tokens = 0;
  std::optional<std::uint64_t> decoding_seed;
  std::uint64_t budget_tokens = 0;
  int dispatch_window = 1;
  bool operator==(const SynthesizedRecipe&) const = default;
};

struct TruncatedRecipe {
  std::string parent;
  std::uint64_t budget_tokens = 0;
  bool operator==(const TruncatedRecipe&) const = default;
};

struct SampledRecipe {
  std::string parent;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  bool operator==(const SampledRecipe&) const = default;
};

struct MixedRecipe {
  struct Parent {
    std::string corpus_id;
    std::uint64_t budget_tokens = 0;
    bool operator==(const Parent&) const = default;
  };
  std::vector<Parent> parents;
  std::string mode;  // "concat" | "interleave"
  bool operator==(const MixedRecipe&) const = default;
};

using Recipe = std::variant<IngestedRecipe, SynthesizedRecipe, TruncatedRecipe,
                            SampledRecipe, MixedRecipe>;

struct TokenTotals {
  std::uint64_t record_count = 0;
  std::uint64_t total_ref_tokens = 0;
  std::optional<std::uint64_t> accepted_records;
  std::optional<std::uint64_t> accepted_ref_tokens;
  std::optional<std::uint64_t> removed_duplicates;
  std::optional<bool> budget_unmet;
  std::optional<bool> empty_result;
  bool operator==(const TokenTotals&) const = default;
};

struct CorpusManifest {
  int schema_version = kManifestSchemaVersion;
  std::string corpus_id;
  std::string created_utc;
  Recipe recipe;
  TokenTotals token_totals;
  std::optional<std::uint64_t> seed;
  std::string tool_version = kToolVersion;
  bool operator==(const CorpusManifest&) const = default;
};

namespace detail {

inline void require_known_keys(const nlohmann::json& obj,
                               const std::set<std::string>& allowed,
                               const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw DataError("manifest: unknown field '" + it.key() + "' at " +
                      where);
    }
  }
}

template <typename T>
T require_field(const nlohmann::json& obj, const char* key,
                const std::string& where) {
  if (!obj.contains(key)) {
    throw DataError("manifest: missing field '" + std::string(key) +
                    "' at " + where);
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError("manifest: field '" + std::string(key) + "' at " + where +
                    " has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const nlohmann::json& obj, const char* key,
                                const std::string& where) {
  if (!obj.contains(key)) return std::nullopt;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError("manifest: field '" + std::string(key) + "' at " + where +
                    " has the wrong type");
  }
}

}  // namespace detail

inline nlohmann::json manifest_to_json(const CorpusManifest& m) {
  nlohmann::json recipe;
  if (const auto* r = std::get_if<IngestedRecipe>(&m.recipe)) {
    recipe["kind"] = "ingested";
    recipe["source_path"] = r->source_path;
    recipe["format"] = r->format;
    recipe["chunk_budget"] = r->chunk_budget;
    if (!r->filter.empty()) {
      nlohmann::json f;
      if (r->filter.note_type) f["note_type"] = *r->filter.note_type;
      if (r->filter.min_year) f["min_year"] = *r->filter.min_year;
      if (r->filter.max_year) f["max_year"] = *r->filter.max_year;
      recipe["filter"] = f;
    }
  } else if (const auto* r = std::get_if<SynthesizedRecipe>(&m.recipe)) {
    recipe["kind"] = "synthesized";
    recipe["prompt_id"] = r->prompt_id;
    recipe["model_id"] = r->model_id;
    recipe["base_url"] = r->base_url;
    recipe["chunks_corpus"] = r->chunks_corpus;
    nlohmann::json dec;
    dec["temperature"] = r->temperature;
    dec["top_p"] = r->top_p;
    dec["max_new_tokens"] = r->max_new_tokens;
    if (r->decoding_seed) dec["seed"] = *r->decoding_seed;
    recipe["decoding"] = dec;
    recipe["budget_tokens"] = r->budget_tokens;
    recipe["dispatch_window"] = r->dispatch_window;
  } else if (const auto* r = std::get_if<TruncatedRecipe>(&m.recipe)) {
    recipe["kind"] = "truncated";
    recipe["parent"] = r->parent;
    recipe["budget_tokens"] = r->budget_tokens;
  } else if (const auto* r = std::get_if<SampledRecipe>(&m.recipe)) {
    recipe["kind"] = "sampled";
    recipe["parent"] = r->parent;
    recipe["n"] = r->n;
    recipe["seed"] = r->seed;
  } else if (const auto* r = std::get_if<MixedRecipe>(&m.recipe)) {
    recipe["kind"] = "mixed";
    recipe["mode"] = r->mode;
    nlohmann::json parents = nlohmann::json::array();
    for (const auto& p : r->parents) {
      parents.push_back({{"corpus_id", p.corpus_id},
                         {"budget_tokens", p.budget_tokens}});
    }
    recipe["parents"] = parents;
  }

  nlohmann::json totals;
  totals["record_count"] = m.token_totals.record_count;
  totals["total_ref_tokens"] = m.token_totals.total_ref_tokens;
  if (m.token_totals.accepted_records)
    totals["accepted_records"] = *m.token_totals.accepted_records;
  if (m.token_totals.accepted_ref_tokens)
    totals["accepted_ref_tokens"] = *m.token_totals.accepted_ref_tokens;
  if (m.token_totals.removed_duplicates)
    totals["removed_duplicates"] = *m.token_totals.removed_duplicates;
  if (m.token_totals.budget_unmet)
    totals["budget_unmet"] = *m.token_totals.budget_unmet;
  if (m.token_totals.empty_result)
    totals["empty_result"] = *m.token_totals.empty_result;

  nlohmann::json j;
  j["schema_version"] = m.schema_version;
  j["corpus_id"] = m.corpus_id;
  j["created_utc"] = m.created_utc;
  j["recipe"] = recipe;
  j["token_totals"] = totals;
  if (m.seed) j["seed"] = *m.seed;
  j["tool_version"] = m.tool_version;
  return j;
}

inline CorpusManifest manifest_from_json(const nlohmann::json& j) {
  using detail::optional_field;
  using detail::require_field;
  using detail::require_known_keys;

  if (!j.is_object()) throw DataError("manifest: root must be an object");
  require_known_keys(j,
                     {"schema_version", "corpus_id", "created_utc", "recipe",
                      "token_totals", "seed", "tool_version"},
                     "/");

  CorpusManifest m;
  m.schema_version = require_field<int>(j, "schema_version", "/");
  if (m.schema_version != kManifestSchemaVersion) {
    throw DataError("manifest: unsupported schema_version " +
                    std::to_string(m.schema_version));
  }
  m.corpus_id = require_field<std::string>(j, "corpus_id", "/");
  m.created_utc = require_field<std::string>(j, "created_utc", "/");
  m.tool_version = require_field<std::string>(j, "tool_version", "/");
  m.seed = optional_field<std::uint64_t>(j, "seed", "/");

  const nlohmann::json& rj = j.at("recipe");
  if (!rj.is_object()) throw DataError("manifest: /recipe must be an object");
  const std::string kind = require_field<std::string>(rj, "kind", "/recipe");
  if (kind == "ingested") {
    require_known_keys(
        rj, {"kind", "source_path", "format", "chunk_budget", "filter"},
        "/recipe");
    IngestedRecipe r;
    r.source_path = require_field<std::string>(rj, "source_path", "/recipe");
    r.format = require_field<std::string>(rj, "format", "/recipe");
    r.chunk_budget =
        require_field<std::uint64_t>(rj, "chunk_budget", "/recipe");
    if (rj.contains("filter")) {
      const auto& fj = rj.at("filter");
      require_known_keys(fj, {"note_type", "min_year", "max_year"},
                         "/recipe/filter");
      r.filter.note_type =
          optional_field<std::string>(fj, "note_type", "/recipe/filter");
      r.filter.min_year =
          optional_field<int>(fj, "min_year", "/recipe/filter");
      r.filter.max_year =
          optional_field<int>(fj, "max_year", "/recipe/filter");
    }
    m.recipe = std::move(r);
  } else if (kind == "synthesized") {
    require_known_keys(rj,
                       {"kind", "prompt_id", "model_id", "base_url",
                        "chunks_corpus", "decoding", "budget_tokens",
                        "dispatch_window"},
                       "/recipe");
    SynthesizedRecipe r;
    r.prompt_id = require_field<std::string>(rj, "prompt_id", "/recipe");
    r.model_id = require_field<std::string>(rj, "model_id", "/recipe");
    r.base_url = require_field<std::string>(rj, "base_url", "/recipe");
    r.chunks_corpus =
        require_field<std::string>(rj, "chunks_corpus", "/recipe");
    r.budget_tokens =
        require_field<std::uint64_t>(rj, "budget_tokens", "/recipe");
    r.dispatch_window =
        require_field<int>(rj, "dispatch_window", "/recipe");
    const auto& dj = rj.at("decoding");
    require_known_keys(dj, {"temperature", "top_p", "max_new_tokens", "seed"},
                       "/recipe/decoding");
    r.temperature =
        require_field<double>(dj, "temperature", "/recipe/decoding");
    r.top_p = require_field<double>(dj, "top_p", "/recipe/decoding");
    r.max_new_tokens =
        require_field<int>(dj, "max_new_tokens", "/recipe/decoding");
    r.decoding_seed =
        optional_field<std::uint64_t>(dj, "seed", "/recipe/decoding");
    m.recipe = std::move(r);
  } else if (kind == "truncated") {
    require_known_keys(rj, {"kind", "parent", "budget_tokens"}, "/recipe");
    TruncatedRecipe r;
    r.parent = require_field<std::string>(rj, "parent", "/recipe");
    r.budget_tokens =
        require_field<std::uint64_t>(rj, "budget_tokens", "/recipe");
    m.recipe = std::move(r);
  } else if (kind == "sampled") {
    require_known_keys(rj, {"kind", "parent", "n", "seed"}, "/recipe");
    SampledRecipe r;
    r.parent = require_field<std::string>(rj, "parent", "/recipe");
    r.n = require_field<std::uint64_t>(rj, "n", "/recipe");
    r.seed = require_field<std::uint64_t>(rj, "seed", "/recipe");
    m.recipe = std::move(r);
  } else if (kind == "mixed") {
    require_known_keys(rj, {"kind", "mode", "parents"}, "/recipe");
    MixedRecipe r;
    r.mode = require_field<std::string>(rj, "mode", "/recipe");
    if (r.mode != "concat" && r.mode != "interleave") {
      throw DataError("manifest: /recipe/mode must be concat or interleave");
    }
    if (!rj.contains("parents") || !rj.at("parents").is_array() ||
        rj.at("parents").empty()) {
      throw DataError("manifest: /recipe/parents must be a non-empty array");
    }
    std::size_t idx = 0;
    for (const auto& pj : rj.at("parents")) {
      const std::string where = "/recipe/parents/" + std::to_string(idx++);
      require_known_keys(pj, {"corpus_id", "budget_tokens"}, where);
      MixedRecipe::Parent p;
      p.corpus_id = require_field<std::string>(pj, "corpus_id", where);
      p.budget_tokens =
          require_field<std::uint64_t>(pj, "budget_tokens", where);
      r.parents.push_back(std::move(p));
    }
    m.recipe = std::move(r);
  } else {
    throw DataError("manifest: unknown recipe kind '" + kind + "'");
  }

  const nlohmann::json& tj = j.at("token_totals");
  require_known_keys(tj,
                     {"record_count", "total_ref_tokens", "accepted_records",
                      "accepted_ref_tokens", "removed_duplicates",
                      "budget_unmet", "empty_result"},
                     "/token_totals");
  m.token_totals.record_count =
      require_field<std::uint64_t>(tj, "record_count", "/token_totals");
  m.token_totals.total_ref_tokens =
      require_field<std::uint64_t>(tj, "total_ref_tokens", "/token_totals");
  m.token_totals.accepted_records = optional_field<std::uint64_t>(
      tj, "accepted_records", "/token_totals");
  m.token_totals.accepted_ref_tokens = optional_field<std::uint64_t>(
      tj, "accepted_ref_tokens", "/token_totals");
  m.token_totals.removed_duplicates = optional_field<std::uint64_t>(
      tj, "removed_duplicates", "/token_totals");
  m.token_totals.budget_unmet =
      optional_field<bool>(tj, "budget_unmet", "/token_totals");
  m.token_totals.empty_result =
      optional_field<bool>(tj, "empty_result", "/token_totals");
  return m;
}

inline std::string manifest_to_string(const CorpusManifest& m) {
  return manifest_to_json(m).dump(2) + "\n";
}

inline fs::path manifest_path(const fs::path& manifest_dir,
                              const std::string& corpus_id) {
  return manifest_dir / (corpus_id + ".json");
}

inline void write_manifest(const CorpusManifest& m, const fs::path& path) {
  atomic_write_file(path, manifest_to_string(m));
}

inline CorpusManifest read_manifest(const fs::path& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) {
    throw DataError("manifest: " + path.string() + " is not valid JSON");
  }
  try {
    return manifest_from_json(j);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline std::vector<std::string> parents_of(const CorpusManifest& m) {
  std::vector<std::string> out;
  if (const auto* r = std::get_if<SynthesizedRecipe>(&m.recipe)) {
    out.push_back(r->chunks_corpus);
  } else if (const auto* r = std::get_if<TruncatedRecipe>(&m.recipe)) {
    out.push_back(r->parent);
  } else if (const auto* r = std::get_if<SampledRecipe>(&m.recipe)) {
    out.push_back(r->parent);
  } else if (const auto* r = std::get_if<MixedRecipe>(&m.recipe)) {
    for (const auto& p : r->parents) out.push_back(p.corpus_id);
  }
  return out;
}

// Walks the ancestor DAG down to ingested sources. Every parent reference
// must resolve to a manifest file in `manifest_dir`; cycles are rejected.
inline std::vector<CorpusManifest> resolve_lineage(
    const std::string& corpus_id, const fs::path& manifest_dir) {
  std::vector<CorpusManifest> lineage;
  std::set<std::string> visiting;
  std::set<std::string> done;

  auto visit = [&](auto&& self, const std::string& id) -> void {
    if (done.count(id)) return;
    if (!visiting.insert(id).second) {
      throw DataError("manifest lineage: cycle through corpus '" + id + "'");
    }
    const fs::path p = manifest_path(manifest_dir, id);
    if (!fs::exists(p)) {
      throw DataError("manifest lineage: corpus '" + id +
                      "' has no manifest at " + p.string());
    }
    CorpusManifest m = read_manifest(p);
    for (const auto& parent : parents_of(m)) self(self, parent);
    visiting.erase(id);
    done.insert(id);
    lineage.push_back(std::move(m));
  };
  visit(visit, corpus_id);
  return lineage;
}

}  // namespace clinsynth
