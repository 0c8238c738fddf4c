#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clinsynth/errors.hpp"
#include "clinsynth/io.hpp"
#include "clinsynth/rng.hpp"
#include "clinsynth/text.hpp"
#include "clinsynth/tokenizer.hpp"

// A corpus is an ordered list of text records measured in reference tokens,
// each carrying a link to the record it came from in its parent corpus.
// Every operation here is a pure function of its inputs plus an explicit
// seed; corpora are values, never mutated in place.

namespace clinsynth {

struct RecordOrigin {
  std::string corpus_id;
  std::uint64_t record_index = 0;

  bool operator==(const RecordOrigin&) const = default;
};

struct CorpusRecord {
  std::string text;
  std::uint64_t ref_tokens = 0;
  RecordOrigin origin;
};

struct Corpus {
  std::string corpus_id;
  std::vector<CorpusRecord> records;
  std::uint64_t total_ref_tokens = 0;

  void recompute_total() {
    total_ref_tokens = 0;
    for (const auto& r : records) total_ref_tokens += r.ref_tokens;
  }
};

inline Corpus make_corpus(std::string corpus_id,
                          const std::vector<std::string>& texts) {
  Corpus c;
  c.corpus_id = std::move(corpus_id);
  c.records.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    CorpusRecord r;
    r.text = texts[i];
    r.ref_tokens = count_ref_tokens(r.text);
    r.origin = {c.corpus_id, i};
    c.records.push_back(std::move(r));
  }
  c.recompute_total();
  return c;
}

struct TruncateResult {
  Corpus corpus;
  bool empty_result = false;  // first record alone exceeded the budget
};

// Keeps the maximal prefix of whole records whose total stays within the
// budget. Records are never split mid-text; the slack is bounded by one
// record.
inline TruncateResult truncate_to_budget(const Corpus& corpus,
                                         std::uint64_t budget_tokens,
                                         std::string out_id) {
  if (budget_tokens < 1) throw ConfigError("budget_tokens must be >= 1");
  TruncateResult result;
  result.corpus.corpus_id = std::move(out_id);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const auto& r = corpus.records[i];
    if (total + r.ref_tokens > budget_tokens) break;
    total += r.ref_tokens;
    result.corpus.records.push_back(
        {r.text, r.ref_tokens, {corpus.corpus_id, i}});
  }
  result.corpus.total_ref_tokens = total;
  result.empty_result = result.corpus.records.empty();
  return result;
}

// Uniform sample without replacement, order preserved. Selection sampling
// (Algorithm S) over mt19937_64(seed); see rng.hpp.
inline Corpus sample_records(const Corpus& corpus, std::size_t n,
                             std::uint64_t seed, std::string out_id) {
  if (n > corpus.records.size()) {
    throw ConfigError("sample size " + std::to_string(n) +
                      " exceeds corpus record count " +
                      std::to_string(corpus.records.size()));
  }
  Corpus out;
  out.corpus_id = std::move(out_id);
  for (std::size_t i : sample_indices(corpus.records.size(), n, seed)) {
    const auto& r = corpus.records[i];
    out.records.push_back({r.text, r.ref_tokens, {corpus.corpus_id, i}});
  }
  out.recompute_total();
  return out;
}

struct DedupResult {
  Corpus corpus;
  std::uint64_t removed = 0;
};

// Exact dedup on whitespace-collapsed, case-preserved text. First
// occurrence wins.
inline DedupResult dedup_exact(const Corpus& corpus, std::string out_id) {
  DedupResult result;
  result.corpus.corpus_id = std::move(out_id);
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const auto& r = corpus.records[i];
    if (!seen.insert(collapse_whitespace(r.text)).second) {
      ++result.removed;
      continue;
    }
    result.corpus.records.push_back(
        {r.text, r.ref_tokens, {corpus.corpus_id, i}});
  }
  result.corpus.recompute_total();
  return result;
}

enum class MixMode { concat, interleave };

inline const char* to_string(MixMode m) {
  return m == MixMode::concat ? "concat" : "interleave";
}

inline MixMode mix_mode_from_string(std::string_view s) {
  if (s == "concat") return MixMode::concat;
  if (s == "interleave") return MixMode::interleave;
  throw ConfigError("unknown mix mode '" + std::string(s) +
                    "' (expected concat or interleave)");
}

struct MixParent {
  const Corpus* corpus = nullptr;
  std::uint64_t budget_tokens = 0;
};

// Truncates each parent to its budget, then either concatenates parents in
// listed order or interleaves them record by record. Interleave visits
// parents in a seed-shuffled order, cycling that fixed permutation and
// skipping exhausted parents.
inline Corpus mix(const std::vector<MixParent>& parents, MixMode mode,
                  std::uint64_t seed, std::string out_id) {
  if (parents.empty()) throw ConfigError("mix requires at least one parent");
  Corpus out;
  out.corpus_id = std::move(out_id);

  std::vector<Corpus> truncated;
  truncated.reserve(parents.size());
  for (const auto& p : parents) {
    truncated.push_back(
        truncate_to_budget(*p.corpus, p.budget_tokens, p.corpus->corpus_id)
            .corpus);
  }

  if (mode == MixMode::concat) {
    for (const auto& t : truncated) {
      for (const auto& r : t.records) out.records.push_back(r);
    }
  } else {
    std::vector<std::size_t> order(truncated.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    deterministic_shuffle(order, rng);
    std::vector<std::size_t> cursor(truncated.size(), 0);
    bool any = true;
    while (any) {
      any = false;
      for (std::size_t p : order) {
        if (cursor[p] < truncated[p].records.size()) {
          out.records.push_back(truncated[p].records[cursor[p]++]);
          any = true;
        }
      }
    }
  }
  out.recompute_total();
  return out;
}

// --- JSONL serialization ------------------------------------------------
//
// Generic corpus rows: {"origin":{...},"ref_tokens":N,"text":"..."}.
// nlohmann::json keeps keys sorted, so output is canonical by construction.

inline std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus.records) {
    nlohmann::json row{
        {"origin",
         {{"corpus_id", r.origin.corpus_id},
          {"record_index", r.origin.record_index}}},
        {"ref_tokens", r.ref_tokens},
        {"text", r.text},
    };
    out += row.dump();
    out += '\n';
  }
  return out;
}

inline void save_corpus_jsonl(const Corpus& corpus, const fs::path& path) {
  atomic_write_file(path, corpus_to_jsonl(corpus));
}

inline Corpus load_corpus_jsonl(const fs::path& path, std::string corpus_id) {
  Corpus c;
  c.corpus_id = std::move(corpus_id);
  const std::string content = read_file(path);
  std::uint64_t line_no = 0;
  for (std::string_view line : split_lines(content)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded() || !row.is_object() || !row.contains("text") ||
        !row.contains("ref_tokens")) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": malformed corpus record");
    }
    CorpusRecord r;
    r.text = row.at("text").get<std::string>();
    r.ref_tokens = row.at("ref_tokens").get<std::uint64_t>();
    if (row.contains("origin")) {
      r.origin.corpus_id = row.at("origin").value("corpus_id", c.corpus_id);
      r.origin.record_index =
          row.at("origin").value("record_index", line_no - 1);
    } else {
      r.origin = {c.corpus_id, line_no - 1};
    }
    c.records.push_back(std::move(r));
  }
  c.recompute_total();
  return c;
}

// --- Plain-text export ---------------------------------------------------
//
// One record per paragraph, blank line between records. Interior blank
// lines are collapsed to a single newline so the format round-trips; the
// reference tokenizer ignores whitespace, so token counts are unchanged.

inline std::string corpus_to_text(const Corpus& corpus) {
  std::string out;
  bool first = true;
  for (const auto& r : corpus.records) {
    if (!first) out += "\n\n";
    first = false;
    std::string_view text = trim_view(r.text);
    std::size_t i = 0;
    while (i < text.size()) {
      if (text[i] == '\n') {
        std::size_t j = i;
        while (j < text.size() && (text[j] == '\n' || text[j] == '\r' ||
                                   text[j] == ' ' || text[j] == '\t')) {
          ++j;
        }
        out += '\n';
        i = j;
      } else {
        out += text[i++];
      }
    }
  }
  if (!out.empty()) out += '\n';
  return out;
}

inline void export_corpus_text(const Corpus& corpus, const fs::path& path) {
  atomic_write_file(path, corpus_to_text(corpus));
}

inline Corpus load_corpus_text(const fs::path& path, std::string corpus_id) {
  const std::string content = read_file(path);
  Corpus c;
  c.corpus_id = std::move(corpus_id);
  std::string current;
  auto flush = [&] {
    std::string_view t = trim_view(current);
    if (!t.empty()) {
      CorpusRecord r;
      r.text = std::string(t);
      r.ref_tokens = count_ref_tokens(r.text);
      r.origin = {c.corpus_id, c.records.size()};
      c.records.push_back(std::move(r));
    }
    current.clear();
  };
  for (std::string_view line : split_lines(content)) {
    if (trim_view(line).empty()) {
      flush();
    } else {
      if (!current.empty()) current += '\n';
      current += line;
    }
  }
  flush();
  c.recompute_total();
  return c;
}

}  // namespace clinsynth
