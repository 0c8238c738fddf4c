#pragma once

#include <deque>
#include <future>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clinsynth/chunking.hpp"
#include "clinsynth/corpus.hpp"
#include "clinsynth/errors.hpp"
#include "clinsynth/gateway.hpp"
#include "clinsynth/manifest.hpp"
#include "clinsynth/prompts.hpp"
#include "clinsynth/text.hpp"

// Orchestration: chunk -> prompt -> completion -> cleaned, validated,
// budget-gated generation records. Every issued request yields exactly one
// record, flagged or not, so the output corpus is a complete provenance log
// of the run.

namespace clinsynth {

enum class QualityFlag {
  empty,
  refusal,
  length_ratio_low,
  length_ratio_high,
  truncated,
};

inline const char* to_string(QualityFlag f) {
  switch (f) {
    case QualityFlag::empty: return "empty";
    case QualityFlag::refusal: return "refusal";
    case QualityFlag::length_ratio_low: return "length_ratio_low";
    case QualityFlag::length_ratio_high: return "length_ratio_high";
    default: return "truncated";
  }
}

inline QualityFlag quality_flag_from_string(std::string_view s) {
  if (s == "empty") return QualityFlag::empty;
  if (s == "refusal") return QualityFlag::refusal;
  if (s == "length_ratio_low") return QualityFlag::length_ratio_low;
  if (s == "length_ratio_high") return QualityFlag::length_ratio_high;
  if (s == "truncated") return QualityFlag::truncated;
  throw DataError("unknown quality flag '" + std::string(s) + "'");
}

struct GenerationRecord {
  std::string chunk_id;
  std::string source_note_id;
  std::string prompt_id;
  std::string model_id;
  std::string raw_text;
  std::string clean_text;
  bool boilerplate_stripped = false;
  std::set<QualityFlag> quality_flags;
  std::uint64_t completion_tokens = 0;
  std::uint64_t clean_ref_tokens = 0;
  bool accepted = false;    // counts toward the corpus budget
  std::string error;        // request-failure annotation, empty on success
};

namespace detail {

inline bool contains_ci(std::string_view haystack, std::string_view needle) {
  if (needle.empty() || haystack.size() < needle.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    bool hit = true;
    for (std::size_t k = 0; k < needle.size(); ++k) {
      if (ascii_lower(haystack[i + k]) != ascii_lower(needle[k])) {
        hit = false;
        break;
      }
    }
    if (hit) return true;
  }
  return false;
}

enum class ModelFamily { llama, gemma, qwen, mistral, unknown };

inline ModelFamily family_of(std::string_view model_id) {
  const std::string id = ascii_lower_copy(model_id);
  if (id.find("llama") != std::string::npos) return ModelFamily::llama;
  if (id.find("gemma") != std::string::npos) return ModelFamily::gemma;
  if (id.find("qwen") != std::string::npos) return ModelFamily::qwen;
  if (id.find("mistral") != std::string::npos) return ModelFamily::mistral;
  return ModelFamily::unknown;
}

inline bool is_fence_line(std::string_view line) {
  return line.substr(0, 3) == "```";
}

// Family-specific boilerplate openers, matched against one line.
inline bool is_boilerplate_line(std::string_view line, ModelFamily fam) {
  switch (fam) {
    case ModelFamily::llama:
      return (starts_with_ci(line, "here is") ||
              starts_with_ci(line, "here's")) &&
             contains_ci(line, "paraphras");
    case ModelFamily::gemma:
      return !line.empty() && line[0] == '#' && contains_ci(line, "paraphras");
    case ModelFamily::qwen:
      return starts_with_ci(line, "assistant:");
    default:
      return false;
  }
}

}  // namespace detail

// Removes leading boilerplate lines and leading/trailing markdown fences.
// clean_text is always a contiguous substring of raw_text; interior bytes
// are never touched. Idempotent (fixpoint loop).
inline std::pair<std::string, bool> strip_boilerplate(
    std::string_view raw_text, std::string_view model_id) {
  const detail::ModelFamily fam = detail::family_of(model_id);
  std::size_t begin = 0;
  std::size_t end = raw_text.size();
  bool stripped = false;

  for (;;) {
    while (begin < end && is_ascii_space(raw_text[begin])) ++begin;
    std::size_t line_end = raw_text.find('\n', begin);
    if (line_end == std::string_view::npos || line_end > end) line_end = end;
    const std::string_view line =
        trim_view(raw_text.substr(begin, line_end - begin));
    if (!line.empty() && (detail::is_fence_line(line) ||
                          detail::is_boilerplate_line(line, fam))) {
      begin = line_end;
      stripped = true;
      continue;
    }
    break;
  }
  for (;;) {
    while (end > begin && is_ascii_space(raw_text[end - 1])) --end;
    std::size_t line_start = raw_text.rfind('\n', end ? end - 1 : 0);
    line_start = line_start == std::string_view::npos || line_start < begin
                     ? begin
                     : line_start + 1;
    const std::string_view line =
        trim_view(raw_text.substr(line_start, end - line_start));
    if (!line.empty() && detail::is_fence_line(line)) {
      end = line_start;
      stripped = true;
      continue;
    }
    break;
  }
  while (begin < end && is_ascii_space(raw_text[begin])) ++begin;
  return {std::string(raw_text.substr(begin, end - begin)), stripped};
}

// Flags: empty output, refusals, length-ratio outliers vs the source chunk
// (clean/source outside [0.3, 3.0], checked in exact integer arithmetic),
// and truncation. No flags means the record is usable corpus text.
inline std::set<QualityFlag> validate_generation(
    std::string_view clean_text, std::uint64_t clean_ref_tokens,
    std::uint64_t source_ref_tokens, FinishReason finish_reason) {
  std::set<QualityFlag> flags;
  if (finish_reason == FinishReason::length) {
    flags.insert(QualityFlag::truncated);
  }
  if (trim_view(clean_text).empty()) {
    flags.insert(QualityFlag::empty);
    return flags;
  }
  const std::string_view t = trim_view(clean_text);
  if (starts_with_ci(t, "i cannot") || starts_with_ci(t, "i can't") ||
      starts_with_ci(t, "i'm sorry, but") ||
      starts_with_ci(t, "i am sorry, but")) {
    flags.insert(QualityFlag::refusal);
  }
  if (source_ref_tokens > 0) {
    if (10 * clean_ref_tokens < 3 * source_ref_tokens) {
      flags.insert(QualityFlag::length_ratio_low);
    } else if (clean_ref_tokens > 3 * source_ref_tokens) {
      flags.insert(QualityFlag::length_ratio_high);
    }
  }
  return flags;
}

struct SynthesisOptions {
  std::string corpus_id;
  std::string chunks_corpus_id;  // provenance parent
  std::uint64_t budget_tokens = 0;
  DecodingParams decoding;
  // How many requests may be outstanding beyond the committed prefix. The
  // issue gate re-checks the budget only at in-order commits, so the set of
  // issued chunks is a pure function of responses and this window, never of
  // timing. Window 1 reproduces strict stop-after-crossing issuance.
  int dispatch_window = 1;
  std::string created_utc;
  std::optional<std::uint64_t> seed;
};

struct SynthesisResult {
  std::vector<GenerationRecord> records;
  CorpusManifest manifest;
  std::uint64_t accepted_records = 0;
  std::uint64_t accepted_ref_tokens = 0;
  bool budget_unmet = false;
};

inline SynthesisResult rephrase_corpus(const std::vector<Chunk>& chunks,
                                       const PromptTemplate& prompt,
                                       Gateway& gateway,
                                       const SynthesisOptions& opt) {
  if (opt.budget_tokens < 1) {
    throw ConfigError("budget_tokens must be >= 1");
  }
  const auto health = gateway.healthcheck();
  if (!health.reachable) {
    throw RequestFailed("endpoint unreachable: " +
                        gateway.endpoint().base_url, 0, 0);
  }

  const int window = opt.dispatch_window < 1 ? 1 : opt.dispatch_window;
  const std::string& model_id = gateway.endpoint().model_id;

  SynthesisResult out;
  struct Outcome {
    std::optional<Completion> completion;
    std::string error;
  };
  std::deque<std::future<Outcome>> in_flight;
  std::size_t frontier = 0;
  std::size_t committed = 0;

  auto issue = [&] {
    const Chunk& chunk = chunks[frontier];
    ChatRequest req = render_request(prompt, chunk, opt.decoding);
    in_flight.push_back(std::async(
        std::launch::async, [&gateway, req = std::move(req)]() -> Outcome {
          try {
            return {gateway.complete(req), ""};
          } catch (const GatewayError& e) {
            return {std::nullopt, e.what()};
          }
        }));
    ++frontier;
  };
  auto can_issue = [&] {
    return frontier < chunks.size() &&
           frontier - committed < static_cast<std::size_t>(window) &&
           out.accepted_ref_tokens < opt.budget_tokens;
  };

  while (can_issue()) issue();
  while (committed < frontier) {
    Outcome oc = in_flight.front().get();
    in_flight.pop_front();
    const Chunk& chunk = chunks[committed];

    GenerationRecord r;
    r.chunk_id = chunk.chunk_id;
    r.source_note_id = chunk.note_id;
    r.prompt_id = prompt.prompt_id;
    r.model_id = model_id;
    if (oc.completion) {
      r.raw_text = oc.completion->output_text;
      auto [clean, stripped] = strip_boilerplate(r.raw_text, model_id);
      r.clean_text = std::move(clean);
      r.boilerplate_stripped = stripped;
      r.completion_tokens = oc.completion->completion_tokens;
      r.clean_ref_tokens = count_ref_tokens(r.clean_text);
      r.quality_flags =
          validate_generation(r.clean_text, r.clean_ref_tokens,
                              chunk.ref_token_count,
                              oc.completion->finish_reason);
    } else {
      r.quality_flags.insert(QualityFlag::empty);
      r.error = oc.error;
    }
    if (r.quality_flags.empty() &&
        out.accepted_ref_tokens < opt.budget_tokens) {
      r.accepted = true;
      out.accepted_ref_tokens += r.clean_ref_tokens;
      ++out.accepted_records;
    }
    out.records.push_back(std::move(r));
    ++committed;
    while (can_issue()) issue();
  }

  out.budget_unmet = out.accepted_ref_tokens < opt.budget_tokens;

  CorpusManifest m;
  m.corpus_id = opt.corpus_id;
  m.created_utc = opt.created_utc;
  SynthesizedRecipe recipe;
  recipe.prompt_id = prompt.prompt_id;
  recipe.model_id = model_id;
  recipe.base_url = gateway.endpoint().base_url;
  recipe.chunks_corpus = opt.chunks_corpus_id;
  recipe.temperature = opt.decoding.temperature;
  recipe.top_p = opt.decoding.top_p;
  recipe.max_new_tokens = opt.decoding.max_new_tokens;
  recipe.decoding_seed = opt.decoding.seed;
  recipe.budget_tokens = opt.budget_tokens;
  recipe.dispatch_window = window;
  m.recipe = recipe;
  m.token_totals.record_count = out.records.size();
  m.token_totals.total_ref_tokens = out.accepted_ref_tokens;
  m.token_totals.accepted_records = out.accepted_records;
  m.token_totals.accepted_ref_tokens = out.accepted_ref_tokens;
  if (out.budget_unmet) m.token_totals.budget_unmet = true;
  m.seed = opt.seed;
  out.manifest = std::move(m);
  return out;
}

// --- Generation record JSONL ----------------------------------------------

inline nlohmann::json generation_record_to_json(const GenerationRecord& r) {
  nlohmann::json flags = nlohmann::json::array();
  for (QualityFlag f : r.quality_flags) flags.push_back(to_string(f));
  nlohmann::json j{
      {"accepted", r.accepted},
      {"boilerplate_stripped", r.boilerplate_stripped},
      {"chunk_id", r.chunk_id},
      {"clean_ref_tokens", r.clean_ref_tokens},
      {"clean_text", r.clean_text},
      {"completion_tokens", r.completion_tokens},
      {"model_id", r.model_id},
      {"prompt_id", r.prompt_id},
      {"quality_flags", flags},
      {"raw_text", r.raw_text},
      {"source_note_id", r.source_note_id},
  };
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline GenerationRecord generation_record_from_json(const nlohmann::json& j) {
  GenerationRecord r;
  r.accepted = j.at("accepted").get<bool>();
  r.boilerplate_stripped = j.at("boilerplate_stripped").get<bool>();
  r.chunk_id = j.at("chunk_id").get<std::string>();
  r.clean_ref_tokens = j.at("clean_ref_tokens").get<std::uint64_t>();
  r.clean_text = j.at("clean_text").get<std::string>();
  r.completion_tokens = j.at("completion_tokens").get<std::uint64_t>();
  r.model_id = j.at("model_id").get<std::string>();
  r.prompt_id = j.at("prompt_id").get<std::string>();
  for (const auto& f : j.at("quality_flags")) {
    r.quality_flags.insert(quality_flag_from_string(f.get<std::string>()));
  }
  r.raw_text = j.at("raw_text").get<std::string>();
  r.source_note_id = j.at("source_note_id").get<std::string>();
  r.error = j.value("error", "");
  return r;
}

inline std::string generation_records_to_jsonl(
    const std::vector<GenerationRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += generation_record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<GenerationRecord> load_generation_records(
    const fs::path& path) {
  std::vector<GenerationRecord> records;
  std::uint64_t line_no = 0;
  const std::string content = read_file(path);
  for (std::string_view line : split_lines(content)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": invalid generation record");
    }
    try {
      records.push_back(generation_record_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return records;
}

// The corpus view of a generation run: accepted, unflagged records only.
inline Corpus generation_corpus(const std::vector<GenerationRecord>& records,
                                std::string corpus_id) {
  Corpus c;
  c.corpus_id = std::move(corpus_id);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.accepted || !r.quality_flags.empty()) continue;
    c.records.push_back({r.clean_text, r.clean_ref_tokens, {c.corpus_id, i}});
  }
  c.recompute_total();
  return c;
}

inline Corpus load_generation_corpus(const fs::path& path,
                                     std::string corpus_id) {
  return generation_corpus(load_generation_records(path),
                           std::move(corpus_id));
}

}  // namespace clinsynth
