#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "clinsynth/errors.hpp"
#include "clinsynth/io.hpp"
#include "clinsynth/sentences.hpp"
#include "clinsynth/tokenizer.hpp"

// Greedy left-to-right packing of whole sentences into token-budgeted
// chunks: a sentence joins the current chunk iff the running count plus one
// separator charge plus the sentence's count stays within the budget. A
// single sentence over the budget becomes its own chunk with overflow set.

namespace clinsynth {

inline constexpr std::uint64_t kDefaultChunkBudget = 300;

struct Chunk {
  std::string chunk_id;  // note_id + ":" + first sentence index
  std::string note_id;
  std::uint32_t sentence_first = 0;
  std::uint32_t sentence_count = 0;
  std::string text;
  std::uint64_t ref_token_count = 0;
  bool overflow = false;
};

// `note_text` supplies the gaps between sentences: sentences separated by a
// newline in the source are joined with '\n', otherwise with a space.
inline std::vector<Chunk> coalesce_chunks(
    std::string_view note_text, std::span<const Sentence> sentences,
    std::uint64_t chunk_budget = kDefaultChunkBudget) {
  if (chunk_budget < 1) throw ConfigError("chunk_budget must be >= 1");

  std::vector<Chunk> chunks;
  Chunk current;
  bool open = false;

  auto flush = [&] {
    if (!open) return;
    current.chunk_id =
        current.note_id + ":" + std::to_string(current.sentence_first);
    chunks.push_back(std::move(current));
    current = Chunk{};
    open = false;
  };

  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const Sentence& s = sentences[i];
    const std::uint64_t tokens = count_ref_tokens(s.text);
    if (open && current.ref_token_count + 1 + tokens <= chunk_budget) {
      const std::string_view gap = note_text.substr(
          sentences[i - 1].end_byte, s.start_byte - sentences[i - 1].end_byte);
      current.text += gap.find('\n') != std::string_view::npos ? '\n' : ' ';
      current.text += s.text;
      current.ref_token_count += 1 + tokens;
      current.sentence_count += 1;
      continue;
    }
    flush();
    current.note_id = s.note_id;
    current.sentence_first = s.index;
    current.sentence_count = 1;
    current.text = s.text;
    current.ref_token_count = tokens;
    current.overflow = tokens > chunk_budget;
    open = true;
  }
  flush();
  return chunks;
}

inline std::vector<Chunk> chunk_note(const SourceNote& note,
                                     std::uint64_t chunk_budget =
                                         kDefaultChunkBudget) {
  const auto sentences = split_sentences(note);
  return coalesce_chunks(note.text, sentences, chunk_budget);
}

// Chunk rows carry "text" and "ref_tokens", so a chunk file also loads as a
// plain corpus.
inline std::string chunks_to_jsonl(const std::vector<Chunk>& chunks) {
  std::string out;
  for (const auto& c : chunks) {
    nlohmann::json row{
        {"chunk_id", c.chunk_id},       {"note_id", c.note_id},
        {"overflow", c.overflow},       {"ref_tokens", c.ref_token_count},
        {"sentence_count", c.sentence_count},
        {"sentence_first", c.sentence_first},
        {"text", c.text},
    };
    out += row.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<Chunk> load_chunks_jsonl(const fs::path& path) {
  std::vector<Chunk> chunks;
  const std::string content = read_file(path);
  std::uint64_t line_no = 0;
  for (std::string_view line : split_lines(content)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": invalid chunk record");
    }
    try {
      Chunk c;
      c.chunk_id = j.at("chunk_id").get<std::string>();
      c.note_id = j.at("note_id").get<std::string>();
      c.overflow = j.at("overflow").get<bool>();
      c.ref_token_count = j.at("ref_tokens").get<std::uint64_t>();
      c.sentence_count = j.at("sentence_count").get<std::uint32_t>();
      c.sentence_first = j.at("sentence_first").get<std::uint32_t>();
      c.text = j.at("text").get<std::string>();
      chunks.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return chunks;
}

}  // namespace clinsynth
