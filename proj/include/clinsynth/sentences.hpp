#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "clinsynth/notes.hpp"
#include "clinsynth/text.hpp"

// Rule-based sentence segmentation for clinical notes. Clinical text is
// header- and list-heavy, so alongside the usual terminator rule there are
// two hard breaks:
//
//   - split after [.?!] followed by whitespace and an uppercase letter or
//     digit, unless the period ends a known abbreviation;
//   - break at blank lines;
//   - break before section-header lines matching ^[A-Z][A-Za-z /]+:
//
// Sentences are exact byte spans of the note; everything between two spans
// is whitespace, so the original note is reproducible from the spans.

namespace clinsynth {

struct Sentence {
  std::string note_id;
  std::uint32_t index = 0;
  std::size_t start_byte = 0;
  std::size_t end_byte = 0;
  std::string text;
};

namespace detail {

inline const std::array<std::string_view, 13>& abbreviations() {
  static const std::array<std::string_view, 13> kAbbrev = {
      "Dr.",    "Mr.",    "Mrs.",    "Ms.",    "St.",  "vs.", "e.g.",
      "i.e.",   "q.d.",   "b.i.d.",  "t.i.d.", "p.r.n.", "Pt.",
  };
  return kAbbrev;
}

// True if the period at `pos` ends a listed abbreviation. The candidate is
// the maximal run of letters and periods ending at `pos`.
inline bool period_ends_abbreviation(std::string_view text, std::size_t pos) {
  std::size_t start = pos;
  while (start > 0) {
    const char c = text[start - 1];
    if (is_ascii_alpha(c) || c == '.') {
      --start;
    } else {
      break;
    }
  }
  const std::string_view candidate = text.substr(start, pos - start + 1);
  for (std::string_view abbr : abbreviations()) {
    if (candidate == abbr) return true;
  }
  return false;
}

// ^[A-Z][A-Za-z /]+:
inline bool is_header_line(std::string_view line) {
  if (line.size() < 3 || !is_ascii_upper(line[0])) return false;
  std::size_t i = 1;
  while (i < line.size() &&
         (is_ascii_alpha(line[i]) || line[i] == ' ' || line[i] == '/')) {
    ++i;
  }
  return i >= 2 && i < line.size() && line[i] == ':';
}

}  // namespace detail

inline std::vector<Sentence> split_sentences(std::string_view text,
                                             const std::string& note_id) {
  std::vector<Sentence> sentences;
  auto emit = [&](std::size_t from, std::size_t to) {
    while (from < to && is_ascii_space(text[from])) ++from;
    while (to > from && is_ascii_space(text[to - 1])) --to;
    if (from >= to) return;
    Sentence s;
    s.note_id = note_id;
    s.index = static_cast<std::uint32_t>(sentences.size());
    s.start_byte = from;
    s.end_byte = to;
    s.text = std::string(text.substr(from, to - from));
    sentences.push_back(std::move(s));
  };

  // Pass 1: hard blocks (blank lines, header lines).
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  std::size_t block_start = 0;
  bool in_block = false;
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    const std::string_view line = text.substr(line_start, line_end - line_start);
    const bool blank = trim_view(line).empty();
    if (blank) {
      if (in_block) {
        blocks.push_back({block_start, line_start});
        in_block = false;
      }
    } else if (detail::is_header_line(line)) {
      if (in_block) blocks.push_back({block_start, line_start});
      block_start = line_start;
      in_block = true;
    } else if (!in_block) {
      block_start = line_start;
      in_block = true;
    }
    if (line_end == text.size()) break;
    line_start = line_end + 1;
  }
  if (in_block) blocks.push_back({block_start, text.size()});

  // Pass 2: terminator splits within each block.
  for (const auto& [bs, be] : blocks) {
    std::size_t seg_start = bs;
    std::size_t i = bs;
    while (i < be) {
      const char c = text[i];
      if (c == '.' || c == '?' || c == '!') {
        std::size_t j = i + 1;
        bool split = false;
        if (j < be && is_ascii_space(text[j])) {
          while (j < be && is_ascii_space(text[j])) ++j;
          if (j < be && (is_ascii_upper(text[j]) || is_ascii_digit(text[j]))) {
            split = true;
          }
        }
        if (split && c == '.' && detail::period_ends_abbreviation(text, i)) {
          split = false;
        }
        if (split) {
          emit(seg_start, i + 1);
          seg_start = j;
          i = j;
          continue;
        }
      }
      ++i;
    }
    emit(seg_start, be);
  }
  return sentences;
}

inline std::vector<Sentence> split_sentences(const SourceNote& note) {
  return split_sentences(note.text, note.note_id);
}

}  // namespace clinsynth
