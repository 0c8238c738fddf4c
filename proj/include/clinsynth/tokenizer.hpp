#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "clinsynth/text.hpp"

// The reference tokenization used everywhere token counts matter: chunk
// budgets, corpus budgets, and n-gram evaluation. One normative rule set,
// independent of any model's tokenizer:
//
//   - a maximal run of [A-Za-z0-9_] is one token;
//   - every other non-whitespace character (one UTF-8 code point) is one
//     token;
//   - whitespace is never a token.

namespace clinsynth {

// Invokes `fn(begin, len)` for each token, in order. Returns the count.
template <typename Fn>
std::uint64_t for_each_ref_token(std::string_view text, Fn&& fn) {
  std::uint64_t count = 0;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (is_ascii_space(c)) {
      ++i;
      continue;
    }
    if (is_word_char(c)) {
      std::size_t j = i + 1;
      while (j < n && is_word_char(text[j])) ++j;
      fn(i, j - i);
      ++count;
      i = j;
      continue;
    }
    std::size_t len = utf8_seq_len(static_cast<unsigned char>(c));
    if (i + len > n) len = 1;
    fn(i, len);
    ++count;
    i += len;
  }
  return count;
}

inline std::uint64_t count_ref_tokens(std::string_view text) {
  return for_each_ref_token(text, [](std::size_t, std::size_t) {});
}

inline std::vector<std::string_view> ref_tokenize(std::string_view text) {
  std::vector<std::string_view> tokens;
  for_each_ref_token(text, [&](std::size_t pos, std::size_t len) {
    tokens.push_back(text.substr(pos, len));
  });
  return tokens;
}

}  // namespace clinsynth
