#include <doctest.h>

#include <string>
#include <vector>

#include "clinsynth/chunking.hpp"
#include "clinsynth/rng.hpp"

using clinsynth::Chunk;
using clinsynth::coalesce_chunks;
using clinsynth::Sentence;

namespace {

// Builds a synthetic note of sentences with exact reference-token counts
// (k space-separated words), separated by single spaces.
struct NoteFixture {
  std::string text;
  std::vector<Sentence> sentences;

  explicit NoteFixture(const std::vector<int>& token_counts) {
    for (std::size_t i = 0; i < token_counts.size(); ++i) {
      if (i) text += ' ';
      const std::size_t start = text.size();
      for (int w = 0; w < token_counts[i]; ++w) {
        if (w) text += ' ';
        text += "w" + std::to_string(w);
      }
      Sentence s;
      s.note_id = "n";
      s.index = static_cast<std::uint32_t>(i);
      s.start_byte = start;
      s.end_byte = text.size();
      s.text = text.substr(start);
      sentences.push_back(std::move(s));
    }
  }
};

}  // namespace

TEST_CASE("greedy packing with separator charge") {
  NoteFixture f({120, 150, 100});
  const auto chunks = coalesce_chunks(f.text, f.sentences, 300);
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].sentence_first == 0);
  CHECK(chunks[0].sentence_count == 2);
  CHECK(chunks[0].ref_token_count == 271);  // 120 + 1 + 150
  CHECK(chunks[0].chunk_id == "n:0");
  CHECK(chunks[1].sentence_first == 2);
  CHECK(chunks[1].sentence_count == 1);
  CHECK(chunks[1].ref_token_count == 100);
  CHECK(chunks[1].chunk_id == "n:2");
  CHECK_FALSE(chunks[0].overflow);
}

TEST_CASE("single oversized sentence overflows alone") {
  NoteFixture f({450});
  const auto chunks = coalesce_chunks(f.text, f.sentences, 300);
  REQUIRE(chunks.size() == 1);
  CHECK(chunks[0].overflow);
  CHECK(chunks[0].ref_token_count == 450);
  CHECK(chunks[0].sentence_count == 1);
}

TEST_CASE("budget boundary is inclusive") {
  NoteFixture f({300});
  const auto chunks = coalesce_chunks(f.text, f.sentences, 300);
  REQUIRE(chunks.size() == 1);
  CHECK_FALSE(chunks[0].overflow);

  NoteFixture g({150, 149});
  CHECK(coalesce_chunks(g.text, g.sentences, 300).size() == 1);
  NoteFixture h({150, 150});
  CHECK(coalesce_chunks(h.text, h.sentences, 300).size() == 2);
}

TEST_CASE("oversized sentence never absorbs neighbours") {
  NoteFixture f({10, 450, 10});
  const auto chunks = coalesce_chunks(f.text, f.sentences, 300);
  REQUIRE(chunks.size() == 3);
  CHECK_FALSE(chunks[0].overflow);
  CHECK(chunks[1].overflow);
  CHECK(chunks[1].sentence_count == 1);
  CHECK_FALSE(chunks[2].overflow);
}

TEST_CASE("invalid budget") {
  NoteFixture f({10});
  CHECK_THROWS_AS(coalesce_chunks(f.text, f.sentences, 0),
                  clinsynth::ConfigError);
}

TEST_CASE("empty sentence list") {
  CHECK(coalesce_chunks("", {}, 300).empty());
}

TEST_CASE("chunks partition the sentence sequence") {
  clinsynth::Rng rng(4242);
  for (int round = 0; round < 20; ++round) {
    std::vector<int> counts;
    const std::size_t n = 1 + clinsynth::bounded_u64(rng, 30);
    for (std::size_t i = 0; i < n; ++i) {
      counts.push_back(1 + static_cast<int>(clinsynth::bounded_u64(rng, 80)));
    }
    NoteFixture f(counts);
    const std::uint64_t budget = 40 + clinsynth::bounded_u64(rng, 200);
    const auto chunks = coalesce_chunks(f.text, f.sentences, budget);
    std::uint32_t next = 0;
    for (const auto& c : chunks) {
      CHECK(c.sentence_first == next);
      CHECK(c.sentence_count >= 1);
      if (!c.overflow) CHECK(c.ref_token_count <= budget);
      if (c.overflow) CHECK(c.sentence_count == 1);
      next += c.sentence_count;
    }
    CHECK(next == f.sentences.size());
  }
}

TEST_CASE("raising the budget never increases chunk count") {
  clinsynth::Rng rng(777);
  for (int round = 0; round < 15; ++round) {
    std::vector<int> counts;
    const std::size_t n = 1 + clinsynth::bounded_u64(rng, 25);
    for (std::size_t i = 0; i < n; ++i) {
      counts.push_back(1 + static_cast<int>(clinsynth::bounded_u64(rng, 60)));
    }
    NoteFixture f(counts);
    std::size_t prev = SIZE_MAX;
    for (std::uint64_t budget = 20; budget <= 320; budget += 25) {
      const std::size_t k = coalesce_chunks(f.text, f.sentences, budget).size();
      CHECK(k <= prev);
      prev = k;
    }
  }
}

TEST_CASE("newline gaps join with newline, space gaps with space") {
  const std::string note = "Alpha one. Beta two.\nGamma three.";
  const auto sents = clinsynth::split_sentences(note, "n");
  REQUIRE(sents.size() == 3);
  const auto chunks = coalesce_chunks(note, sents, 300);
  REQUIRE(chunks.size() == 1);
  CHECK(chunks[0].text == "Alpha one. Beta two.\nGamma three.");
}
