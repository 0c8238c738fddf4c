#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "clinsynth/corpus.hpp"
#include "clinsynth/rng.hpp"

using clinsynth::Corpus;
using clinsynth::dedup_exact;
using clinsynth::make_corpus;
using clinsynth::mix;
using clinsynth::MixMode;
using clinsynth::MixParent;
using clinsynth::sample_records;
using clinsynth::truncate_to_budget;

namespace {

// Records with exact token counts: k single-letter words.
Corpus counted_corpus(const std::string& id, const std::vector<int>& counts) {
  std::vector<std::string> texts;
  for (int k : counts) {
    std::string t;
    for (int i = 0; i < k; ++i) {
      if (i) t += ' ';
      t += 'x';
    }
    texts.push_back(t);
  }
  return make_corpus(id, texts);
}

}  // namespace

TEST_CASE("truncate keeps the maximal within-budget prefix") {
  const Corpus c = counted_corpus("c", {7, 9, 6});
  const auto r = truncate_to_budget(c, 20, "c20");
  CHECK(r.corpus.records.size() == 2);
  CHECK(r.corpus.total_ref_tokens == 16);
  CHECK_FALSE(r.empty_result);
  CHECK(r.corpus.records[0].origin.corpus_id == "c");
  CHECK(r.corpus.records[1].origin.record_index == 1);
}

TEST_CASE("truncate with ample budget is the identity") {
  const Corpus c = counted_corpus("c", {4, 5, 6});
  const auto r = truncate_to_budget(c, 1000, "cid");
  CHECK(r.corpus.records.size() == 3);
  CHECK(r.corpus.total_ref_tokens == c.total_ref_tokens);
}

TEST_CASE("truncate below the first record yields an empty corpus") {
  const Corpus c = counted_corpus("c", {7, 2});
  const auto r = truncate_to_budget(c, 5, "c5");
  CHECK(r.corpus.records.empty());
  CHECK(r.empty_result);
  CHECK_THROWS_AS(truncate_to_budget(c, 0, "x"), clinsynth::ConfigError);
}

TEST_CASE("truncate composition law") {
  clinsynth::Rng rng(31);
  std::vector<int> counts;
  for (int i = 0; i < 60; ++i) {
    counts.push_back(1 + static_cast<int>(clinsynth::bounded_u64(rng, 20)));
  }
  const Corpus c = counted_corpus("c", counts);
  for (int trial = 0; trial < 50; ++trial) {
    const std::uint64_t a = 1 + clinsynth::bounded_u64(rng, 700);
    const std::uint64_t b = 1 + clinsynth::bounded_u64(rng, 700);
    const auto lhs =
        truncate_to_budget(truncate_to_budget(c, a, "t").corpus, b, "t2");
    const auto rhs = truncate_to_budget(c, std::min(a, b), "t3");
    REQUIRE(lhs.corpus.records.size() == rhs.corpus.records.size());
    CHECK(lhs.corpus.total_ref_tokens == rhs.corpus.total_ref_tokens);
    for (std::size_t i = 0; i < lhs.corpus.records.size(); ++i) {
      CHECK(lhs.corpus.records[i].text == rhs.corpus.records[i].text);
    }
  }
}

TEST_CASE("sampling identities") {
  const Corpus c = counted_corpus("c", {1, 2, 3, 4, 5});
  const Corpus full = sample_records(c, 5, 9, "s");
  REQUIRE(full.records.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(full.records[i].text == c.records[i].text);
    CHECK(full.records[i].origin.record_index == i);
  }
  CHECK(sample_records(c, 0, 9, "s0").records.empty());
  CHECK_THROWS_AS(sample_records(c, 6, 9, "s6"), clinsynth::ConfigError);
}

TEST_CASE("sampling is deterministic and order preserving") {
  const Corpus c = counted_corpus("c", {1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
  const Corpus a = sample_records(c, 4, 1234, "a");
  const Corpus b = sample_records(c, 4, 1234, "b");
  REQUIRE(a.records.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.records[i].origin.record_index ==
          b.records[i].origin.record_index);
  }
  for (std::size_t i = 1; i < a.records.size(); ++i) {
    CHECK(a.records[i - 1].origin.record_index <
          a.records[i].origin.record_index);
  }
  const Corpus other = sample_records(c, 4, 4321, "o");
  bool any_diff = false;
  for (std::size_t i = 0; i < 4; ++i) {
    any_diff |= a.records[i].origin.record_index !=
                other.records[i].origin.record_index;
  }
  CHECK(any_diff);
}

TEST_CASE("dedup collapses whitespace, first occurrence wins") {
  const Corpus c = make_corpus("c", {"a b", "a  b", "c"});
  const auto r = dedup_exact(c, "d");
  CHECK(r.removed == 1);
  REQUIRE(r.corpus.records.size() == 2);
  CHECK(r.corpus.records[0].text == "a b");
  CHECK(r.corpus.records[1].text == "c");

  const auto unique = dedup_exact(make_corpus("u", {"x", "y"}), "d2");
  CHECK(unique.removed == 0);
  CHECK(unique.corpus.records.size() == 2);

  const auto empty = dedup_exact(Corpus{}, "d3");
  CHECK(empty.removed == 0);
  CHECK(empty.corpus.records.empty());
}

TEST_CASE("concat mix preserves parent order and adds totals") {
  const Corpus real = counted_corpus("real", {10, 10, 10});
  const Corpus synth = counted_corpus("synth", {10, 10, 10});
  const Corpus m = mix({{&real, 20}, {&synth, 20}}, MixMode::concat, 0, "m");
  CHECK(m.total_ref_tokens == 40);
  REQUIRE(m.records.size() == 4);
  CHECK(m.records[0].origin.corpus_id == "real");
  CHECK(m.records[1].origin.corpus_id == "real");
  CHECK(m.records[2].origin.corpus_id == "synth");
  CHECK(m.records[3].origin.corpus_id == "synth");
}

TEST_CASE("single-parent mix equals truncation") {
  const Corpus a = counted_corpus("a", {5, 5, 5});
  const Corpus m = mix({{&a, 11}}, MixMode::interleave, 7, "m");
  const auto t = truncate_to_budget(a, 11, "t");
  REQUIRE(m.records.size() == t.corpus.records.size());
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    CHECK(m.records[i].text == t.corpus.records[i].text);
  }
}

TEST_CASE("four-way mix is additive and lists all parents") {
  const Corpus a = counted_corpus("a", {5});
  const Corpus b = counted_corpus("b", {5});
  const Corpus c = counted_corpus("c", {5});
  const Corpus d = counted_corpus("d", {5});
  const Corpus m =
      mix({{&a, 5}, {&b, 5}, {&c, 5}, {&d, 5}}, MixMode::concat, 0, "m");
  CHECK(m.total_ref_tokens == 20);
  CHECK(m.records.size() == 4);
}

TEST_CASE("interleave is deterministic for a fixed seed") {
  const Corpus a = counted_corpus("a", {1, 1, 1});
  const Corpus b = counted_corpus("b", {2, 2});
  const Corpus m1 = mix({{&a, 100}, {&b, 100}}, MixMode::interleave, 5, "m");
  const Corpus m2 = mix({{&a, 100}, {&b, 100}}, MixMode::interleave, 5, "m");
  REQUIRE(m1.records.size() == 5);
  for (std::size_t i = 0; i < m1.records.size(); ++i) {
    CHECK(m1.records[i].origin.corpus_id == m2.records[i].origin.corpus_id);
    CHECK(m1.records[i].origin.record_index ==
          m2.records[i].origin.record_index);
  }
  CHECK(m1.total_ref_tokens == a.total_ref_tokens + b.total_ref_tokens);
  CHECK_THROWS_AS(mix({}, MixMode::concat, 0, "m"), clinsynth::ConfigError);
}

TEST_CASE("corpus jsonl round trip") {
  const Corpus c = make_corpus("rt", {"alpha beta.", "gamma\ndelta"});
  const auto path = std::filesystem::temp_directory_path() / "corpus_rt.jsonl";
  clinsynth::save_corpus_jsonl(c, path);
  const Corpus back = clinsynth::load_corpus_jsonl(path, "rt");
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[0].text == "alpha beta.");
  CHECK(back.records[1].text == "gamma\ndelta");
  CHECK(back.total_ref_tokens == c.total_ref_tokens);
  CHECK(back.records[1].origin.record_index == 1);
  std::filesystem::remove(path);
}

TEST_CASE("text export separates records with blank lines and round-trips") {
  const Corpus c = make_corpus("t", {"para one line.", "second\n\n\nrecord"});
  const std::string text = clinsynth::corpus_to_text(c);
  CHECK(text == "para one line.\n\nsecond\nrecord\n");
  const auto path = std::filesystem::temp_directory_path() / "corpus_rt.txt";
  clinsynth::export_corpus_text(c, path);
  const Corpus back = clinsynth::load_corpus_text(path, "t");
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[0].text == "para one line.");
  CHECK(back.records[1].text == "second\nrecord");
  // Interior blank-line collapsing never changes token counts.
  CHECK(back.total_ref_tokens == c.total_ref_tokens);
  std::filesystem::remove(path);
}
