#include <doctest.h>

#include <string>

#include "clinsynth/sentences.hpp"

using clinsynth::split_sentences;

namespace {

std::vector<std::string> texts_of(const std::vector<clinsynth::Sentence>& v) {
  std::vector<std::string> out;
  for (const auto& s : v) out.push_back(s.text);
  return out;
}

// Spans must be increasing, exact substrings, and leave only whitespace
// between them.
void check_coverage(std::string_view note,
                    const std::vector<clinsynth::Sentence>& sents) {
  std::size_t prev_end = 0;
  for (const auto& s : sents) {
    REQUIRE(s.start_byte >= prev_end);
    REQUIRE(s.end_byte > s.start_byte);
    CHECK(note.substr(s.start_byte, s.end_byte - s.start_byte) == s.text);
    for (std::size_t i = prev_end; i < s.start_byte; ++i) {
      CHECK(clinsynth::is_ascii_space(note[i]));
    }
    prev_end = s.end_byte;
  }
  for (std::size_t i = prev_end; i < note.size(); ++i) {
    CHECK(clinsynth::is_ascii_space(note[i]));
  }
}

}  // namespace

TEST_CASE("terminator followed by capital splits") {
  const auto s = split_sentences("Pt stable. Discharged home.", "n1");
  CHECK(texts_of(s) == std::vector<std::string>{"Pt stable.",
                                                "Discharged home."});
}

TEST_CASE("abbreviations suppress splits") {
  CHECK(split_sentences("Dr. Smith saw the patient.", "n").size() == 1);
  CHECK(split_sentences("Take meds b.i.d. Then rest.", "n").size() == 1);
  CHECK(split_sentences("Stable vs. Yesterday improved.", "n").size() == 1);
  // A word that merely ends with a listed fragment still splits.
  CHECK(split_sentences("Seen at Greenst. Next day fine.", "n").size() == 2);
}

TEST_CASE("blank lines are hard breaks") {
  const auto s = split_sentences("HPI:\n\nFever x3 days", "n");
  REQUIRE(s.size() == 2);
  CHECK(s[0].text == "HPI:");
  CHECK(s[1].text == "Fever x3 days");
}

TEST_CASE("section headers break without a blank line") {
  const auto s = split_sentences("afebrile overnight\nHPI: fever for 3 days",
                                 "n");
  REQUIRE(s.size() == 2);
  CHECK(s[0].text == "afebrile overnight");
  CHECK(s[1].text == "HPI: fever for 3 days");

  // Lowercase or colon-free lines are not headers.
  CHECK(split_sentences("alpha\nbeta: gamma", "n").size() == 1);
  CHECK(split_sentences("alpha\nBeta gamma", "n").size() == 1);
}

TEST_CASE("question and exclamation terminators split, no abbreviations") {
  const auto s = split_sentences("Any pain? None reported! Stable.", "n");
  CHECK(s.size() == 3);
}

TEST_CASE("split before digits") {
  const auto s = split_sentences("Dose held. 3 days later resumed.", "n");
  CHECK(s.size() == 2);
}

TEST_CASE("lowercase continuation does not split") {
  const auto s = split_sentences("T 98.6 this am. still afebrile", "n");
  CHECK(s.size() == 1);
}

TEST_CASE("whole note as one sentence when nothing matches") {
  const auto s = split_sentences("no terminators here at all", "n");
  REQUIRE(s.size() == 1);
  CHECK(s[0].index == 0);
}

TEST_CASE("byte spans cover the note exactly") {
  const std::string note =
      "Admission Date: ___\n"
      "\n"
      "HPI: 61 yo male with CHF. Presented with dyspnea x2 days.\r\n"
      "Seen by Dr. Jones overnight.  Improved!\n"
      "\n\n"
      "Hospital Course:\n"
      "Diuresed well. Discharged home on q.d. lasix.\n";
  const auto sents = split_sentences(note, "n9");
  check_coverage(note, sents);
  REQUIRE(sents.size() >= 5);
  for (std::size_t i = 0; i < sents.size(); ++i) CHECK(sents[i].index == i);
}

TEST_CASE("empty and whitespace-only notes yield nothing") {
  CHECK(split_sentences("", "n").empty());
  CHECK(split_sentences("  \n\n \t", "n").empty());
}

TEST_CASE("determinism") {
  const std::string note = "A b. C d? E f! G.\n\nH: i j.";
  const auto a = split_sentences(note, "n");
  const auto b = split_sentences(note, "n");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].text == b[i].text);
    CHECK(a[i].start_byte == b[i].start_byte);
  }
}
