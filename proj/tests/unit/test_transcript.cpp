#include <doctest.h>

#include <string>

#include "taco/rng.hpp"
#include "taco/transcript.hpp"

using namespace taco;

TEST_CASE("parse_transcript: well-formed") {
  const auto t = parse_transcript("<think>box at (1, 2, 3, 4)</think><answer>(1, 2, 3, 4)</answer>");
  CHECK(t.think_text == "box at (1, 2, 3, 4)");
  CHECK(t.answer_text == "(1, 2, 3, 4)");
  REQUIRE(t.think_bbox.has_value());
  REQUIRE(t.answer_bbox.has_value());
  CHECK(*t.think_bbox == BBox(1, 2, 3, 4));
  CHECK(*t.answer_bbox == BBox(1, 2, 3, 4));
}

TEST_CASE("parse_transcript: malformed inputs give empty spans") {
  for (const char* raw : {"<answer>x</answer><think>y</think>", "no tags at all", "<think>a</think>",
                          "<think>a<answer>b</answer>", ""}) {
    const auto t = parse_transcript(raw);
    CHECK(t.think_text.empty());
    CHECK(t.answer_text.empty());
    CHECK_FALSE(t.think_bbox.has_value());
    CHECK_FALSE(t.answer_bbox.has_value());
    CHECK(t.raw == raw);
  }
}

TEST_CASE("parse_transcript: lenient about surrounding text") {
  const auto t = parse_transcript("preamble <think>t</think> middle <answer>[0,0,2,2]</answer> tail");
  CHECK(t.think_text == "t");
  CHECK(t.answer_text == "[0,0,2,2]");
  CHECK(*t.answer_bbox == BBox(0, 0, 2, 2));
}

TEST_CASE("extract_bbox") {
  CHECK(*extract_bbox("maybe (0,0,5,5), final (10, 20, 110, 220)") == BBox(10, 20, 110, 220));
  CHECK_FALSE(extract_bbox("coordinates (5, 5, 1, 1)").has_value());
  CHECK_FALSE(extract_bbox("").has_value());
  CHECK(*extract_bbox("[1.5, 2, 3.25, 4]") == BBox(1.5, 2, 3.25, 4));
  // Last well-formed quadruple wins; an inverted one later is skipped.
  CHECK(*extract_bbox("(0,0,1,1) then (9,9,1,1)") == BBox(0, 0, 1, 1));
  // Mismatched brackets and short tuples are not boxes.
  CHECK_FALSE(extract_bbox("(0, 0, 1, 1]").has_value());
  CHECK_FALSE(extract_bbox("(0, 0, 1)").has_value());
  CHECK(*extract_bbox("((0, 0, 1, 1))") == BBox(0, 0, 1, 1));
}

TEST_CASE("format_reward") {
  CHECK(format_reward("<think>a</think><answer>b</answer>") == 1.0);
  CHECK(format_reward("  <think>a</think>\n<answer>b</answer>\n") == 1.0);
  CHECK(format_reward("<think>a</think>") == 0.0);
  CHECK(format_reward("<think>a</think><answer>b</answer><answer>c</answer>") == 0.0);
  CHECK(format_reward("x<think>a</think><answer>b</answer>") == 0.0);
  CHECK(format_reward("<think>a</think><answer>b</answer>x") == 0.0);
  CHECK(format_reward("<think></think><answer>b</answer>") == 0.0);
  CHECK(format_reward("<think>a</think><answer></answer>") == 0.0);
  CHECK(format_reward("<answer>b</answer><think>a</think>") == 0.0);
  CHECK(format_reward("</think><think>a<answer>b</answer>") == 0.0);
  CHECK(format_reward("<THINK>a</THINK><answer>b</answer>") == 0.0);
}

TEST_CASE("property: parse is total and format implies non-empty spans") {
  Rng rng(5);
  const std::string pieces[] = {"<think>", "</think>", "<answer>", "</answer>", "(1, 2, 3, 4)",
                                "[0,0,9,9]", " ", "x", "\n", "(", ",", "-7.5", "\xff", "\xc3\xa9"};
  for (int trial = 0; trial < 5000; ++trial) {
    std::string raw;
    const auto len = rng.below(12);
    for (std::uint64_t k = 0; k < len; ++k) {
      if (rng.bernoulli(0.2)) {
        raw.push_back(static_cast<char>(rng.below(256)));
      } else {
        raw += pieces[rng.below(std::size(pieces))];
      }
    }
    Transcript t;
    REQUIRE_NOTHROW(t = parse_transcript(raw));
    const double f = format_reward(raw);
    REQUIRE((f == 0.0 || f == 1.0));
    if (f == 1.0) {
      REQUIRE_FALSE(t.think_text.empty());
      REQUIRE_FALSE(t.answer_text.empty());
    }
  }
}
