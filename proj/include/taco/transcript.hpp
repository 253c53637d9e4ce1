#ifndef TACO_TRANSCRIPT_HPP_
#define TACO_TRANSCRIPT_HPP_

#include <optional>
#include <string>
#include <string_view>

#include "taco/geometry.hpp"

namespace taco {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

// A parsed model output. Spans are filled only when a think block is found
// followed by an answer block; otherwise both are empty and boxes absent.
struct Transcript {
  std::string raw;
  std::string think_text;
  std::string answer_text;
  std::optional<BBox> think_bbox;
  std::optional<BBox> answer_bbox;
};

// Total: never throws on arbitrary input.
Transcript parse_transcript(std::string_view raw);

// Last "(x1, y1, x2, y2)" or "[x1, y1, x2, y2]" quadruple with x1<=x2 and
// y1<=y2, or nothing.
std::optional<BBox> extract_bbox(std::string_view span);

// 1.0 iff raw is exactly: ws, one non-empty think block, ws, one non-empty
// answer block, ws. No tag may appear twice.
double format_reward(std::string_view raw);

}  // namespace taco

#endif  // TACO_TRANSCRIPT_HPP_
