#ifndef TACO_REWARDS_HPP_
#define TACO_REWARDS_HPP_

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "taco/geometry.hpp"
#include "taco/transcript.hpp"

namespace taco {

struct RewardBreakdown {
  double tac = 0.0;
  double acc = 0.0;
  double format = 0.0;
  double total = 0.0;
};

enum class AnswerMode { kClosed, kOpen };

AnswerMode parse_answer_mode(std::string_view s);
std::string_view to_string(AnswerMode m);

// Judges whether a reasoning span is consistent with the reference answer.
// Implementations must be deterministic and safe for concurrent calls.
class SupervisorScorer {
 public:
  virtual ~SupervisorScorer() = default;
  virtual double score(std::string_view question, std::string_view think,
                       std::string_view ground_truth) const = 0;
};

// Token-level F1 between the think span and the ground truth, lowercased and
// whitespace-tokenized. Stand-in for a large judge model.
class TokenF1Supervisor final : public SupervisorScorer {
 public:
  double score(std::string_view question, std::string_view think,
               std::string_view ground_truth) const override;
};

// Counts supervisor outputs that fell outside [0,1] and were clamped.
struct RewardWarnings {
  std::atomic<std::uint64_t> supervisor_clamped{0};
};

// REC reward: acc = tac = iou3(think, answer, gt) when both boxes parse,
// else 0. total = acc + format.
RewardBreakdown rec_reward(const Transcript& t, const BBox& gt);

// Plain GRPO baseline without think-answer coupling:
// acc = iou2(answer, gt), tac = 0. total = acc + format.
RewardBreakdown rec_reward_answer_only(const Transcript& t, const BBox& gt);

// Edit distance over unicode scalar values (invalid UTF-8 bytes count as one
// scalar each).
std::size_t levenshtein(std::string_view a, std::string_view b);

// Length in unicode scalar values, same decoding as levenshtein.
std::size_t scalar_length(std::string_view s);

// Lowercase, trim, collapse internal whitespace.
std::string normalize_answer(std::string_view s);

double vqa_accuracy(std::string_view answer, std::string_view gt,
                    AnswerMode mode);

RewardBreakdown vqa_reward(std::string_view question, const Transcript& t,
                           std::string_view gt, AnswerMode mode,
                           const SupervisorScorer& supervisor,
                           RewardWarnings* warnings = nullptr);

}  // namespace taco

#endif  // TACO_REWARDS_HPP_
