#include "taco/rewards.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

namespace taco {

AnswerMode parse_answer_mode(std::string_view s) {
  if (s == "closed") return AnswerMode::kClosed;
  if (s == "open") return AnswerMode::kOpen;
  throw std::invalid_argument(fmt::format("unknown answer mode '{}'", s));
}

std::string_view to_string(AnswerMode m) {
  return m == AnswerMode::kClosed ? "closed" : "open";
}

namespace {

std::vector<std::string> tokenize_lower(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Decodes UTF-8 into scalar values. Malformed sequences yield one value per
// offending byte, offset past the scalar range so they never alias a real
// code point.
std::vector<char32_t> decode_scalars(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto bk = static_cast<unsigned char>(s[i + k]);
      if ((bk & 0xC0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (bk & 0x3F);
      }
    }
    if (ok) {
      static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
      ok = cp >= kMin[len] && cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF);
    }
    if (ok) {
      out.push_back(cp);
      i += len;
    } else {
      out.push_back(0x110000 + b0);
      ++i;
    }
  }
  return out;
}

RewardBreakdown with_format(RewardBreakdown r, const Transcript& t) {
  r.format = format_reward(t.raw);
  return r;
}

}  // namespace

double TokenF1Supervisor::score(std::string_view /*question*/,
                                std::string_view think,
                                std::string_view ground_truth) const {
  const auto pred = tokenize_lower(think);
  const auto gold = tokenize_lower(ground_truth);
  if (pred.empty() || gold.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const auto& g : gold) ++counts[g];
  int common = 0;
  for (const auto& p : pred) {
    auto it = counts.find(p);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / pred.size();
  const double recall = static_cast<double>(common) / gold.size();
  return 2.0 * precision * recall / (precision + recall);
}

RewardBreakdown rec_reward(const Transcript& t, const BBox& gt) {
  RewardBreakdown r;
  if (t.think_bbox && t.answer_bbox) {
    r.tac = iou3(*t.think_bbox, *t.answer_bbox, gt);
  }
  r.acc = r.tac;
  r = with_format(r, t);
  r.total = r.acc + r.format;
  return r;
}

RewardBreakdown rec_reward_answer_only(const Transcript& t, const BBox& gt) {
  RewardBreakdown r;
  if (t.answer_bbox) r.acc = iou2(*t.answer_bbox, gt);
  r = with_format(r, t);
  r.total = r.acc + r.format;
  return r;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  const auto sa = decode_scalars(a);
  const auto sb = decode_scalars(b);
  if (sa.empty()) return sb.size();
  if (sb.empty()) return sa.size();
  // Two-row DP over the shorter string.
  const auto& outer = sa.size() >= sb.size() ? sa : sb;
  const auto& inner = sa.size() >= sb.size() ? sb : sa;
  std::vector<std::size_t> prev(inner.size() + 1), cur(inner.size() + 1);
  for (std::size_t j = 0; j <= inner.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= outer.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= inner.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (outer[i - 1] == inner[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[inner.size()];
}

std::size_t scalar_length(std::string_view s) {
  return decode_scalars(s).size();
}

std::string normalize_answer(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

double vqa_accuracy(std::string_view answer, std::string_view gt,
                    AnswerMode mode) {
  if (mode == AnswerMode::kClosed) {
    return normalize_answer(answer) == normalize_answer(gt) ? 1.0 : 0.0;
  }
  const std::size_t longest = std::max(scalar_length(answer), scalar_length(gt));
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(answer, gt)) /
                   static_cast<double>(longest);
}

RewardBreakdown vqa_reward(std::string_view question, const Transcript& t,
                           std::string_view gt, AnswerMode mode,
                           const SupervisorScorer& supervisor,
                           RewardWarnings* warnings) {
  RewardBreakdown r;
  double s = supervisor.score(question, t.think_text, gt);
  if (!(s >= 0.0 && s <= 1.0)) {
    if (warnings) ++warnings->supervisor_clamped;
    s = std::isnan(s) ? 0.0 : std::clamp(s, 0.0, 1.0);
  }
  r.tac = s;
  r.acc = vqa_accuracy(t.answer_text, gt, mode);
  r = with_format(r, t);
  r.total = r.tac + r.acc + r.format;
  return r;
}

}  // namespace taco
