#include "taco/transcript.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <system_error>
#include <vector>

namespace taco {

namespace {

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Locates `open`...`close` starting at `from`; returns the inner span.
std::optional<Span> find_block(std::string_view s, std::string_view open,
                               std::string_view close, std::size_t from) {
  const auto o = s.find(open, from);
  if (o == std::string_view::npos) return std::nullopt;
  const auto inner = o + open.size();
  const auto c = s.find(close, inner);
  if (c == std::string_view::npos) return std::nullopt;
  return Span{inner, c};
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::size_t skip_space(std::string_view s, std::size_t i) {
  while (i < s.size() && is_space(s[i])) ++i;
  return i;
}

std::size_t count_occurrences(std::string_view s, std::string_view needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string_view::npos;
       p = s.find(needle, p + needle.size())) {
    ++n;
  }
  return n;
}

// Parses a decimal number (optional sign, digits, optional fraction) at i.
std::optional<double> parse_number(std::string_view s, std::size_t& i) {
  std::size_t j = i;
  if (j < s.size() && (s[j] == '-' || s[j] == '+')) ++j;
  const std::size_t digits_begin = j;
  while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
  bool any_digits = j > digits_begin;
  if (j < s.size() && s[j] == '.') {
    const std::size_t frac_begin = ++j;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    any_digits = any_digits || j > frac_begin;
  }
  if (!any_digits) return std::nullopt;
  std::size_t start = i;
  if (s[start] == '+') ++start;
  double value = 0.0;
  const auto res = std::from_chars(s.data() + start, s.data() + j, value);
  if (res.ec != std::errc() || !std::isfinite(value)) return std::nullopt;
  i = j;
  return value;
}

// Tries to read a quadruple whose opening bracket sits at i.
std::optional<BBox> parse_quad_at(std::string_view s, std::size_t i) {
  const char open = s[i];
  const char close = open == '(' ? ')' : ']';
  std::size_t j = i + 1;
  double v[4];
  for (int k = 0; k < 4; ++k) {
    j = skip_space(s, j);
    const auto num = parse_number(s, j);
    if (!num) return std::nullopt;
    v[k] = *num;
    j = skip_space(s, j);
    if (k < 3) {
      if (j >= s.size() || s[j] != ',') return std::nullopt;
      ++j;
    }
  }
  if (j >= s.size() || s[j] != close) return std::nullopt;
  if (v[0] > v[2] || v[1] > v[3]) return std::nullopt;
  return BBox(v[0], v[1], v[2], v[3]);
}

}  // namespace

Transcript parse_transcript(std::string_view raw) {
  Transcript t;
  t.raw = std::string(raw);
  const auto think = find_block(raw, kThinkOpen, kThinkClose, 0);
  if (!think) return t;
  const auto answer =
      find_block(raw, kAnswerOpen, kAnswerClose, think->end + kThinkClose.size());
  if (!answer) return t;
  t.think_text = std::string(raw.substr(think->begin, think->end - think->begin));
  t.answer_text =
      std::string(raw.substr(answer->begin, answer->end - answer->begin));
  t.think_bbox = extract_bbox(t.think_text);
  t.answer_bbox = extract_bbox(t.answer_text);
  return t;
}

std::optional<BBox> extract_bbox(std::string_view span) {
  std::optional<BBox> last;
  for (std::size_t i = 0; i < span.size(); ++i) {
    if (span[i] != '(' && span[i] != '[') continue;
    if (auto b = parse_quad_at(span, i)) last = b;
  }
  return last;
}

double format_reward(std::string_view raw) {
  for (auto tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
    if (count_occurrences(raw, tag) != 1) return 0.0;
  }
  std::size_t i = skip_space(raw, 0);
  if (raw.substr(i, kThinkOpen.size()) != kThinkOpen) return 0.0;
  const auto think_end = raw.find(kThinkClose, i);
  if (think_end == std::string_view::npos ||
      think_end == i + kThinkOpen.size()) {
    return 0.0;
  }
  i = skip_space(raw, think_end + kThinkClose.size());
  if (raw.substr(i, kAnswerOpen.size()) != kAnswerOpen) return 0.0;
  const auto answer_end = raw.find(kAnswerClose, i);
  if (answer_end == std::string_view::npos ||
      answer_end == i + kAnswerOpen.size()) {
    return 0.0;
  }
  i = skip_space(raw, answer_end + kAnswerClose.size());
  return i == raw.size() ? 1.0 : 0.0;
}

}  // namespace taco
