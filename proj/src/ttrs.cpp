#include "taco/ttrs.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "taco/rewards.hpp"

namespace taco {

void ScaleSet::validate() const {
  if (targets.empty()) throw std::invalid_argument("ScaleSet: need at least one scale");
  for (int t : targets) {
    if (t <= 0) throw std::invalid_argument(fmt::format("ScaleSet: scale {} not positive", t));
  }
}

ScaleSet ScaleSet::parse(std::string_view csv) {
  ScaleSet s;
  s.targets.clear();
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    auto comma = csv.find(',', pos);
    if (comma == std::string_view::npos) comma = csv.size();
    auto item = csv.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    int v = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size()) {
      throw std::invalid_argument(fmt::format("invalid scale list '{}'", csv));
    }
    s.targets.push_back(v);
    pos = comma + 1;
  }
  s.validate();
  return s;
}

std::string ScaleSet::to_string() const { return fmt::format("{}", fmt::join(targets, ",")); }

Dims rescale_dims(Dims orig, int target) {
  if (orig.width <= 0 || orig.height <= 0 || target <= 0) {
    throw std::invalid_argument(fmt::format("rescale_dims: non-positive input ({}, {}, {})",
                                            orig.width, orig.height, target));
  }
  const std::int64_t shorter = std::min(orig.width, orig.height);
  auto scale_side = [&](std::int64_t side) {
    if (side == shorter) return static_cast<int>(target);
    // round(side * target / shorter), half away from zero, in exact integers.
    return static_cast<int>((2 * side * target + shorter) / (2 * shorter));
  };
  return Dims{scale_side(orig.width), scale_side(orig.height)};
}

BBox map_box_to_original(const BBox& b, Dims orig, Dims scaled) {
  if (orig.width <= 0 || orig.height <= 0 || scaled.width <= 0 || scaled.height <= 0) {
    throw std::invalid_argument("map_box_to_original: non-positive dimensions");
  }
  const double sx = static_cast<double>(orig.width) / scaled.width;
  const double sy = static_cast<double>(orig.height) / scaled.height;
  const BBox m = scale_bbox(b, sx, sy);
  auto cx = [&](double v) { return std::clamp(v, 0.0, static_cast<double>(orig.width)); };
  auto cy = [&](double v) { return std::clamp(v, 0.0, static_cast<double>(orig.height)); };
  return BBox(cx(m.x1()), cy(m.y1()), cx(m.x2()), cy(m.y2()));
}

Selection<BBox> ensemble_select_box(std::span<const BBox> candidates) {
  if (candidates.empty()) throw std::invalid_argument("ensemble_select_box: no candidates");
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double score = 0.0;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      if (j != i) score += iou2(candidates[i], candidates[j]);
    }
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return {candidates[best], best};
}

Selection<std::string> ensemble_select_text(std::span<const std::string> candidates) {
  if (candidates.empty()) throw std::invalid_argument("ensemble_select_text: no candidates");
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double score = 0.0;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      if (j == i) continue;
      const auto longest =
          std::max(scalar_length(candidates[i]), scalar_length(candidates[j]));
      if (longest > 0) {
        score += static_cast<double>(levenshtein(candidates[i], candidates[j])) /
                 static_cast<double>(longest);
      }
    }
    if (i == 0 || score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return {candidates[best], best};
}

}  // namespace taco
