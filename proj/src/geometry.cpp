#include "taco/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace taco {

BBox::BBox(double x1, double y1, double x2, double y2)
    : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) ||
      !std::isfinite(y2)) {
    throw std::invalid_argument("BBox: non-finite coordinate");
  }
  if (x2 < x1 || y2 < y1) {
    throw std::invalid_argument(
        fmt::format("BBox: negative extent ({}, {}, {}, {})", x1, y1, x2, y2));
  }
}

std::ostream& operator<<(std::ostream& os, const BBox& b) {
  return os << '(' << b.x1() << ", " << b.y1() << ", " << b.x2() << ", "
            << b.y2() << ')';
}

double area(const BBox& b) { return b.width() * b.height(); }

std::optional<BBox> intersect(const BBox& a, const BBox& b) {
  const double x1 = std::max(a.x1(), b.x1());
  const double y1 = std::max(a.y1(), b.y1());
  const double x2 = std::min(a.x2(), b.x2());
  const double y2 = std::min(a.y2(), b.y2());
  if (x2 <= x1 || y2 <= y1) return std::nullopt;
  return BBox(x1, y1, x2, y2);
}

namespace {

double overlap_area(const BBox& a, const BBox& b) {
  const auto i = intersect(a, b);
  return i ? area(*i) : 0.0;
}

double overlap_area(const BBox& a, const BBox& b, const BBox& c) {
  const auto ab = intersect(a, b);
  if (!ab) return 0.0;
  return overlap_area(*ab, c);
}

}  // namespace

double iou2(const BBox& a, const BBox& b) {
  const double inter = overlap_area(a, b);
  const double uni = area(a) + area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double iou3(const BBox& a, const BBox& b, const BBox& c) {
  const double abc = overlap_area(a, b, c);
  const double uni = area(a) + area(b) + area(c) - overlap_area(a, b) -
                     overlap_area(a, c) - overlap_area(b, c) + abc;
  if (uni <= 0.0) return 0.0;
  return std::clamp(abc / uni, 0.0, 1.0);
}

BBox scale_bbox(const BBox& b, double sx, double sy) {
  if (!(sx > 0.0) || !(sy > 0.0)) {
    throw std::invalid_argument(
        fmt::format("scale_bbox: scale factors must be positive, got ({}, {})",
                    sx, sy));
  }
  return BBox(b.x1() * sx, b.y1() * sy, b.x2() * sx, b.y2() * sy);
}

}  // namespace taco
