#ifndef TACO_GEOMETRY_HPP_
#define TACO_GEOMETRY_HPP_

#include <optional>
#include <ostream>

namespace taco {

// Axis-aligned rectangle in continuous pixel coordinates, top-left origin.
// Zero-area boxes are valid; inverted extents are rejected at construction.
class BBox {
 public:
  BBox() = default;
  BBox(double x1, double y1, double x2, double y2);

  double x1() const { return x1_; }
  double y1() const { return y1_; }
  double x2() const { return x2_; }
  double y2() const { return y2_; }
  double width() const { return x2_ - x1_; }
  double height() const { return y2_ - y1_; }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double x1_ = 0.0;
  double y1_ = 0.0;
  double x2_ = 0.0;
  double y2_ = 0.0;
};

std::ostream& operator<<(std::ostream& os, const BBox& b);

double area(const BBox& b);

// Overlap rectangle; absent when the overlap has zero extent in either axis.
std::optional<BBox> intersect(const BBox& a, const BBox& b);

// Pairwise IoU. Zero when the union has zero area.
double iou2(const BBox& a, const BBox& b);

// Three-way IoU: |A∩B∩C| / |A∪B∪C|, union by inclusion-exclusion.
// Zero when the union has zero area.
double iou3(const BBox& a, const BBox& b, const BBox& c);

// Throws std::invalid_argument on non-positive factors.
BBox scale_bbox(const BBox& b, double sx, double sy);

}  // namespace taco

#endif  // TACO_GEOMETRY_HPP_
