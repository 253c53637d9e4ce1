#ifndef TACO_TTRS_HPP_
#define TACO_TTRS_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "taco/geometry.hpp"

namespace taco {

struct Dims {
  int width = 0;
  int height = 0;

  friend bool operator==(const Dims&, const Dims&) = default;
};

// Short-side target lengths used by the multi-scale ensemble.
struct ScaleSet {
  std::vector<int> targets{560, 672, 800};

  void validate() const;
  static ScaleSet parse(std::string_view csv);  // "560,672,800"
  std::string to_string() const;
};

// Aspect-preserving resize: the shorter side becomes exactly `target`, the
// longer side is rounded half away from zero. Throws on non-positive input.
Dims rescale_dims(Dims orig, int target);

// Maps a box predicted on the `scaled` canvas back onto `orig`, clamped to
// the original canvas.
BBox map_box_to_original(const BBox& b, Dims orig, Dims scaled);

template <typename T>
struct Selection {
  T value;
  std::size_t index = 0;
};

// Candidate with the largest summed IoU against the others; lowest index wins
// ties. Throws std::invalid_argument on an empty list.
Selection<BBox> ensemble_select_box(std::span<const BBox> candidates);

// Candidate with the smallest summed normalized edit distance to the others;
// lowest index wins ties.
Selection<std::string> ensemble_select_text(std::span<const std::string> candidates);

}  // namespace taco

#endif  // TACO_TTRS_HPP_
