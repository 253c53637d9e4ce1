#ifndef TACO_SYNTH_ENV_HPP_
#define TACO_SYNTH_ENV_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "taco/geometry.hpp"
#include "taco/records.hpp"
#include "taco/rewards.hpp"
#include "taco/ttrs.hpp"

namespace taco {

// Synthetic referring-grounding scenes: a canvas of coloured boxes and a
// structured expression that picks out exactly one of them.

inline constexpr int kNumColors = 6;
inline constexpr std::size_t kFeatureDim = 8;

enum class SizeClass { kSmall = 0, kMedium = 1, kLarge = 2 };
enum class Selector { kNone, kLeftmost, kRightmost, kLargest };

std::string_view to_string(Selector s);
Selector parse_selector(std::string_view s);
std::string_view color_name(int color);
std::string_view size_name(SizeClass s);

struct SceneObject {
  BBox bbox;
  int color = 0;
  SizeClass size = SizeClass::kSmall;
};

struct Expression {
  std::optional<int> color;
  std::optional<SizeClass> size;
  Selector selector = Selector::kNone;

  bool matches(const SceneObject& o) const;
  std::string describe() const;  // "the leftmost red object"
};

struct Scene {
  std::uint64_t id = 0;
  int width = 0;
  int height = 0;
  std::vector<SceneObject> objects;
  Expression expr;
  std::size_t gt_index = 0;

  Dims dims() const { return {width, height}; }
  const BBox& gt_box() const { return objects.at(gt_index).bbox; }
};

using FeatureRow = std::array<double, kFeatureDim>;

// Deterministic in (seed, difficulty). Higher difficulty adds objects,
// attribute-sharing distractors and near-identical "twins" whose selector
// keys differ by a few pixels.
Scene generate_scene(std::uint64_t seed, double difficulty);

// Index of the unique object picked by the expression on exact geometry, or
// nothing when the expression is ambiguous or matches nothing.
std::optional<std::size_t> resolve_expression(const std::vector<SceneObject>& objects,
                                              const Expression& expr);

// Box of the referenced object. Throws std::logic_error if the expression does
// not resolve uniquely to gt_index.
BBox oracle_resolve(const Scene& scene);

// Per-object features seen by the policy at a given short-side resolution.
// Box corners are quantized to the grid of the canvas resized to `scale`
// (scale <= 0 is rejected):
//   [0..3] quantized cx/W, cy/H, w/W, h/H
//   [4]    colour matches the expression (1 when unconstrained)
//   [5]    size class matches the expression (1 when unconstrained)
//   [6]    selector score among matching objects: 1 - (#strictly better)/m,
//          0 for non-matching objects; ties share a score
//   [7]    quantized area relative to the largest object
std::vector<FeatureRow> candidate_features(const Scene& scene, int scale);

// Quantizes an original-frame box onto the grid of the canvas scaled to
// `scale`, returned in scaled-canvas pixel coordinates.
BBox quantize_to_scaled(const BBox& b, Dims orig, Dims scaled);

// Templated VQA record built from a scene.
struct VqaRecord {
  std::uint64_t id = 0;
  std::string question;
  std::string answer;
  AnswerMode mode = AnswerMode::kClosed;
};

VqaRecord make_vqa_record(const Scene& scene, AnswerMode mode);

Json scene_to_json(const Scene& s);
Scene scene_from_json(const Json& j);  // validates gt against the expression
Json vqa_to_json(const VqaRecord& r);
VqaRecord vqa_from_json(const Json& j);

// Dataset scene i of a pool: seed and difficulty both derived from
// (data_seed, id); difficulty is uniform on [0,1] unless fixed.
Scene pool_scene(std::uint64_t data_seed, std::uint64_t id,
                 std::optional<double> difficulty = std::nullopt);

std::vector<Scene> load_scenes(const std::filesystem::path& path);
void save_scenes(const std::filesystem::path& path, const std::vector<Scene>& scenes);

}  // namespace taco

#endif  // TACO_SYNTH_ENV_HPP_
