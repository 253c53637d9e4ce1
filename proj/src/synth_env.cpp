#include "taco/synth_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include <fmt/format.h>

#include "taco/rng.hpp"

namespace taco {

namespace {

constexpr std::array<Dims, 3> kCanvases{{{640, 480}, {1280, 720}, {1920, 1080}}};
constexpr std::array<std::string_view, kNumColors> kColorNames{
    "red", "green", "blue", "yellow", "purple", "orange"};

// Side length range per size class, as fractions of the canvas short side.
constexpr std::array<std::pair<double, double>, 3> kSideRange{
    {{0.04, 0.08}, {0.09, 0.16}, {0.18, 0.30}}};

constexpr int kMaxAttempts = 1000;

BBox random_box(Rng& rng, Dims canvas, SizeClass size) {
  const int short_side = std::min(canvas.width, canvas.height);
  const auto [lo, hi] = kSideRange[static_cast<int>(size)];
  const auto side = [&] {
    return static_cast<int>(rng.between(static_cast<std::int64_t>(std::lround(lo * short_side)),
                                        static_cast<std::int64_t>(std::lround(hi * short_side))));
  };
  const int w = side();
  const int h = side();
  const int x1 = static_cast<int>(rng.between(0, canvas.width - w));
  const int y1 = static_cast<int>(rng.between(0, canvas.height - h));
  return BBox(x1, y1, x1 + w, y1 + h);
}

// A near-copy of `target` whose selector keys differ by a few pixels.
BBox twin_box(Rng& rng, Dims canvas, const BBox& target, double difficulty) {
  const int max_offset = 2 + static_cast<int>(std::lround(3.0 * (1.0 - difficulty)));
  const int dx = static_cast<int>(rng.between(1, max_offset)) * (rng.bernoulli(0.5) ? 1 : -1);
  const int w = static_cast<int>(target.width()) + static_cast<int>(rng.between(-2, 2));
  const int h = static_cast<int>(target.height()) + static_cast<int>(rng.between(-2, 2));
  const int x1 = std::clamp(static_cast<int>(target.x1()) + dx, 0, canvas.width - w);
  const int y1 = static_cast<int>(rng.between(0, canvas.height - h));
  return BBox(x1, y1, x1 + w, y1 + h);
}

// Lexicographic selector key; smaller is better.
std::tuple<double, double> selector_key(Selector sel, const BBox& b) {
  switch (sel) {
    case Selector::kLeftmost:
      return {b.x1(), b.y1()};
    case Selector::kRightmost:
      return {-b.x2(), b.y1()};
    case Selector::kLargest:
      return {-area(b), b.y1()};
    case Selector::kNone:
      break;
  }
  return {0.0, 0.0};
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

std::string_view to_string(Selector s) {
  switch (s) {
    case Selector::kLeftmost:
      return "leftmost";
    case Selector::kRightmost:
      return "rightmost";
    case Selector::kLargest:
      return "largest";
    case Selector::kNone:
      break;
  }
  return "none";
}

Selector parse_selector(std::string_view s) {
  if (s == "none") return Selector::kNone;
  if (s == "leftmost") return Selector::kLeftmost;
  if (s == "rightmost") return Selector::kRightmost;
  if (s == "largest") return Selector::kLargest;
  throw std::invalid_argument(fmt::format("unknown selector '{}'", s));
}

std::string_view color_name(int color) {
  if (color < 0 || color >= kNumColors) return "unknown";
  return kColorNames[static_cast<std::size_t>(color)];
}

std::string_view size_name(SizeClass s) {
  switch (s) {
    case SizeClass::kSmall:
      return "small";
    case SizeClass::kMedium:
      return "medium";
    case SizeClass::kLarge:
      return "large";
  }
  return "unknown";
}

bool Expression::matches(const SceneObject& o) const {
  return (!color || *color == o.color) && (!size || *size == o.size);
}

std::string Expression::describe() const {
  std::string out = "the";
  if (selector != Selector::kNone) out += fmt::format(" {}", to_string(selector));
  if (size) out += fmt::format(" {}", size_name(*size));
  if (color) out += fmt::format(" {}", color_name(*color));
  out += " object";
  return out;
}

std::optional<std::size_t> resolve_expression(const std::vector<SceneObject>& objects,
                                              const Expression& expr) {
  std::vector<std::size_t> matching;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (expr.matches(objects[i])) matching.push_back(i);
  }
  if (matching.empty()) return std::nullopt;
  if (expr.selector == Selector::kNone) {
    if (matching.size() != 1) return std::nullopt;
    return matching.front();
  }
  std::size_t best = matching.front();
  bool tied = false;
  for (std::size_t k = 1; k < matching.size(); ++k) {
    const auto i = matching[k];
    const auto ki = selector_key(expr.selector, objects[i].bbox);
    const auto kb = selector_key(expr.selector, objects[best].bbox);
    if (ki < kb) {
      best = i;
      tied = false;
    } else if (ki == kb) {
      tied = true;
    }
  }
  if (tied) return std::nullopt;
  return best;
}

BBox oracle_resolve(const Scene& scene) {
  const auto idx = resolve_expression(scene.objects, scene.expr);
  if (!idx) {
    throw std::logic_error(
        fmt::format("scene {}: expression '{}' does not resolve uniquely", scene.id,
                    scene.expr.describe()));
  }
  if (*idx != scene.gt_index) {
    throw std::logic_error(fmt::format("scene {}: expression resolves to {} but gt_index is {}",
                                       scene.id, *idx, scene.gt_index));
  }
  return scene.objects[*idx].bbox;
}

Scene generate_scene(std::uint64_t seed, double difficulty) {
  const double d = std::clamp(difficulty, 0.0, 1.0);
  Rng rng(derive_seed({seed, 0x5CE4E}));
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Scene s;
    s.id = seed;
    const Dims canvas = kCanvases[rng.below(kCanvases.size())];
    s.width = canvas.width;
    s.height = canvas.height;

    const auto lo = 2 + std::lround(4.0 * d);
    const auto hi = 3 + std::lround(9.0 * d);
    const auto count = static_cast<std::size_t>(rng.between(lo, hi));

    SceneObject target;
    target.color = static_cast<int>(rng.below(kNumColors));
    target.size = static_cast<SizeClass>(rng.below(3));
    target.bbox = random_box(rng, canvas, target.size);

    std::vector<SceneObject> objects{target};
    std::vector<bool> color_used(kNumColors, false);
    color_used[static_cast<std::size_t>(target.color)] = true;
    for (std::size_t k = 1; k < count; ++k) {
      SceneObject o;
      if (d == 0.0) {
        // Distinct colours only.
        do {
          o.color = static_cast<int>(rng.below(kNumColors));
        } while (color_used[static_cast<std::size_t>(o.color)]);
        color_used[static_cast<std::size_t>(o.color)] = true;
      } else {
        o.color = rng.bernoulli(0.7 * d) ? target.color : static_cast<int>(rng.below(kNumColors));
      }
      o.size = rng.bernoulli(0.6 * d) ? target.size : static_cast<SizeClass>(rng.below(3));
      const bool twin = o.color == target.color && o.size == target.size && rng.bernoulli(0.6 * d);
      o.bbox = twin ? twin_box(rng, canvas, target.bbox, d) : random_box(rng, canvas, o.size);
      objects.push_back(o);
    }

    std::vector<std::size_t> order(objects.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng);
    s.objects.resize(objects.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      s.objects[i] = objects[order[i]];
      if (order[i] == 0) s.gt_index = i;
    }

    std::vector<Expression> plain;
    std::vector<Expression> selective;
    for (int mask = 0; mask < 4; ++mask) {
      for (auto sel : {Selector::kNone, Selector::kLeftmost, Selector::kRightmost,
                       Selector::kLargest}) {
        Expression e;
        if (mask & 1) e.color = target.color;
        if (mask & 2) e.size = target.size;
        e.selector = sel;
        if (resolve_expression(s.objects, e) != s.gt_index) continue;
        (sel == Selector::kNone ? plain : selective).push_back(e);
      }
    }
    if (plain.empty() && selective.empty()) continue;
    const bool want_selector = !selective.empty() && (plain.empty() || rng.bernoulli(0.3 + 0.7 * d));
    const auto& pool = want_selector ? selective : plain;
    s.expr = pool[rng.below(pool.size())];
    return s;
  }
  throw std::logic_error(fmt::format("generate_scene: no resolvable scene for seed {}", seed));
}

BBox quantize_to_scaled(const BBox& b, Dims orig, Dims scaled) {
  const double sx = static_cast<double>(scaled.width) / orig.width;
  const double sy = static_cast<double>(scaled.height) / orig.height;
  return BBox(std::round(b.x1() * sx), std::round(b.y1() * sy), std::round(b.x2() * sx),
              std::round(b.y2() * sy));
}

std::vector<FeatureRow> candidate_features(const Scene& scene, int scale) {
  if (scale <= 0) {
    throw std::invalid_argument(fmt::format("candidate_features: scale {} not positive", scale));
  }
  const Dims orig = scene.dims();
  const Dims scaled = rescale_dims(orig, scale);
  const double ws = scaled.width;
  const double hs = scaled.height;
  const std::size_t k = scene.objects.size();

  std::vector<BBox> q;
  q.reserve(k);
  double max_area = 0.0;
  for (const auto& o : scene.objects) {
    q.push_back(quantize_to_scaled(o.bbox, orig, scaled));
    max_area = std::max(max_area, area(q.back()));
  }

  std::vector<FeatureRow> rows(k);
  std::size_t matching = 0;
  for (const auto& o : scene.objects) matching += scene.expr.matches(o) ? 1 : 0;

  for (std::size_t i = 0; i < k; ++i) {
    const auto& o = scene.objects[i];
    auto& f = rows[i];
    f[0] = std::clamp((q[i].x1() + q[i].x2()) / (2.0 * ws), 0.0, 1.0);
    f[1] = std::clamp((q[i].y1() + q[i].y2()) / (2.0 * hs), 0.0, 1.0);
    f[2] = std::clamp(q[i].width() / ws, 0.0, 1.0);
    f[3] = std::clamp(q[i].height() / hs, 0.0, 1.0);
    f[4] = (!scene.expr.color || *scene.expr.color == o.color) ? 1.0 : 0.0;
    f[5] = (!scene.expr.size || *scene.expr.size == o.size) ? 1.0 : 0.0;
    f[6] = 0.0;
    if (scene.expr.matches(o)) {
      std::size_t better = 0;
      if (scene.expr.selector != Selector::kNone) {
        const auto key = selector_key(scene.expr.selector, q[i]);
        for (std::size_t j = 0; j < k; ++j) {
          if (j != i && scene.expr.matches(scene.objects[j]) &&
              selector_key(scene.expr.selector, q[j]) < key) {
            ++better;
          }
        }
      }
      f[6] = 1.0 - static_cast<double>(better) / static_cast<double>(matching);
    }
    f[7] = max_area > 0.0 ? area(q[i]) / max_area : 0.0;
  }
  return rows;
}

VqaRecord make_vqa_record(const Scene& scene, AnswerMode mode) {
  const auto& gt = scene.objects.at(scene.gt_index);
  VqaRecord r;
  r.id = scene.id;
  r.mode = mode;
  if (mode == AnswerMode::kClosed) {
    r.question = fmt::format("What color is {}?", scene.expr.describe());
    r.answer = std::string(color_name(gt.color));
  } else {
    r.question = fmt::format("Describe {}.", scene.expr.describe());
    r.answer = fmt::format("a {} {} box", size_name(gt.size), color_name(gt.color));
  }
  return r;
}

Json scene_to_json(const Scene& s) {
  Json objects = Json::array();
  for (const auto& o : s.objects) {
    Json jo;
    jo["bbox"] = bbox_to_json(o.bbox);
    jo["color"] = o.color;
    jo["size"] = static_cast<int>(o.size);
    objects.push_back(std::move(jo));
  }
  Json expr;
  expr["color"] = s.expr.color ? Json(*s.expr.color) : Json(nullptr);
  expr["size"] = s.expr.size ? Json(static_cast<int>(*s.expr.size)) : Json(nullptr);
  expr["selector"] = std::string(to_string(s.expr.selector));
  Json j;
  j["id"] = s.id;
  j["width"] = s.width;
  j["height"] = s.height;
  j["objects"] = std::move(objects);
  j["expr"] = std::move(expr);
  j["gt"] = bbox_to_json(s.gt_box());
  return j;
}

Scene scene_from_json(const Json& j) {
  Scene s;
  s.id = j.at("id").get<std::uint64_t>();
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  if (s.width <= 0 || s.height <= 0) throw std::invalid_argument("canvas dimensions must be positive");
  const auto& objs = j.at("objects");
  if (!objs.is_array() || objs.size() < 2 || objs.size() > 12) {
    throw std::invalid_argument("objects must be an array of 2..12 entries");
  }
  for (const auto& jo : objs) {
    SceneObject o;
    o.bbox = bbox_from_json(jo.at("bbox"));
    o.color = jo.at("color").get<int>();
    const int size = jo.at("size").get<int>();
    if (o.color < 0 || o.color >= kNumColors) throw std::invalid_argument("color out of range");
    if (size < 0 || size > 2) throw std::invalid_argument("size out of range");
    o.size = static_cast<SizeClass>(size);
    if (o.bbox.x1() < 0 || o.bbox.y1() < 0 || o.bbox.x2() > s.width || o.bbox.y2() > s.height) {
      throw std::invalid_argument("object box outside canvas");
    }
    s.objects.push_back(o);
  }
  const auto& e = j.at("expr");
  if (!e.at("color").is_null()) s.expr.color = e.at("color").get<int>();
  if (!e.at("size").is_null()) s.expr.size = static_cast<SizeClass>(e.at("size").get<int>());
  s.expr.selector = parse_selector(e.at("selector").get<std::string>());
  const auto idx = resolve_expression(s.objects, s.expr);
  if (!idx) throw std::invalid_argument("expression does not resolve to a unique object");
  s.gt_index = *idx;
  if (bbox_from_json(j.at("gt")) != s.gt_box()) {
    throw std::invalid_argument("gt box disagrees with the object the expression selects");
  }
  return s;
}

Json vqa_to_json(const VqaRecord& r) {
  Json j;
  j["id"] = r.id;
  j["question"] = r.question;
  j["answer"] = r.answer;
  j["mode"] = std::string(to_string(r.mode));
  return j;
}

VqaRecord vqa_from_json(const Json& j) {
  VqaRecord r;
  r.id = j.at("id").get<std::uint64_t>();
  r.question = j.at("question").get<std::string>();
  r.answer = j.at("answer").get<std::string>();
  r.mode = j.contains("mode") ? parse_answer_mode(j.at("mode").get<std::string>())
                              : AnswerMode::kClosed;
  return r;
}

Scene pool_scene(std::uint64_t data_seed, std::uint64_t id, std::optional<double> difficulty) {
  const double d = difficulty ? *difficulty : Rng(derive_seed({data_seed, id, 1})).uniform();
  Scene s = generate_scene(derive_seed({data_seed, id}), d);
  s.id = id;
  return s;
}

std::vector<Scene> load_scenes(const std::filesystem::path& path) {
  std::vector<Scene> out;
  for_each_jsonl(path, [&](const Json& j, std::size_t) { out.push_back(scene_from_json(j)); });
  return out;
}

void save_scenes(const std::filesystem::path& path, const std::vector<Scene>& scenes) {
  std::vector<Json> rows;
  rows.reserve(scenes.size());
  for (const auto& s : scenes) rows.push_back(scene_to_json(s));
  write_jsonl(path, rows);
}

}  // namespace taco
