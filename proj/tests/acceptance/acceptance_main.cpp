// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "oracles.hpp"
#include "taco/geometry.hpp"
#include "taco/grpo.hpp"
#include "taco/policy.hpp"
#include "taco/rng.hpp"
#include "taco/sampler.hpp"
#include "taco/trainer.hpp"
#include "taco/ttrs.hpp"

using namespace taco;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body,
            double time_limit_s = 0.0) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, fmt::format("exception: {}", e.what())};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (time_limit_s > 0.0 && secs >= time_limit_s) {
    o.pass = false;
    o.detail += fmt::format("; over the {:.0f} s budget", time_limit_s);
  }
  if (!o.pass) ++failures;
  fmt::print("[{}] {:>2} {}: {} ({:.2f} s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail, secs);
  std::fflush(stdout);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome geometry_oracle() {
  Rng rng(101);
  auto random_box = [&] {
    int a = static_cast<int>(rng.between(0, 64)), b = static_cast<int>(rng.between(0, 64));
    int c = static_cast<int>(rng.between(0, 64)), d = static_cast<int>(rng.between(0, 64));
    return oracle::IntBox{std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
  };
  auto to_bbox = [](const oracle::IntBox& b) { return BBox(b.x1, b.y1, b.x2, b.y2); };
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto a = random_box(), b = random_box(), c = random_box();
    const double expected = oracle::raster_iou({a, b, c});
    worst = std::max(worst, std::abs(iou3(to_bbox(a), to_bbox(b), to_bbox(c)) - expected));
  }
  return {worst <= 1e-12, fmt::format("10000 triples, max |iou3 - raster| = {:.3g}", worst)};
}

Outcome gradient_check() {
  Rng rng(102);
  double worst = 0.0;
  int clipped = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const auto k = 2 + rng.below(5);     // K <= 6
    const auto n = 2 + rng.below(7);     // N <= 8
    std::vector<FeatureRow> feats(k);
    for (auto& row : feats)
      for (double& v : row) v = rng.uniform();
    PolicyParams params, ref;
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
      params.w_think[d] = rng.uniform(-2, 2);
      params.w_answer[d] = rng.uniform(-2, 2);
      ref.w_think[d] = rng.uniform(-2, 2);
      ref.w_answer[d] = rng.uniform(-2, 2);
    }
    Scene scene;
    scene.width = 640;
    scene.height = 480;
    for (std::size_t i = 0; i < k; ++i) {
      scene.objects.push_back({BBox(10.0 * i, 10, 10.0 * i + 8, 20), 0, SizeClass::kSmall});
    }
    GrpoConfig cfg;
    cfg.beta_kl = rng.uniform(0.0, 0.5);
    std::vector<Response> responses;
    std::vector<double> rewards, logp_old;
    std::vector<bool> mask;
    for (std::size_t i = 0; i < n; ++i) {
      responses.push_back(sample_response(rng, params, scene, feats));
      rewards.push_back(rng.uniform(0, 2));
      mask.push_back(rng.bernoulli(0.25));
      // Keep every ratio away from the clip kinks so the objective is smooth
      // within the finite-difference stencil.
      double shift = 0.0;
      do {
        shift = rng.uniform(-0.35, 0.35);
      } while (std::abs(std::exp(-shift) - (1 - cfg.eps_clip)) < 1e-3 ||
               std::abs(std::exp(-shift) - (1 + cfg.eps_clip)) < 1e-3);
      logp_old.push_back(responses.back().logp + shift);
      if (std::abs(shift) > std::log1p(cfg.eps_clip)) ++clipped;
    }
    const auto analytic = group_objective_and_gradient(params, ref, feats, responses, rewards,
                                                       logp_old, mask, cfg);
    std::function<double(const std::array<double, kParamDim>&)> f =
        [&](const std::array<double, kParamDim>& w) {
          PolicyParams p = params;
          p.set_flat(w);
          return group_objective_and_gradient(p, ref, feats, responses, rewards, logp_old, mask,
                                              cfg)
              .objective;
        };
    const auto numeric = oracle::central_difference<kParamDim>(f, params.flat(), 1e-5);
    worst = std::max(worst, oracle::relative_error(analytic.grad, numeric));
  }
  return {worst <= 1e-4, fmt::format("200 instances ({} responses outside the clip band), max "
                                     "relative error {:.3g}",
                                     clipped, worst)};
}

Outcome advantage_normalization() {
  Rng rng(103);
  const double eps = GrpoConfig{}.adv_epsilon;
  double mean_abs_mean = 0.0;
  double worst_raw = 0.0;       // |std(A) - 1|
  double worst_bounded = 0.0;   // excess over the epsilon perturbation eps / (std + eps)
  int normalized = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> r(2 + rng.below(15));
    const double spread = std::pow(10.0, rng.uniform(-5, 2));
    for (double& v : r) v = rng.uniform(-spread, spread);
    if (i % 10 == 0) std::fill(r.begin(), r.end(), 0.5);
    const auto a = advantages(r);
    const double m = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
    mean_abs_mean += std::abs(m) / 1000.0;
    const double rm = std::accumulate(r.begin(), r.end(), 0.0) / r.size();
    double rv = 0.0, av = 0.0;
    for (double v : r) rv += (v - rm) * (v - rm);
    for (double v : a) av += (v - m) * (v - m);
    const double sigma = std::sqrt(rv / r.size());
    if (sigma > 1e-6) {
      ++normalized;
      const double dev = std::abs(std::sqrt(av / a.size()) - 1.0);
      worst_raw = std::max(worst_raw, dev);
      worst_bounded = std::max(worst_bounded, dev - eps / (sigma + eps));
    }
  }
  return {mean_abs_mean <= 1e-9 && worst_bounded <= 1e-6,
          fmt::format("mean |mean(A)| = {:.3g}; over {} vectors with std > 1e-6, |std(A) - 1| "
                      "exceeds the adv_epsilon perturbation eps/(std+eps) by at most {:.3g} "
                      "(raw max {:.3g})",
                      mean_abs_mean, normalized, worst_bounded, worst_raw)};
}

TrainConfig acceptance_config() {
  TrainConfig cfg;
  cfg.train_pool = 120;
  cfg.eval_count = 0;
  return cfg;
}

// Finds a policy and a batch with exactly one sample above the KL threshold.
struct DirtySetup {
  PolicyParams policy;
  std::vector<std::uint64_t> batch;
  std::uint64_t dirty = 0;
};

DirtySetup find_dirty_setup(const TrainConfig& cfg, const std::vector<Scene>& pool) {
  Rng rng(104);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    PolicyParams p;
    p.tau = cfg.tau;
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
      p.w_think[d] = rng.uniform(-3, 3);
      p.w_answer[d] = rng.uniform(-3, 3);
    }
    PolicyParams ref;
    ref.tau = cfg.tau;
    std::vector<std::uint64_t> clean, dirty;
    for (const auto& s : pool) {
      const double kl = kl_to_reference(p, ref, candidate_features(s, cfg.train_scale)).kl;
      (kl > cfg.sampler.kappa ? dirty : clean).push_back(s.id);
    }
    if (!dirty.empty() && clean.size() >= cfg.batch_size - 1) {
      DirtySetup out{p, {}, dirty.front()};
      out.batch.assign(clean.begin(), clean.begin() + (cfg.batch_size - 1));
      out.batch.insert(out.batch.begin() + 2, out.dirty);
      return out;
    }
  }
  throw std::runtime_error("no policy with a single dirty sample found");
}

Outcome rrs_semantics() {
  const auto cfg = acceptance_config();
  const auto pool = generate_pool(cfg.data_seed, 0, cfg.train_pool);
  const auto setup = find_dirty_setup(cfg, pool);

  auto run = [&](bool corrupt) {
    Trainer t(cfg, pool, {});
    t.set_policy(setup.policy);
    if (corrupt) {
      t.set_reward_hook([&](std::uint64_t id, std::vector<RewardBreakdown>& r) {
        if (id != setup.dirty) return;
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = {7.0 * i, 1.0, -3.0, 1e3 * (i + 1)};
      });
    }
    const double before = t.sampler().record(setup.dirty).rate;
    const auto m = t.step_on(setup.batch);
    return std::make_tuple(std::move(t), m, before);
  };
  auto [clean_run, m, before] = run(false);
  auto [corrupt_run, m2, before2] = run(true);
  (void)m2;
  (void)before2;

  const auto& rec = clean_run.sampler().record(setup.dirty);
  const bool rate_ok = rec.rate == 0.8 * before;
  const bool no_difficulty = rec.last_difficulty == Difficulty::kUnknown;
  const bool bit_zero = clean_run.policy().flat() == corrupt_run.policy().flat();
  const bool moved = clean_run.policy() != setup.policy;
  bool others_updated = true;
  for (auto id : setup.batch) {
    if (id != setup.dirty) {
      others_updated = others_updated &&
                       clean_run.sampler().record(id).last_difficulty != Difficulty::kUnknown;
    }
  }
  return {rate_ok && no_difficulty && bit_zero && moved && others_updated && m.dirty_count == 1,
          fmt::format("rate {} -> {}, dirty_count {}, difficulty untouched: {}, parameter diff "
                      "vs corrupted run is zero: {}, clean samples classified: {}",
                      before, rec.rate, m.dirty_count, no_difficulty, bit_zero, others_updated)};
}

Outcome ads_semantics() {
  const SamplerConfig scfg;
  const std::vector<std::pair<double, Difficulty>> cases{
      {0.1, Difficulty::kHard}, {0.35, Difficulty::kModerate}, {0.6, Difficulty::kEasy}};
  bool ok = true;
  for (auto [r, want] : cases) ok = ok && classify_difficulty(r, scfg) == want;

  auto cfg = acceptance_config();
  const auto pool = generate_pool(cfg.data_seed, 0, cfg.train_pool);
  // Accuracy means of exactly 0.1, 0.35 and 0.6 over the eight rollouts;
  // sample 2 (hard) also gets arbitrary totals in the second run.
  const std::vector<std::uint64_t> batch{1, 2, 3, 4, 5, 6};
  const std::map<std::uint64_t, double> target{{2, 0.1}, {4, 0.35}, {6, 0.6}};
  auto run = [&](double junk) {
    Trainer t(cfg, pool, {});
    t.set_reward_hook([&, junk](std::uint64_t id, std::vector<RewardBreakdown>& r) {
      auto it = target.find(id);
      if (it == target.end()) return;
      for (std::size_t i = 0; i < r.size(); ++i) {
        r[i].acc = it->second;
        r[i].tac = it->second;
        r[i].total = it->second + 1.0 + (id == 2 ? junk * static_cast<double>(i) : 0.0);
      }
    });
    const auto m = t.step_on(batch);
    return std::make_pair(std::move(t), m);
  };
  auto [a, ma] = run(0.0);
  auto [b, mb] = run(55.0);
  (void)mb;
  const auto& hard = a.sampler().record(2);
  const auto& mod = a.sampler().record(4);
  const auto& easy = a.sampler().record(6);
  ok = ok && hard.last_difficulty == Difficulty::kHard && hard.rate == 0.8 &&
       mod.last_difficulty == Difficulty::kModerate && mod.rate == 1.5 &&
       easy.last_difficulty == Difficulty::kEasy && easy.rate == 0.1;
  const bool masked = a.policy().flat() == b.policy().flat();
  ok = ok && masked;
  return {ok, fmt::format("rates hard {} / moderate {} / easy {}, hard sample gradient-masked: {} "
                          "(masked_count {})",
                          hard.rate, mod.rate, easy.rate, masked, ma.masked_count)};
}

Outcome sampler_statistics() {
  const std::vector<SampleRecord> recs{{0, 2.0}, {1, 1.0}, {2, 1.0}};
  Rng rng(106);
  std::array<double, 3> freq{};
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) freq[draw_batch(rng, recs, 1).at(0)] += 1.0 / draws;
  const std::array<double, 3> want{0.5, 0.25, 0.25};
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(freq[i] - want[i]));
  return {worst <= 0.01, fmt::format("frequencies {:.4f}/{:.4f}/{:.4f}, max deviation {:.4f}",
                                     freq[0], freq[1], freq[2], worst)};
}

Outcome ttrs_math() {
  const Dims ex = rescale_dims({1920, 1080}, 672);
  bool ok = ex == Dims{1195, 672};
  Rng rng(107);
  double worst_aspect = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Dims d{static_cast<int>(rng.between(100, 5000)), static_cast<int>(rng.between(100, 5000))};
    const Dims s = rescale_dims(d, 672);
    ok = ok && std::min(s.width, s.height) == 672;
    worst_aspect = std::max(worst_aspect, std::abs(static_cast<double>(s.width) / s.height -
                                                   static_cast<double>(d.width) / d.height));
  }
  ok = ok && worst_aspect <= 1.0 / 672;
  double worst_corner = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Dims orig{static_cast<int>(rng.between(200, 4000)), static_cast<int>(rng.between(200, 4000))};
    const int target = static_cast<int>(rng.between(100, 1200));
    const Dims scaled = rescale_dims(orig, target);
    const auto x1 = rng.between(0, orig.width - 1), y1 = rng.between(0, orig.height - 1);
    const BBox b(static_cast<double>(x1), static_cast<double>(y1),
                 static_cast<double>(rng.between(x1 + 1, orig.width)),
                 static_cast<double>(rng.between(y1 + 1, orig.height)));
    const double sx = static_cast<double>(scaled.width) / orig.width;
    const double sy = static_cast<double>(scaled.height) / orig.height;
    const BBox back = map_box_to_original(BBox(b.x1() * sx, b.y1() * sy, b.x2() * sx, b.y2() * sy),
                                          orig, scaled);
    worst_corner = std::max({worst_corner, std::abs(back.x1() - b.x1()), std::abs(back.y1() - b.y1()),
                             std::abs(back.x2() - b.x2()), std::abs(back.y2() - b.y2())});
  }
  ok = ok && worst_corner < 1.0;
  return {ok, fmt::format("(1920,1080,672) -> ({},{}), max aspect error {:.3g} (limit {:.3g}), "
                          "max corner error {:.3g} px",
                          ex.width, ex.height, worst_aspect, 1.0 / 672, worst_corner)};
}

Outcome ttme_consensus() {
  Rng rng(108);
  auto random_box = [&] {
    const double x = rng.uniform(0, 200), y = rng.uniform(0, 200);
    return BBox(x, y, x + rng.uniform(5, 80), y + rng.uniform(5, 80));
  };
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    BBox a = random_box(), b = random_box(), c = random_box();
    while (true) {
      a = random_box();
      const double bx1 = a.x1() + rng.uniform(-5, 5), by1 = a.y1() + rng.uniform(-5, 5);
      const double bx2 = a.x2() + rng.uniform(-5, 5), by2 = a.y2() + rng.uniform(-5, 5);
      if (!(bx1 < bx2 && by1 < by2)) continue;
      b = BBox(bx1, by1, bx2, by2);
      c = random_box();
      const double ab = iou2(a, b);
      if (ab > iou2(a, c) && ab > iou2(b, c)) break;
    }
    std::vector<BBox> cands{a, b, c};
    const auto outlier_pos = rng.below(3);
    std::swap(cands[2], cands[outlier_pos]);
    hits += ensemble_select_box(cands).index != outlier_pos ? 1 : 0;
  }
  return {hits == 1000, fmt::format("{}/1000 constructions selected an agreeing member", hits)};
}

Outcome end_to_end() {
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  TrainConfig base;  // batch 6, N = 8, 300 steps
  const auto pool = generate_pool(base.data_seed, 0, base.train_pool);
  const auto held_out = generate_pool(base.data_seed, kEvalIdBase, 2000);

  std::vector<double> gains, taco_final, plain_final, ttme_margin;
  std::string lines;
  bool gain_ok = true;
  for (auto seed : seeds) {
    auto cfg = base;
    cfg.seed = seed;
    auto ablation = cfg;
    ablation.tac = ablation.rrs = ablation.ads = false;

    Trainer taco_run(cfg, pool, {});
    Trainer plain_run(ablation, pool, {});
    const double start =
        evaluate(taco_run.policy(), held_out, ScalePolicy::single(cfg.eval_scale)).acc_at_05;
    for (std::uint64_t s = 0; s < cfg.steps; ++s) {
      taco_run.step();
      plain_run.step();
    }
    const double fin =
        evaluate(taco_run.policy(), held_out, ScalePolicy::single(cfg.eval_scale)).acc_at_05;
    const double plain =
        evaluate(plain_run.policy(), held_out, ScalePolicy::single(cfg.eval_scale)).acc_at_05;
    double best_single = 0.0;
    for (int scale : cfg.scales.targets) {
      best_single = std::max(
          best_single, evaluate(taco_run.policy(), held_out, ScalePolicy::single(scale)).acc_at_05);
    }
    const double ttme =
        evaluate(taco_run.policy(), held_out, ScalePolicy::multi(cfg.scales)).acc_at_05;

    gains.push_back(fin - start);
    gain_ok = gain_ok && fin - start >= 0.20;
    taco_final.push_back(fin);
    plain_final.push_back(plain);
    ttme_margin.push_back(ttme - best_single);
    lines += fmt::format("\n       seed {}: step0 {:.4f} final {:.4f} plain-GRPO {:.4f} "
                         "best-single {:.4f} TTME {:.4f}",
                         seed, start, fin, plain, best_single, ttme);
  }
  const bool b_ok = median(taco_final) >= median(plain_final);
  const bool c_ok = median(ttme_margin) >= -0.01;
  return {gain_ok && b_ok && c_ok,
          fmt::format("(a) min gain {:.4f} >= 0.20: {}; (b) median TACO {:.4f} vs plain {:.4f}: {}; "
                      "(c) median TTME - best single {:+.4f} >= -0.01: {}{}",
                      *std::min_element(gains.begin(), gains.end()), gain_ok, median(taco_final),
                      median(plain_final), b_ok, median(ttme_margin), c_ok, lines)};
}

Outcome determinism() {
  TrainConfig cfg;
  cfg.steps = 60;
  cfg.eval_every = 20;
  const auto root = fs::temp_directory_path() / "taco_acceptance_determinism";
  fs::remove_all(root);
  run_training(cfg, root / "a");
  run_training(cfg, root / "b");
  bool same = true;
  std::string diffs;
  for (const char* file : {"metrics.jsonl", "checkpoint.json", "sampler.jsonl", "summary.json"}) {
    const auto x = slurp(root / "a" / file);
    const bool eq = !x.empty() && x == slurp(root / "b" / file);
    if (!eq) diffs += fmt::format(" {}", file);
    same = same && eq;
  }
  fs::remove_all(root);
  return {same, same ? "metrics, checkpoint, sampler state and summary byte-identical"
                     : "differing files:" + diffs};
}

}  // namespace

int main() {
  const auto start = Clock::now();
  report(1, "geometry oracle equivalence", geometry_oracle, 10.0);
  report(2, "gradient correctness", gradient_check, 10.0);
  report(3, "advantage normalization", advantage_normalization);
  report(4, "RRS semantics", rrs_semantics);
  report(5, "ADS semantics", ads_semantics);
  report(6, "sampler statistics", sampler_statistics);
  report(7, "TTRS math", ttrs_math);
  report(8, "TTME consensus", ttme_consensus);
  report(9, "end-to-end learning", end_to_end, 300.0);
  report(10, "determinism", determinism);
  const double total = std::chrono::duration<double>(Clock::now() - start).count();
  fmt::print("{} of 10 criteria passed in {:.1f} s\n", 10 - failures, total);
  return failures == 0 ? 0 : 1;
}
