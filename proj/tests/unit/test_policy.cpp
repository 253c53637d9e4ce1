#include <doctest.h>

#include <cmath>
#include <functional>

#include "oracles.hpp"
#include "taco/grpo.hpp"
#include "taco/policy.hpp"
#include "taco/transcript.hpp"

using namespace taco;

namespace {

std::vector<FeatureRow> random_features(Rng& rng, std::size_t k) {
  std::vector<FeatureRow> f(k);
  for (auto& row : f)
    for (double& v : row) v = rng.uniform();
  return f;
}

PolicyParams random_params(Rng& rng, double spread = 2.0) {
  PolicyParams p;
  for (double& w : p.w_think) w = rng.uniform(-spread, spread);
  for (double& w : p.w_answer) w = rng.uniform(-spread, spread);
  return p;
}

double entropy(const std::vector<double>& p) {
  double h = 0;
  for (double v : p)
    if (v > 0) h -= v * std::log(v);
  return h;
}

}  // namespace

TEST_CASE("full_distribution symmetric cases") {
  Rng rng(51);
  const auto params = random_params(rng);
  std::vector<FeatureRow> same(4, random_features(rng, 1)[0]);
  for (double p : full_distribution(params, same, Head::kThink)) CHECK(p == doctest::Approx(0.25));

  const auto feats = random_features(rng, 5);
  for (double p : full_distribution(PolicyParams{}, feats, Head::kAnswer))
    CHECK(p == doctest::Approx(0.2));
}

TEST_CASE("high temperature approaches uniform") {
  Rng rng(52);
  for (int trial = 0; trial < 50; ++trial) {
    const auto feats = random_features(rng, 6);
    auto cold = random_params(rng);
    auto hot = cold;
    hot.tau = 100.0;
    CHECK(entropy(full_distribution(hot, feats, Head::kThink)) >
          entropy(full_distribution(cold, feats, Head::kThink)));
  }
  PolicyParams bad;
  bad.tau = 0.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("greedy_choice prefers the lowest index on ties") {
  std::vector<FeatureRow> same(3, FeatureRow{});
  CHECK(greedy_choice(PolicyParams{}, same, Head::kAnswer) == 0);
}

TEST_CASE("sample_response is reproducible and consistent") {
  const auto scene = generate_scene(5, 0.6);
  const auto feats = candidate_features(scene, 336);
  Rng rng(53);
  const auto params = random_params(rng);
  Rng a(7), b(7);
  const auto ra = sample_response(a, params, scene, feats);
  const auto rb = sample_response(b, params, scene, feats);
  CHECK(ra.transcript == rb.transcript);
  CHECK(ra.logp == rb.logp);

  const auto pt = full_distribution(params, feats, Head::kThink);
  const auto pa = full_distribution(params, feats, Head::kAnswer);
  for (int i = 0; i < 200; ++i) {
    const auto r = sample_response(rng, params, scene, feats);
    REQUIRE(std::abs(std::exp(r.logp) - pt[r.think_idx] * pa[r.answer_idx]) <= 1e-12);
  }
}

TEST_CASE("one-candidate scene forces both choices") {
  Scene s;
  s.width = 640;
  s.height = 480;
  s.objects = {{BBox(10, 10, 50, 40), 0, SizeClass::kSmall}};
  const auto feats = candidate_features(s, 480);
  Rng rng(54);
  const auto r = sample_response(rng, random_params(rng), s, feats);
  CHECK(r.think_idx == 0);
  CHECK(r.answer_idx == 0);
  CHECK(r.logp == 0.0);
  const auto g = logprob_and_grad(random_params(rng), feats, 0, 0);
  for (double v : g.grad) CHECK(v == 0.0);
}

TEST_CASE("rendered transcripts parse back to the chosen boxes") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = generate_scene(seed, 0.9);
    const std::size_t t = seed % s.objects.size();
    const std::size_t a = (seed / 3) % s.objects.size();
    const auto parsed = parse_transcript(render_transcript(s, t, a));
    REQUIRE(parsed.think_bbox.has_value());
    REQUIRE(parsed.answer_bbox.has_value());
    REQUIRE(*parsed.think_bbox == s.objects[t].bbox);
    REQUIRE(*parsed.answer_bbox == s.objects[a].bbox);
    REQUIRE(format_reward(render_transcript(s, t, a)) == 1.0);
  }
}

TEST_CASE("identical candidates give a zero gradient") {
  Rng rng(55);
  std::vector<FeatureRow> same(4, random_features(rng, 1)[0]);
  const auto g = logprob_and_grad(random_params(rng), same, 1, 2);
  for (double v : g.grad) CHECK(std::abs(v) <= 1e-15);
}

TEST_CASE("log-probability gradient matches finite differences") {
  Rng rng(56);
  for (int trial = 0; trial < 200; ++trial) {
    const auto k = 2 + rng.below(5);
    const auto feats = random_features(rng, k);
    auto params = random_params(rng);
    params.tau = rng.uniform(0.5, 2.0);
    const auto t = rng.below(k), a = rng.below(k);
    const auto analytic = logprob_and_grad(params, feats, t, a);
    std::function<double(const std::array<double, kParamDim>&)> f =
        [&](const std::array<double, kParamDim>& w) {
          PolicyParams p = params;
          p.set_flat(w);
          const auto pt = full_distribution(p, feats, Head::kThink);
          const auto pa = full_distribution(p, feats, Head::kAnswer);
          return std::log(pt[t]) + std::log(pa[a]);
        };
    const auto numeric = oracle::central_difference<kParamDim>(f, params.flat(), 1e-5);
    REQUIRE(oracle::relative_error(analytic.grad, numeric) <= 1e-5);
    REQUIRE(analytic.logp == doctest::Approx(f(params.flat())).epsilon(1e-12));
  }
}

TEST_CASE("KL gradient matches finite differences") {
  Rng rng(57);
  for (int trial = 0; trial < 200; ++trial) {
    const auto feats = random_features(rng, 2 + rng.below(5));
    const auto params = random_params(rng);
    const auto ref = random_params(rng);
    const auto analytic = kl_to_reference(params, ref, feats);
    std::function<double(const std::array<double, kParamDim>&)> f =
        [&](const std::array<double, kParamDim>& w) {
          PolicyParams p = params;
          p.set_flat(w);
          return kl_exact(full_distribution(p, feats, Head::kThink),
                          full_distribution(ref, feats, Head::kThink)) +
                 kl_exact(full_distribution(p, feats, Head::kAnswer),
                          full_distribution(ref, feats, Head::kAnswer));
        };
    const auto numeric = oracle::central_difference<kParamDim>(f, params.flat(), 1e-5);
    REQUIRE(oracle::relative_error(analytic.grad, numeric) <= 1e-5);
    REQUIRE(analytic.kl == doctest::Approx(f(params.flat())).epsilon(1e-12));
  }
}

TEST_CASE("property: KL grows as the think weights move away from the reference") {
  Rng rng(58);
  for (int trial = 0; trial < 100; ++trial) {
    const auto feats = random_features(rng, 3 + rng.below(4));
    const auto ref = random_params(rng);
    const auto dir = random_params(rng);
    CHECK(kl_to_reference(ref, ref, feats).kl == 0.0);
    double prev = 0.0;
    for (double t = 0.25; t <= 3.0; t += 0.25) {
      PolicyParams p = ref;
      for (std::size_t d = 0; d < kFeatureDim; ++d) p.w_think[d] += t * dir.w_think[d];
      const double kl = kl_to_reference(p, ref, feats).kl;
      REQUIRE(kl >= prev);
      prev = kl;
    }
  }
}

TEST_CASE("policy JSON round trip") {
  Rng rng(59);
  auto p = random_params(rng);
  p.tau = 1.5;
  CHECK(PolicyParams::from_json(p.to_json()) == p);
  auto j = p.to_json();
  j["F"] = 7;
  CHECK_THROWS(PolicyParams::from_json(j));
}
