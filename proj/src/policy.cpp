#include "taco/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "taco/grpo.hpp"

namespace taco {

namespace {

constexpr std::size_t offset(Head h) { return h == Head::kThink ? 0 : kFeatureDim; }

std::vector<double> logits(const PolicyParams& params, std::span<const FeatureRow> features,
                           Head head) {
  const auto& w = params.weights(head);
  std::vector<double> z(features.size());
  for (std::size_t k = 0; k < features.size(); ++k) {
    double s = 0.0;
    for (std::size_t f = 0; f < kFeatureDim; ++f) s += w[f] * features[k][f];
    z[k] = s / params.tau;
  }
  return z;
}

// Log-softmax, shifted by the max for stability.
std::vector<double> log_softmax(std::vector<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  for (double& v : z) v -= lse;
  return z;
}

std::size_t sample_index(Rng& rng, std::span<const double> probs) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  return probs.size() - 1;
}

// The box text as the model writes it.
std::string box_text(const BBox& b) {
  return fmt::format("({}, {}, {}, {})", b.x1(), b.y1(), b.x2(), b.y2());
}

// Sentences of filler reasoning per candidate inspected.
constexpr int kThinkVerbosity = 1;

}  // namespace

std::array<double, kParamDim> PolicyParams::flat() const {
  std::array<double, kParamDim> v{};
  std::copy(w_think.begin(), w_think.end(), v.begin());
  std::copy(w_answer.begin(), w_answer.end(), v.begin() + kFeatureDim);
  return v;
}

void PolicyParams::set_flat(std::span<const double> v) {
  if (v.size() != kParamDim) throw std::invalid_argument("PolicyParams: wrong flat size");
  std::copy(v.begin(), v.begin() + kFeatureDim, w_think.begin());
  std::copy(v.begin() + kFeatureDim, v.end(), w_answer.begin());
}

void PolicyParams::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw std::invalid_argument(fmt::format("temperature must be positive, got {}", tau));
  }
  for (double v : flat()) {
    if (!std::isfinite(v)) throw std::invalid_argument("policy weights must be finite");
  }
}

Json PolicyParams::to_json() const {
  Json j;
  j["version"] = 1;
  j["F"] = kFeatureDim;
  j["tau"] = tau;
  j["w_think"] = w_think;
  j["w_answer"] = w_answer;
  return j;
}

PolicyParams PolicyParams::from_json(const Json& j) {
  if (j.at("version").get<int>() != 1) {
    throw std::invalid_argument("unsupported checkpoint version");
  }
  if (j.at("F").get<std::size_t>() != kFeatureDim) {
    throw std::invalid_argument(
        fmt::format("checkpoint feature dimension {} != {}", j.at("F").dump(), kFeatureDim));
  }
  PolicyParams p;
  p.tau = j.at("tau").get<double>();
  const auto wt = j.at("w_think").get<std::vector<double>>();
  const auto wa = j.at("w_answer").get<std::vector<double>>();
  if (wt.size() != kFeatureDim || wa.size() != kFeatureDim) {
    throw std::invalid_argument("checkpoint weight vectors must have F entries");
  }
  std::copy(wt.begin(), wt.end(), p.w_think.begin());
  std::copy(wa.begin(), wa.end(), p.w_answer.begin());
  p.validate();
  return p;
}

void PolicyParams::save(const std::filesystem::path& path) const {
  write_json_file(path, to_json());
}

PolicyParams PolicyParams::load(const std::filesystem::path& path) {
  const Json j = read_json_file(path);
  try {
    return from_json(j);
  } catch (const std::exception& e) {
    throw DataError(path, 0, e.what());
  }
}

std::vector<double> full_distribution(const PolicyParams& params,
                                      std::span<const FeatureRow> features, Head head) {
  if (features.empty()) throw std::invalid_argument("full_distribution: no candidates");
  auto lp = log_softmax(logits(params, features, head));
  for (double& v : lp) v = std::exp(v);
  return lp;
}

std::size_t greedy_choice(const PolicyParams& params, std::span<const FeatureRow> features,
                          Head head) {
  const auto z = logits(params, features, head);
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

std::string render_transcript(const Scene& scene, std::size_t think_idx, std::size_t answer_idx) {
  std::string think = fmt::format("The query asks for {}.", scene.expr.describe());
  for (int v = 0; v < kThinkVerbosity; ++v) {
    think += fmt::format(" Scanning {} candidates for colour, size and position.",
                         scene.objects.size());
  }
  think += fmt::format(" The best match is at {}.", box_text(scene.objects.at(think_idx).bbox));
  return fmt::format("{}{}{}{}{}{}", kThinkOpen, think, kThinkClose, kAnswerOpen,
                     box_text(scene.objects.at(answer_idx).bbox), kAnswerClose);
}

Response sample_response(Rng& rng, const PolicyParams& params, const Scene& scene,
                         std::span<const FeatureRow> features) {
  const auto lp_think = log_softmax(logits(params, features, Head::kThink));
  const auto lp_answer = log_softmax(logits(params, features, Head::kAnswer));
  std::vector<double> p_think(lp_think.size());
  std::vector<double> p_answer(lp_answer.size());
  for (std::size_t k = 0; k < p_think.size(); ++k) {
    p_think[k] = std::exp(lp_think[k]);
    p_answer[k] = std::exp(lp_answer[k]);
  }
  Response r;
  r.think_idx = sample_index(rng, p_think);
  r.answer_idx = sample_index(rng, p_answer);
  r.logp = lp_think[r.think_idx] + lp_answer[r.answer_idx];
  r.transcript = render_transcript(scene, r.think_idx, r.answer_idx);
  return r;
}

Response sample_response(Rng& rng, const PolicyParams& params, const Scene& scene, int scale) {
  const auto features = candidate_features(scene, scale);
  return sample_response(rng, params, scene, features);
}

LogProbGrad logprob_and_grad(const PolicyParams& params, std::span<const FeatureRow> features,
                             std::size_t think_idx, std::size_t answer_idx) {
  if (think_idx >= features.size() || answer_idx >= features.size()) {
    throw std::out_of_range("logprob_and_grad: candidate index out of range");
  }
  LogProbGrad out;
  for (auto [head, chosen] : {std::pair{Head::kThink, think_idx}, std::pair{Head::kAnswer, answer_idx}}) {
    const auto lp = log_softmax(logits(params, features, head));
    out.logp += lp[chosen];
    std::array<double, kFeatureDim> expected{};
    for (std::size_t k = 0; k < features.size(); ++k) {
      const double p = std::exp(lp[k]);
      for (std::size_t f = 0; f < kFeatureDim; ++f) expected[f] += p * features[k][f];
    }
    for (std::size_t f = 0; f < kFeatureDim; ++f) {
      out.grad[offset(head) + f] = (features[chosen][f] - expected[f]) / params.tau;
    }
  }
  return out;
}

KlGrad kl_to_reference(const PolicyParams& params, const PolicyParams& ref,
                       std::span<const FeatureRow> features) {
  KlGrad out;
  for (auto head : {Head::kThink, Head::kAnswer}) {
    const auto lp = log_softmax(logits(params, features, head));
    const auto lq = log_softmax(logits(ref, features, head));
    std::vector<double> p(lp.size());
    for (std::size_t k = 0; k < lp.size(); ++k) p[k] = std::exp(lp[k]);
    // Evaluated in log space; both distributions have full support.
    double kl = 0.0;
    for (std::size_t k = 0; k < lp.size(); ++k) kl += p[k] * (lp[k] - lq[k]);
    kl = std::max(kl, 0.0);
    out.kl += kl;
    // dKL/dz_k = p_k (log p_k - log q_k - KL); dz_k/dw = phi_k / tau.
    for (std::size_t k = 0; k < lp.size(); ++k) {
      const double dz = p[k] * (lp[k] - lq[k] - kl);
      for (std::size_t f = 0; f < kFeatureDim; ++f) {
        out.grad[offset(head) + f] += dz * features[k][f] / params.tau;
      }
    }
  }
  return out;
}

}  // namespace taco
