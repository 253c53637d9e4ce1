#ifndef TACO_POLICY_HPP_
#define TACO_POLICY_HPP_

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "taco/records.hpp"
#include "taco/rng.hpp"
#include "taco/synth_env.hpp"

namespace taco {

enum class Head { kThink, kAnswer };

inline constexpr std::size_t kParamDim = 2 * kFeatureDim;

// Softmax-linear policy with independent think and answer heads over the
// scene's candidate objects: pi(k) = softmax(w . phi_k / tau).
struct PolicyParams {
  std::array<double, kFeatureDim> w_think{};
  std::array<double, kFeatureDim> w_answer{};
  double tau = 1.0;

  const std::array<double, kFeatureDim>& weights(Head h) const {
    return h == Head::kThink ? w_think : w_answer;
  }
  std::array<double, kFeatureDim>& weights(Head h) {
    return h == Head::kThink ? w_think : w_answer;
  }

  // Flattened view: w_think followed by w_answer.
  std::array<double, kParamDim> flat() const;
  void set_flat(std::span<const double> v);

  void validate() const;

  Json to_json() const;  // {"version":1,"F":8,"tau":..,"w_think":[..],"w_answer":[..]}
  static PolicyParams from_json(const Json& j);
  void save(const std::filesystem::path& path) const;
  static PolicyParams load(const std::filesystem::path& path);

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

std::vector<double> full_distribution(const PolicyParams& params,
                                      std::span<const FeatureRow> features, Head head);

// Lowest index wins ties.
std::size_t greedy_choice(const PolicyParams& params, std::span<const FeatureRow> features,
                          Head head);

struct Response {
  std::size_t think_idx = 0;
  std::size_t answer_idx = 0;
  std::string transcript;
  double logp = 0.0;
};

// Renders the tagged output for a (think, answer) choice. Boxes are written in
// original canvas coordinates.
std::string render_transcript(const Scene& scene, std::size_t think_idx, std::size_t answer_idx);

Response sample_response(Rng& rng, const PolicyParams& params, const Scene& scene,
                         std::span<const FeatureRow> features);
Response sample_response(Rng& rng, const PolicyParams& params, const Scene& scene, int scale);

struct LogProbGrad {
  double logp = 0.0;
  std::array<double, kParamDim> grad{};  // d logp / d (w_think ++ w_answer)
};

LogProbGrad logprob_and_grad(const PolicyParams& params, std::span<const FeatureRow> features,
                             std::size_t think_idx, std::size_t answer_idx);

struct KlGrad {
  double kl = 0.0;
  std::array<double, kParamDim> grad{};  // d KL / d (w_think ++ w_answer)
};

// Exact KL(pi_params || pi_ref) of the joint (think, answer) distribution,
// which factorizes into the sum over heads.
KlGrad kl_to_reference(const PolicyParams& params, const PolicyParams& ref,
                       std::span<const FeatureRow> features);

}  // namespace taco

#endif  // TACO_POLICY_HPP_
