#ifndef TACO_GRPO_HPP_
#define TACO_GRPO_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace taco {

struct GrpoConfig {
  double eps_clip = 0.2;
  double beta_kl = 0.04;
  double adv_epsilon = 1e-8;

  void validate() const;
};

// Numeric view of the N responses sampled for one query. Transcripts and
// chosen actions live with the trainer; this holds what the objective needs.
struct RolloutGroup {
  std::uint64_t query_id = 0;
  std::vector<double> logp_new;
  std::vector<double> logp_old;
  std::vector<double> kl_ref;  // exact KL(pi_theta || pi_ref) at this query
  std::vector<double> reward;
  std::vector<bool> grad_mask;  // true = excluded from the gradient

  std::size_t size() const { return reward.size(); }
  void validate() const;
};

// Objective value plus the per-response multipliers needed to assemble the
// parameter gradient:
//   dJ/dtheta = sum_i logp_weight[i] * dlogp_i/dtheta
//             + sum_i kl_weight[i]   * dKL_i/dtheta
struct GroupObjective {
  double value = 0.0;
  bool skip = false;  // every response masked; nothing to learn from
  std::vector<double> advantages;
  std::vector<double> logp_weight;
  std::vector<double> kl_weight;
};

class InfiniteDivergence : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// (r - mean) / (pop_std + adv_epsilon); all zeros when pop_std is 0.
// Throws std::invalid_argument for fewer than two rewards.
std::vector<double> advantages(std::span<const double> rewards,
                               double adv_epsilon = 1e-8);

// min(ratio*A, clip(ratio, 1-eps, 1+eps)*A). Throws for ratio <= 0.
double clipped_term(double ratio, double advantage, double eps_clip);

// d clipped_term / d log(ratio): ratio*A on the unclipped branch, 0 when the
// clip is active and binds.
double clipped_term_dlogratio(double ratio, double advantage, double eps_clip);

// sum p log(p/q) with 0 log 0 = 0. Throws InfiniteDivergence when q has no
// support where p does, std::invalid_argument on malformed inputs.
double kl_exact(std::span<const double> p, std::span<const double> q);

// Advantages are standardized over unmasked responses only, so masked entries
// cannot influence the result through the group statistics.
GroupObjective group_objective(const RolloutGroup& g, const GrpoConfig& cfg);

// Same objective with caller-supplied advantages (length N).
GroupObjective group_objective_with_advantages(const RolloutGroup& g,
                                               std::span<const double> adv,
                                               const GrpoConfig& cfg);

}  // namespace taco

#endif  // TACO_GRPO_HPP_
