#include "taco/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace taco {

void GrpoConfig::validate() const {
  if (!(eps_clip > 0.0 && eps_clip < 1.0)) {
    throw std::invalid_argument(
        fmt::format("eps_clip must lie in (0,1), got {}", eps_clip));
  }
  if (!(beta_kl >= 0.0)) {
    throw std::invalid_argument(
        fmt::format("beta_kl must be non-negative, got {}", beta_kl));
  }
  if (!(adv_epsilon >= 0.0)) {
    throw std::invalid_argument("adv_epsilon must be non-negative");
  }
}

void RolloutGroup::validate() const {
  const std::size_t n = reward.size();
  if (n < 2) throw std::invalid_argument("RolloutGroup: need N >= 2");
  if (logp_new.size() != n || logp_old.size() != n || kl_ref.size() != n ||
      grad_mask.size() != n) {
    throw std::invalid_argument("RolloutGroup: array length mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(logp_new[i]) || !std::isfinite(logp_old[i])) {
      throw std::invalid_argument("RolloutGroup: non-finite log-probability");
    }
  }
}

std::vector<double> advantages(std::span<const double> rewards,
                               double adv_epsilon) {
  const std::size_t n = rewards.size();
  if (n < 2) {
    throw std::invalid_argument(
        fmt::format("advantages: need at least 2 rewards, got {}", n));
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double std = std::sqrt(var / static_cast<double>(n));
  std::vector<double> out(n, 0.0);
  if (std == 0.0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (rewards[i] - mean) / (std + adv_epsilon);
  }
  return out;
}

double clipped_term(double ratio, double advantage, double eps_clip) {
  if (!(ratio > 0.0)) {
    throw std::invalid_argument(
        fmt::format("clipped_term: ratio must be positive, got {}", ratio));
  }
  const double clipped = std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip);
  return std::min(ratio * advantage, clipped * advantage);
}

double clipped_term_dlogratio(double ratio, double advantage, double eps_clip) {
  const double clipped = std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip);
  const bool clip_binds =
      clipped != ratio && clipped * advantage < ratio * advantage;
  return clip_binds ? 0.0 : ratio * advantage;
}

double kl_exact(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) {
    throw std::invalid_argument("kl_exact: distributions differ in size");
  }
  double sp = 0.0;
  double sq = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] < 0.0 || q[k] < 0.0) {
      throw std::invalid_argument("kl_exact: negative probability");
    }
    sp += p[k];
    sq += q[k];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) {
    throw std::invalid_argument(
        fmt::format("kl_exact: distributions must sum to 1 (got {}, {})", sp, sq));
  }
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    if (q[k] == 0.0) {
      throw InfiniteDivergence(
          fmt::format("kl_exact: q[{}] = 0 where p[{}] = {}", k, k, p[k]));
    }
    kl += p[k] * std::log(p[k] / q[k]);
  }
  return std::max(kl, 0.0);
}

GroupObjective group_objective(const RolloutGroup& g, const GrpoConfig& cfg) {
  g.validate();
  const std::size_t n = g.size();
  std::vector<double> adv(n, 0.0);
  std::vector<double> live_rewards;
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < n; ++i) {
    if (!g.grad_mask[i]) {
      live.push_back(i);
      live_rewards.push_back(g.reward[i]);
    }
  }
  if (live.size() >= 2) {
    const auto a = advantages(live_rewards, cfg.adv_epsilon);
    for (std::size_t k = 0; k < live.size(); ++k) adv[live[k]] = a[k];
  }
  return group_objective_with_advantages(g, adv, cfg);
}

GroupObjective group_objective_with_advantages(const RolloutGroup& g,
                                               std::span<const double> adv,
                                               const GrpoConfig& cfg) {
  g.validate();
  cfg.validate();
  const std::size_t n = g.size();
  if (adv.size() != n) {
    throw std::invalid_argument("group_objective: advantage length mismatch");
  }
  GroupObjective out;
  out.advantages.assign(adv.begin(), adv.end());
  out.logp_weight.assign(n, 0.0);
  out.kl_weight.assign(n, 0.0);

  std::size_t live = 0;
  for (std::size_t i = 0; i < n; ++i) live += g.grad_mask[i] ? 0 : 1;
  if (live == 0) {
    out.skip = true;
    return out;
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  double surrogate = 0.0;
  double kl_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (g.grad_mask[i]) continue;
    const double ratio = std::exp(g.logp_new[i] - g.logp_old[i]);
    surrogate += clipped_term(ratio, adv[i], cfg.eps_clip);
    out.logp_weight[i] = inv_n * clipped_term_dlogratio(ratio, adv[i], cfg.eps_clip);
    kl_mean += g.kl_ref[i];
    out.kl_weight[i] = -cfg.beta_kl / static_cast<double>(live);
  }
  kl_mean /= static_cast<double>(live);
  out.value = inv_n * surrogate - cfg.beta_kl * kl_mean;
  return out;
}

}  // namespace taco
