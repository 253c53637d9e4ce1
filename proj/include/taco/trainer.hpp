#ifndef TACO_TRAINER_HPP_
#define TACO_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "taco/grpo.hpp"
#include "taco/policy.hpp"
#include "taco/rewards.hpp"
#include "taco/sampler.hpp"
#include "taco/synth_env.hpp"
#include "taco/ttrs.hpp"

namespace taco {

struct TrainConfig {
  std::uint64_t steps = 300;
  std::size_t batch_size = 6;
  std::size_t group_size = 8;
  double learning_rate = 0.05;
  std::uint64_t seed = 1;
  std::uint64_t data_seed = 7;   // generated pool and eval set
  std::size_t train_pool = 600;  // generated training scenes, when no file
  std::size_t eval_count = 500;  // held-out scenes for periodic eval
  std::uint64_t eval_every = 50;
  int train_scale = 336;
  int eval_scale = 672;
  double tau = 1.0;
  GrpoConfig grpo;
  SamplerConfig sampler;
  bool curation = false;
  double curation_threshold = 0.5;
  double curation_ratio = 2.0;
  bool tac = true;
  bool rrs = true;
  bool ads = true;
  ScaleSet scales;

  void validate() const;
};

struct StepMetrics {
  std::uint64_t step = 0;
  double mean_total_reward = 0.0;
  double mean_acc_reward = 0.0;
  double mean_kl = 0.0;
  std::size_t dirty_count = 0;
  std::size_t masked_count = 0;
  double mean_response_length = 0.0;
  double sampler_entropy = 0.0;
  std::optional<double> eval_acc;

  Json to_json() const;
};

// Scale 0 means the native canvas resolution. With `ensemble` set, the
// answer is chosen across all scales by consensus.
struct ScalePolicy {
  std::vector<int> scales{672};
  bool ensemble = false;

  static ScalePolicy single(int scale) { return {{scale}, false}; }
  static ScalePolicy multi(const ScaleSet& set) { return {set.targets, true}; }
};

struct EvalReport {
  double acc_at_05 = 0.0;
  double mean_iou = 0.0;
  std::size_t count = 0;
};

// Greedy answer box for one scene seen at `scale`, reported on the scaled
// canvas in whole pixels and mapped back to the original frame.
BBox predict_box(const PolicyParams& params, const Scene& scene, int scale);

EvalReport evaluate(const PolicyParams& params, std::span<const Scene> eval_set,
                    const ScalePolicy& scales);

// Objective of one rollout group as a function of the policy parameters, and
// its exact gradient. logp_new and the reference KL are recomputed from
// `params`; responses, rewards, logp_old and the mask are held fixed.
struct GroupGradient {
  double objective = 0.0;
  bool skip = false;
  std::array<double, kParamDim> grad{};
};

GroupGradient group_objective_and_gradient(const PolicyParams& params, const PolicyParams& ref,
                                           std::span<const FeatureRow> features,
                                           std::span<const Response> responses,
                                           std::span<const double> rewards,
                                           std::span<const double> logp_old,
                                           const std::vector<bool>& mask, const GrpoConfig& cfg);

// Test seam: lets a caller rewrite the rewards of a sample before the
// sampler and objective see them.
using RewardHook = std::function<void(std::uint64_t sample_id, std::vector<RewardBreakdown>&)>;

class Trainer {
 public:
  // The reference policy is frozen at `init` (zeros when absent).
  Trainer(TrainConfig cfg, std::vector<Scene> train_scenes, std::vector<Scene> eval_scenes,
          std::optional<PolicyParams> init = std::nullopt);

  // One full step: draw a batch from the sampler, then step_on().
  StepMetrics step();

  // Rollouts, rewards, rollback/difficulty updates and one SGD ascent step on
  // an explicit batch of training ids.
  StepMetrics step_on(std::span<const std::uint64_t> batch);

  EvalReport evaluate_policy(const ScalePolicy& scales) const;

  const TrainConfig& config() const { return cfg_; }
  const PolicyParams& policy() const { return policy_; }
  const PolicyParams& reference() const { return reference_; }
  const Sampler& sampler() const { return sampler_; }
  std::uint64_t steps_done() const { return steps_done_; }
  std::span<const Scene> eval_scenes() const { return eval_scenes_; }

  void set_policy(const PolicyParams& p);
  void set_reward_hook(RewardHook hook) { reward_hook_ = std::move(hook); }

  // Writes checkpoint.json, reference.json, sampler.jsonl and state.json.
  void save_state(const std::filesystem::path& dir) const;
  static Trainer resume(const std::filesystem::path& dir, TrainConfig cfg,
                        std::vector<Scene> train_scenes, std::vector<Scene> eval_scenes);

 private:
  const Scene& train_scene(std::uint64_t id) const;
  const std::vector<FeatureRow>& train_features(std::uint64_t id) const;

  TrainConfig cfg_;
  std::vector<Scene> train_scenes_;
  std::vector<Scene> eval_scenes_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<std::vector<FeatureRow>> features_;
  PolicyParams policy_;
  PolicyParams reference_;
  Sampler sampler_;
  std::uint64_t steps_done_ = 0;
  RewardHook reward_hook_;
};

// Training ids [0, train_pool) and eval ids from kEvalIdBase upward, both
// generated from data_seed.
inline constexpr std::uint64_t kEvalIdBase = 1'000'000'000ULL;
std::vector<Scene> generate_pool(std::uint64_t data_seed, std::uint64_t first_id, std::size_t count);

// Greedy single rollout of `base` on every scene; returns id -> accuracy reward.
std::map<std::uint64_t, double> base_accuracy(const PolicyParams& base, std::span<const Scene> scenes,
                                              int scale, bool tac);

struct RunSummary {
  EvalReport initial_eval;
  EvalReport final_eval;
  std::vector<StepMetrics> metrics;
  std::optional<CurationResult> curation;
};

struct RunOptions {
  std::optional<std::filesystem::path> data;  // training scenes; generated when absent
  bool resume = false;                        // continue from out_dir state
};

// Optional curation, then cfg.steps training steps with periodic evaluation.
// Writes checkpoint.json, metrics.jsonl, resolved-config.txt, sampler.jsonl,
// state.json and summary.json into out_dir.
RunSummary run_training(const TrainConfig& cfg, const std::filesystem::path& out_dir,
                        const RunOptions& options = {});

}  // namespace taco

#endif  // TACO_TRAINER_HPP_
