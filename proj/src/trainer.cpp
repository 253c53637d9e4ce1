#include "taco/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <fmt/format.h>

#include "taco/rng.hpp"
#include "taco/run_config.hpp"

namespace taco {

namespace {

constexpr std::uint64_t kDrawStream = 0xD7A3;
constexpr std::uint64_t kRolloutStream = 0x7011;
constexpr std::uint64_t kCurateStream = 0xC0A7;

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (group_size < 2) throw std::invalid_argument("group_size must be >= 2");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (train_scale <= 0 || eval_scale < 0) throw std::invalid_argument("scales must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (!(curation_ratio >= 0.0)) throw std::invalid_argument("curation_ratio must be >= 0");
  grpo.validate();
  sampler.validate();
  scales.validate();
}

Json StepMetrics::to_json() const {
  Json j;
  j["step"] = step;
  j["mean_total_reward"] = mean_total_reward;
  j["mean_acc_reward"] = mean_acc_reward;
  j["mean_kl"] = mean_kl;
  j["dirty_count"] = dirty_count;
  j["masked_count"] = masked_count;
  j["mean_response_length"] = mean_response_length;
  j["sampler_entropy"] = sampler_entropy;
  j["eval_acc"] = eval_acc ? Json(*eval_acc) : Json(nullptr);
  return j;
}

BBox predict_box(const PolicyParams& params, const Scene& scene, int scale) {
  const int effective = scale > 0 ? scale : std::min(scene.width, scene.height);
  const auto features = candidate_features(scene, effective);
  const auto idx = greedy_choice(params, features, Head::kAnswer);
  const Dims scaled = rescale_dims(scene.dims(), effective);
  const BBox seen = quantize_to_scaled(scene.objects[idx].bbox, scene.dims(), scaled);
  return map_box_to_original(seen, scene.dims(), scaled);
}

EvalReport evaluate(const PolicyParams& params, std::span<const Scene> eval_set,
                    const ScalePolicy& scales) {
  if (scales.scales.empty()) throw std::invalid_argument("evaluate: no scales");
  EvalReport r;
  r.count = eval_set.size();
  if (eval_set.empty()) return r;
  std::size_t hits = 0;
  double iou_sum = 0.0;
  std::vector<BBox> candidates;
  for (const auto& scene : eval_set) {
    candidates.clear();
    const std::size_t n = scales.ensemble ? scales.scales.size() : 1;
    for (std::size_t s = 0; s < n; ++s) {
      candidates.push_back(predict_box(params, scene, scales.scales[s]));
    }
    const BBox chosen = ensemble_select_box(candidates).value;
    const double iou = iou2(chosen, scene.gt_box());
    iou_sum += iou;
    hits += iou >= 0.5 ? 1 : 0;
  }
  r.acc_at_05 = static_cast<double>(hits) / static_cast<double>(eval_set.size());
  r.mean_iou = iou_sum / static_cast<double>(eval_set.size());
  return r;
}

GroupGradient group_objective_and_gradient(const PolicyParams& params, const PolicyParams& ref,
                                           std::span<const FeatureRow> features,
                                           std::span<const Response> responses,
                                           std::span<const double> rewards,
                                           std::span<const double> logp_old,
                                           const std::vector<bool>& mask, const GrpoConfig& cfg) {
  const std::size_t n = responses.size();
  RolloutGroup g;
  g.reward.assign(rewards.begin(), rewards.end());
  g.logp_old.assign(logp_old.begin(), logp_old.end());
  g.grad_mask = mask;
  const KlGrad kl = kl_to_reference(params, ref, features);
  std::vector<LogProbGrad> lp;
  lp.reserve(n);
  for (const auto& r : responses) {
    lp.push_back(logprob_and_grad(params, features, r.think_idx, r.answer_idx));
    g.logp_new.push_back(lp.back().logp);
    g.kl_ref.push_back(kl.kl);
  }
  const GroupObjective obj = group_objective(g, cfg);
  GroupGradient out;
  out.objective = obj.value;
  out.skip = obj.skip;
  if (obj.skip) return out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < kParamDim; ++d) {
      out.grad[d] += obj.logp_weight[i] * lp[i].grad[d] + obj.kl_weight[i] * kl.grad[d];
    }
  }
  return out;
}

Trainer::Trainer(TrainConfig cfg, std::vector<Scene> train_scenes, std::vector<Scene> eval_scenes,
                 std::optional<PolicyParams> init)
    : cfg_(std::move(cfg)),
      train_scenes_(std::move(train_scenes)),
      eval_scenes_(std::move(eval_scenes)) {
  cfg_.validate();
  if (train_scenes_.size() < cfg_.batch_size) {
    throw std::invalid_argument(fmt::format("need at least batch_size={} training scenes, got {}",
                                            cfg_.batch_size, train_scenes_.size()));
  }
  std::vector<std::uint64_t> ids;
  ids.reserve(train_scenes_.size());
  for (std::size_t i = 0; i < train_scenes_.size(); ++i) {
    const auto id = train_scenes_[i].id;
    if (!index_.emplace(id, i).second) {
      throw std::invalid_argument(fmt::format("duplicate training scene id {}", id));
    }
    ids.push_back(id);
    features_.push_back(candidate_features(train_scenes_[i], cfg_.train_scale));
  }
  for (const auto& s : eval_scenes_) {
    if (index_.count(s.id)) {
      throw std::invalid_argument(fmt::format("eval scene id {} also used for training", s.id));
    }
  }
  if (init) {
    policy_ = *init;
  } else {
    policy_.tau = cfg_.tau;
  }
  policy_.validate();
  reference_ = policy_;
  sampler_ = Sampler(ids, cfg_.sampler);
}

const Scene& Trainer::train_scene(std::uint64_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range(fmt::format("unknown training id {}", id));
  return train_scenes_[it->second];
}

const std::vector<FeatureRow>& Trainer::train_features(std::uint64_t id) const {
  return features_[index_.at(id)];
}

void Trainer::set_policy(const PolicyParams& p) {
  p.validate();
  policy_ = p;
}

StepMetrics Trainer::step() {
  Rng rng(derive_seed({cfg_.seed, steps_done_, kDrawStream}));
  const auto batch = sampler_.draw(rng, cfg_.batch_size);
  return step_on(batch);
}

StepMetrics Trainer::step_on(std::span<const std::uint64_t> batch) {
  const std::uint64_t step_index = steps_done_;
  const PolicyParams old_policy = policy_;
  const std::size_t n = cfg_.group_size;

  StepMetrics m;
  m.step = step_index + 1;
  std::array<double, kParamDim> grad{};
  double length_sum = 0.0;

  for (const auto sample_id : batch) {
    const Scene& scene = train_scene(sample_id);
    const auto& features = train_features(sample_id);

    std::vector<Response> responses;
    std::vector<double> logp_old;
    std::vector<RewardBreakdown> rewards;
    responses.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(derive_seed({cfg_.seed, step_index, kRolloutStream, sample_id, i}));
      responses.push_back(sample_response(rng, old_policy, scene, features));
      logp_old.push_back(responses.back().logp);
      const Transcript t = parse_transcript(responses.back().transcript);
      rewards.push_back(cfg_.tac ? rec_reward(t, scene.gt_box())
                                 : rec_reward_answer_only(t, scene.gt_box()));
      length_sum += static_cast<double>(responses.back().transcript.size());
    }
    if (reward_hook_) reward_hook_(sample_id, rewards);

    std::vector<double> totals(n);
    double acc_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      totals[i] = rewards[i].total;
      acc_mean += rewards[i].acc;
      m.mean_total_reward += rewards[i].total;
      m.mean_acc_reward += rewards[i].acc;
    }
    acc_mean /= static_cast<double>(n);

    // Exact KL at this query; identical for every rollout, so the per-sample
    // mean over rollouts is this value.
    const double kl = kl_to_reference(policy_, reference_, features).kl;
    m.mean_kl += kl;

    bool masked = false;
    bool dirty = false;
    if (cfg_.rrs && classify_dirty(kl, cfg_.sampler)) {
      dirty = true;
      masked = true;
      sampler_.rollback(sample_id);
      ++m.dirty_count;
    }
    if (cfg_.ads && !dirty) {
      const auto cls = classify_difficulty(acc_mean, cfg_.sampler);
      if (sampler_.update_difficulty(sample_id, cls) == GradDirective::kMask) masked = true;
    }
    if (masked) {
      ++m.masked_count;
      continue;
    }

    const std::vector<bool> mask(n, false);
    const auto gg = group_objective_and_gradient(policy_, reference_, features, responses, totals,
                                                 logp_old, mask, cfg_.grpo);
    for (std::size_t d = 0; d < kParamDim; ++d) grad[d] += gg.grad[d];
  }

  const double denom = static_cast<double>(batch.size());
  if (m.masked_count < batch.size()) {
    auto flat = policy_.flat();
    for (std::size_t d = 0; d < kParamDim; ++d) flat[d] += cfg_.learning_rate * grad[d] / denom;
    policy_.set_flat(flat);
  }

  const double rollouts = denom * static_cast<double>(n);
  m.mean_total_reward /= rollouts;
  m.mean_acc_reward /= rollouts;
  m.mean_kl /= denom;
  m.mean_response_length = length_sum / rollouts;
  m.sampler_entropy = sampler_.entropy();
  ++steps_done_;
  if (!eval_scenes_.empty() &&
      (steps_done_ % cfg_.eval_every == 0 || steps_done_ == cfg_.steps)) {
    m.eval_acc = evaluate_policy(ScalePolicy::single(cfg_.eval_scale)).acc_at_05;
  }
  return m;
}

EvalReport Trainer::evaluate_policy(const ScalePolicy& scales) const {
  return evaluate(policy_, eval_scenes_, scales);
}

void Trainer::save_state(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  policy_.save(dir / "checkpoint.json");
  reference_.save(dir / "reference.json");
  sampler_.save(dir / "sampler.jsonl");
  Json state;
  state["steps_done"] = steps_done_;
  state["seed"] = cfg_.seed;
  write_json_file(dir / "state.json", state);
}

Trainer Trainer::resume(const std::filesystem::path& dir, TrainConfig cfg,
                        std::vector<Scene> train_scenes, std::vector<Scene> eval_scenes) {
  const auto reference = PolicyParams::load(dir / "reference.json");
  Trainer t(std::move(cfg), std::move(train_scenes), std::move(eval_scenes), reference);
  t.policy_ = PolicyParams::load(dir / "checkpoint.json");
  t.sampler_ = Sampler::load(dir / "sampler.jsonl", t.cfg_.sampler);
  const Json state = read_json_file(dir / "state.json");
  t.steps_done_ = state.at("steps_done").get<std::uint64_t>();
  if (state.at("seed").get<std::uint64_t>() != t.cfg_.seed) {
    throw DataError(dir / "state.json", 0, "seed differs from the configuration");
  }
  if (t.sampler_.records().size() != t.train_scenes_.size()) {
    throw DataError(dir / "sampler.jsonl", 0, "sampler state does not match the training set");
  }
  for (const auto& r : t.sampler_.records()) {
    if (!t.index_.count(r.id)) {
      throw DataError(dir / "sampler.jsonl", 0, fmt::format("unknown sample id {}", r.id));
    }
  }
  return t;
}

std::vector<Scene> generate_pool(std::uint64_t data_seed, std::uint64_t first_id, std::size_t count) {
  std::vector<Scene> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(pool_scene(data_seed, first_id + i));
  return out;
}

std::map<std::uint64_t, double> base_accuracy(const PolicyParams& base, std::span<const Scene> scenes,
                                              int scale, bool tac) {
  std::map<std::uint64_t, double> out;
  for (const auto& s : scenes) {
    const auto features = candidate_features(s, scale);
    const auto think = greedy_choice(base, features, Head::kThink);
    const auto answer = greedy_choice(base, features, Head::kAnswer);
    const Transcript t = parse_transcript(render_transcript(s, think, answer));
    out[s.id] = (tac ? rec_reward(t, s.gt_box()) : rec_reward_answer_only(t, s.gt_box())).acc;
  }
  return out;
}

RunSummary run_training(const TrainConfig& cfg, const std::filesystem::path& out_dir,
                        const RunOptions& options) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream rc(out_dir / "resolved-config.txt", std::ios::trunc);
    rc << format_run_config(cfg);
    if (!rc) throw DataError(out_dir / "resolved-config.txt", 0, "write failed");
  }

  std::vector<Scene> train = options.data ? load_scenes(*options.data)
                                          : generate_pool(cfg.data_seed, 0, cfg.train_pool);
  std::vector<Scene> eval = generate_pool(cfg.data_seed, kEvalIdBase, cfg.eval_count);

  RunSummary summary;
  const PolicyParams init = [&] {
    PolicyParams p;
    p.tau = cfg.tau;
    return p;
  }();
  if (cfg.curation) {
    Rng rng(derive_seed({cfg.seed, kCurateStream}));
    auto result = curate(base_accuracy(init, train, cfg.train_scale, cfg.tac),
                         cfg.curation_threshold, cfg.curation_ratio, rng);
    if (result.degenerate) {
      fmt::print(stderr, "warning: curation found no difficult samples; training on the full pool\n");
    } else {
      std::unordered_map<std::uint64_t, std::size_t> pos;
      for (std::size_t i = 0; i < train.size(); ++i) pos[train[i].id] = i;
      std::vector<Scene> curated;
      curated.reserve(result.ids.size());
      for (auto id : result.ids) curated.push_back(train[pos.at(id)]);
      train = std::move(curated);
    }
    summary.curation = std::move(result);
  }

  const auto metrics_path = out_dir / "metrics.jsonl";
  std::optional<Trainer> trainer;
  if (options.resume && std::filesystem::exists(out_dir / "state.json")) {
    trainer.emplace(Trainer::resume(out_dir, cfg, std::move(train), std::move(eval)));
  } else {
    trainer.emplace(cfg, std::move(train), std::move(eval), init);
    std::ofstream truncate(metrics_path, std::ios::trunc);
  }
  summary.initial_eval = evaluate(trainer->reference(), trainer->eval_scenes(),
                                  ScalePolicy::single(cfg.eval_scale));

  std::ofstream metrics(metrics_path, std::ios::app);
  if (!metrics) throw DataError(metrics_path, 0, "cannot open for writing");
  while (trainer->steps_done() < cfg.steps) {
    auto m = trainer->step();
    metrics << dump_line(m.to_json()) << '\n';
    summary.metrics.push_back(std::move(m));
  }
  metrics.flush();
  if (!metrics) throw DataError(metrics_path, 0, "write failed");

  trainer->save_state(out_dir);
  summary.final_eval = trainer->evaluate_policy(ScalePolicy::single(cfg.eval_scale));

  Json s;
  auto report = [](const EvalReport& r) {
    Json j;
    j["acc_at_05"] = r.acc_at_05;
    j["mean_iou"] = r.mean_iou;
    j["count"] = r.count;
    return j;
  };
  s["steps_done"] = trainer->steps_done();
  s["initial_eval"] = report(summary.initial_eval);
  s["final_eval"] = report(summary.final_eval);
  if (summary.curation) {
    Json c;
    c["difficult"] = summary.curation->difficult;
    c["simple_total"] = summary.curation->simple_total;
    c["simple_selected"] = summary.curation->simple_selected;
    c["degenerate"] = summary.curation->degenerate;
    s["curation"] = std::move(c);
  }
  write_json_file(out_dir / "summary.json", s);
  return summary;
}

}  // namespace taco
