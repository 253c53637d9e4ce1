#include "taco/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "taco/records.hpp"

namespace taco {

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy:
      return "easy";
    case Difficulty::kModerate:
      return "moderate";
    case Difficulty::kHard:
      return "hard";
    case Difficulty::kUnknown:
      break;
  }
  return "unknown";
}

Difficulty parse_difficulty(std::string_view s) {
  if (s == "easy") return Difficulty::kEasy;
  if (s == "moderate") return Difficulty::kModerate;
  if (s == "hard") return Difficulty::kHard;
  if (s == "unknown") return Difficulty::kUnknown;
  throw std::invalid_argument(fmt::format("unknown difficulty '{}'", s));
}

void SamplerConfig::validate() const {
  if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be >= 0");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument(fmt::format("gamma must lie in (0,1), got {}", gamma));
  }
  if (!(theta_low < theta_high)) {
    throw std::invalid_argument("theta_low must be below theta_high");
  }
  if (!(alpha_easy > 0.0 && alpha_hard > 0.0 && alpha_moderate > 0.0)) {
    throw std::invalid_argument("difficulty multipliers must be positive");
  }
  if (!(rate_min > 0.0 && rate_min <= rate_max)) {
    throw std::invalid_argument("need 0 < rate_min <= rate_max");
  }
}

namespace {

double clamp_rate(double p, const SamplerConfig& cfg) {
  return std::clamp(p, cfg.rate_min, cfg.rate_max);
}

}  // namespace

bool classify_dirty(double kl, const SamplerConfig& cfg) {
  if (!(kl >= 0.0)) {
    throw std::invalid_argument(fmt::format("classify_dirty: kl must be >= 0, got {}", kl));
  }
  return kl > cfg.kappa;
}

SampleRecord apply_rollback(SampleRecord rec, const SamplerConfig& cfg) {
  rec.rate = clamp_rate(cfg.gamma * rec.rate, cfg);
  ++rec.dirty_hits;
  return rec;
}

Difficulty classify_difficulty(double r_acc, const SamplerConfig& cfg) {
  if (r_acc > cfg.theta_high) return Difficulty::kEasy;
  if (r_acc < cfg.theta_low) return Difficulty::kHard;
  return Difficulty::kModerate;
}

DifficultyUpdate apply_difficulty(SampleRecord rec, Difficulty cls,
                                  const SamplerConfig& cfg) {
  double alpha = 1.0;
  GradDirective directive = GradDirective::kAllow;
  switch (cls) {
    case Difficulty::kEasy:
      alpha = cfg.alpha_easy;
      break;
    case Difficulty::kModerate:
      alpha = cfg.alpha_moderate;
      break;
    case Difficulty::kHard:
      alpha = cfg.alpha_hard;
      directive = GradDirective::kMask;
      break;
    case Difficulty::kUnknown:
      throw std::invalid_argument("apply_difficulty: class must be known");
  }
  rec.rate = clamp_rate(alpha * rec.rate, cfg);
  rec.last_difficulty = cls;
  return {rec, directive};
}

std::vector<std::uint64_t> draw_batch(Rng& rng,
                                      std::span<const SampleRecord> records,
                                      std::size_t batch_size) {
  std::vector<std::size_t> pool;
  pool.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].rate > 0.0) pool.push_back(i);
  }
  if (batch_size > pool.size()) {
    throw std::invalid_argument(
        fmt::format("draw_batch: batch of {} requested but only {} eligible records",
                    batch_size, pool.size()));
  }
  std::vector<std::uint64_t> out;
  out.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    double total = 0.0;
    for (auto i : pool) total += records[i].rate;
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = pool.size() - 1;
    for (std::size_t k = 0; k < pool.size(); ++k) {
      acc += records[pool[k]].rate;
      if (target < acc) {
        pick = k;
        break;
      }
    }
    out.push_back(records[pool[pick]].id);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

namespace {

template <typename T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

}  // namespace

CurationResult curate(const std::map<std::uint64_t, double>& base_results,
                      double difficult_threshold, double ratio, Rng& rng) {
  if (base_results.empty()) throw std::invalid_argument("curate: empty input");
  if (!(ratio >= 0.0)) throw std::invalid_argument("curate: ratio must be >= 0");
  std::vector<std::uint64_t> difficult;
  std::vector<std::uint64_t> simple;
  for (const auto& [id, r] : base_results) {
    (r < difficult_threshold ? difficult : simple).push_back(id);
  }
  CurationResult out;
  out.difficult = difficult.size();
  out.simple_total = simple.size();
  if (difficult.empty()) {
    out.degenerate = true;
    return out;
  }
  const auto want = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(difficult.size())));
  const std::size_t take = std::min(want, simple.size());
  // Partial Fisher-Yates: the first `take` entries are a uniform subset.
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(simple[i], simple[i + rng.below(simple.size() - i)]);
  }
  out.simple_selected = take;
  out.ids = std::move(difficult);
  out.ids.insert(out.ids.end(), simple.begin(),
                 simple.begin() + static_cast<std::ptrdiff_t>(take));
  fisher_yates(out.ids, rng);
  return out;
}

Sampler::Sampler(std::span<const std::uint64_t> ids, SamplerConfig cfg)
    : cfg_(cfg) {
  cfg_.validate();
  records_.reserve(ids.size());
  for (auto id : ids) {
    if (!index_.emplace(id, records_.size()).second) {
      throw std::invalid_argument(fmt::format("Sampler: duplicate sample id {}", id));
    }
    records_.push_back(SampleRecord{id, 1.0, 0, Difficulty::kUnknown});
  }
}

const SampleRecord& Sampler::record(std::uint64_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw std::out_of_range(fmt::format("Sampler: unknown sample id {}", id));
  }
  return records_[it->second];
}

SampleRecord& Sampler::mutable_record(std::uint64_t id) {
  return const_cast<SampleRecord&>(std::as_const(*this).record(id));
}

const SampleRecord& Sampler::rollback(std::uint64_t id) {
  auto& rec = mutable_record(id);
  rec = apply_rollback(rec, cfg_);
  return rec;
}

GradDirective Sampler::update_difficulty(std::uint64_t id, Difficulty cls) {
  auto& rec = mutable_record(id);
  auto upd = apply_difficulty(rec, cls, cfg_);
  rec = upd.record;
  return upd.directive;
}

double Sampler::entropy() const {
  double total = 0.0;
  for (const auto& r : records_) total += r.rate;
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (const auto& r : records_) {
    const double p = r.rate / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

void Sampler::save(const std::filesystem::path& path) const {
  std::vector<Json> rows;
  rows.reserve(records_.size());
  for (const auto& r : records_) {
    Json j;
    j["id"] = r.id;
    j["P"] = r.rate;
    j["dirty_hits"] = r.dirty_hits;
    j["last_difficulty"] = std::string(to_string(r.last_difficulty));
    rows.push_back(std::move(j));
  }
  write_jsonl(path, rows);
}

Sampler Sampler::load(const std::filesystem::path& path, SamplerConfig cfg) {
  Sampler s;
  s.cfg_ = cfg;
  s.cfg_.validate();
  for_each_jsonl(path, [&](const Json& j, std::size_t) {
    SampleRecord r;
    r.id = j.at("id").get<std::uint64_t>();
    r.rate = j.at("P").get<double>();
    r.dirty_hits = j.at("dirty_hits").get<std::uint64_t>();
    r.last_difficulty = parse_difficulty(j.at("last_difficulty").get<std::string>());
    if (!(r.rate >= cfg.rate_min && r.rate <= cfg.rate_max)) {
      throw std::invalid_argument(fmt::format("rate {} outside [{}, {}]", r.rate,
                                              cfg.rate_min, cfg.rate_max));
    }
    if (!s.index_.emplace(r.id, s.records_.size()).second) {
      throw std::invalid_argument(fmt::format("duplicate sample id {}", r.id));
    }
    s.records_.push_back(r);
  });
  return s;
}

}  // namespace taco
