#ifndef TACO_SAMPLER_HPP_
#define TACO_SAMPLER_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "taco/rng.hpp"

namespace taco {

enum class Difficulty { kUnknown, kEasy, kModerate, kHard };

std::string_view to_string(Difficulty d);
Difficulty parse_difficulty(std::string_view s);

struct SampleRecord {
  std::uint64_t id = 0;
  double rate = 1.0;
  std::uint64_t dirty_hits = 0;
  Difficulty last_difficulty = Difficulty::kUnknown;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct SamplerConfig {
  double kappa = 0.5;           // KL threshold for dirty samples
  double gamma = 0.8;           // rollback down-weighting
  double theta_high = 0.5;      // above: easy
  double theta_low = 0.2;       // below: hard
  double alpha_easy = 0.1;
  double alpha_hard = 0.8;
  double alpha_moderate = 1.5;
  double rate_min = 1e-3;
  double rate_max = 8.0;

  void validate() const;
};

enum class GradDirective { kAllow, kMask };

// True iff kl > kappa. Throws std::invalid_argument for negative kl.
bool classify_dirty(double kl, const SamplerConfig& cfg);

// rate <- clamp(gamma * rate); dirty_hits + 1.
SampleRecord apply_rollback(SampleRecord rec, const SamplerConfig& cfg);

// easy above theta_high, hard below theta_low, moderate on [low, high].
Difficulty classify_difficulty(double r_acc, const SamplerConfig& cfg);

struct DifficultyUpdate {
  SampleRecord record;
  GradDirective directive = GradDirective::kAllow;
};

// rate <- clamp(alpha_class * rate). Hard samples are gradient-masked.
DifficultyUpdate apply_difficulty(SampleRecord rec, Difficulty cls,
                                  const SamplerConfig& cfg);

// Weighted draw without replacement inside one batch (weights = rates);
// records stay in the pool for later batches.
std::vector<std::uint64_t> draw_batch(Rng& rng,
                                      std::span<const SampleRecord> records,
                                      std::size_t batch_size);

struct CurationResult {
  std::vector<std::uint64_t> ids;  // shuffled
  std::size_t difficult = 0;
  std::size_t simple_total = 0;
  std::size_t simple_selected = 0;
  bool degenerate = false;  // no difficult samples; nothing curated
};

// Keeps every sample with r_acc < difficult_threshold plus a uniform draw of
// ratio * |difficult| simple samples.
CurationResult curate(const std::map<std::uint64_t, double>& base_results,
                      double difficult_threshold, double ratio, Rng& rng);

// Owns the per-sample sampling state for one run.
class Sampler {
 public:
  Sampler() = default;
  Sampler(std::span<const std::uint64_t> ids, SamplerConfig cfg);

  const SamplerConfig& config() const { return cfg_; }
  std::span<const SampleRecord> records() const { return records_; }
  const SampleRecord& record(std::uint64_t id) const;

  std::vector<std::uint64_t> draw(Rng& rng, std::size_t batch_size) const {
    return draw_batch(rng, records_, batch_size);
  }

  // Marks a dirty sample; returns the updated record.
  const SampleRecord& rollback(std::uint64_t id);
  GradDirective update_difficulty(std::uint64_t id, Difficulty cls);

  // Shannon entropy (nats) of the normalized rate distribution.
  double entropy() const;

  // One JSON object per line: {"id", "P", "dirty_hits", "last_difficulty"}.
  void save(const std::filesystem::path& path) const;
  static Sampler load(const std::filesystem::path& path, SamplerConfig cfg);

 private:
  SampleRecord& mutable_record(std::uint64_t id);

  SamplerConfig cfg_;
  std::vector<SampleRecord> records_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

}  // namespace taco

#endif  // TACO_SAMPLER_HPP_
