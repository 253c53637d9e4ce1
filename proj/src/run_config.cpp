#include "taco/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <fmt/format.h>

#include "taco/records.hpp"

namespace taco {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument(fmt::format("{}: invalid value '{}'", key, v));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument(fmt::format("{}: expected on/off, got '{}'", key, v));
}

std::string fmt_double(double v) { return fmt::format("{}", v); }
std::string fmt_bool(bool v) { return v ? "on" : "off"; }

struct Field {
  std::string_view key;
  std::function<void(TrainConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field number_field(std::string_view key, T TrainConfig::*member) {
  return {key, [member](TrainConfig& c, std::string_view k, std::string_view v) { c.*member = parse_number<T>(k, v); },
          [member](const TrainConfig& c) { return fmt::format("{}", c.*member); }};
}

Field bool_field(std::string_view key, bool TrainConfig::*member) {
  return {key, [member](TrainConfig& c, std::string_view k, std::string_view v) { c.*member = parse_bool(k, v); },
          [member](const TrainConfig& c) { return fmt_bool(c.*member); }};
}

template <typename Sub>
Field sub_field(std::string_view key, Sub TrainConfig::*sub, double Sub::*member) {
  return {key,
          [sub, member](TrainConfig& c, std::string_view k, std::string_view v) {
            (c.*sub).*member = parse_number<double>(k, v);
          },
          [sub, member](const TrainConfig& c) { return fmt_double((c.*sub).*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      number_field("steps", &TrainConfig::steps),
      number_field("batch_size", &TrainConfig::batch_size),
      number_field("group_size", &TrainConfig::group_size),
      number_field("learning_rate", &TrainConfig::learning_rate),
      number_field("seed", &TrainConfig::seed),
      number_field("data_seed", &TrainConfig::data_seed),
      number_field("train_pool", &TrainConfig::train_pool),
      number_field("eval_count", &TrainConfig::eval_count),
      number_field("eval_every", &TrainConfig::eval_every),
      number_field("train_scale", &TrainConfig::train_scale),
      number_field("eval_scale", &TrainConfig::eval_scale),
      number_field("tau", &TrainConfig::tau),
      sub_field("eps_clip", &TrainConfig::grpo, &GrpoConfig::eps_clip),
      sub_field("beta_kl", &TrainConfig::grpo, &GrpoConfig::beta_kl),
      sub_field("adv_epsilon", &TrainConfig::grpo, &GrpoConfig::adv_epsilon),
      sub_field("kappa", &TrainConfig::sampler, &SamplerConfig::kappa),
      sub_field("gamma", &TrainConfig::sampler, &SamplerConfig::gamma),
      sub_field("theta_high", &TrainConfig::sampler, &SamplerConfig::theta_high),
      sub_field("theta_low", &TrainConfig::sampler, &SamplerConfig::theta_low),
      sub_field("alpha_easy", &TrainConfig::sampler, &SamplerConfig::alpha_easy),
      sub_field("alpha_hard", &TrainConfig::sampler, &SamplerConfig::alpha_hard),
      sub_field("alpha_moderate", &TrainConfig::sampler, &SamplerConfig::alpha_moderate),
      sub_field("rate_min", &TrainConfig::sampler, &SamplerConfig::rate_min),
      sub_field("rate_max", &TrainConfig::sampler, &SamplerConfig::rate_max),
      bool_field("curation", &TrainConfig::curation),
      number_field("curation_threshold", &TrainConfig::curation_threshold),
      number_field("curation_ratio", &TrainConfig::curation_ratio),
      bool_field("tac", &TrainConfig::tac),
      bool_field("rrs", &TrainConfig::rrs),
      bool_field("ads", &TrainConfig::ads),
      {"scales",
       [](TrainConfig& c, std::string_view, std::string_view v) { c.scales = ScaleSet::parse(v); },
       [](const TrainConfig& c) { return c.scales.to_string(); }},
  };
  return kFields;
}

}  // namespace

void apply_setting(TrainConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(cfg, key, trim(value));
      return;
    }
  }
  throw std::invalid_argument(fmt::format("unknown config key '{}'", key));
}

TrainConfig parse_run_config(std::string_view text, TrainConfig base) {
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(fmt::format("line {}: expected 'key = value'", lineno));
    }
    try {
      apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  return base;
}

TrainConfig load_run_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError(path, 0, "cannot open for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str(), std::move(base));
  } catch (const std::invalid_argument& e) {
    throw DataError(path, 0, e.what());
  }
}

std::string format_run_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += fmt::format("{} = {}\n", f.key, f.get(cfg));
  return out;
}

std::vector<std::string> run_config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

}  // namespace taco
