#ifndef TACO_RUN_CONFIG_HPP_
#define TACO_RUN_CONFIG_HPP_

// Flat `key = value` run configuration. Every TrainConfig field has a key;
// unknown keys are rejected. '#' starts a comment.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "taco/trainer.hpp"

namespace taco {

// Throws std::invalid_argument for unknown keys or unparsable values.
void apply_setting(TrainConfig& cfg, std::string_view key, std::string_view value);

// Applies every line of `text` on top of `base`. Errors name the line.
TrainConfig parse_run_config(std::string_view text, TrainConfig base = {});
TrainConfig load_run_config(const std::filesystem::path& path, TrainConfig base = {});

// Every key with its effective value, one per line, in a fixed order. Feeding
// the output back through parse_run_config reproduces `cfg`.
std::string format_run_config(const TrainConfig& cfg);

std::vector<std::string> run_config_keys();

}  // namespace taco

#endif  // TACO_RUN_CONFIG_HPP_
