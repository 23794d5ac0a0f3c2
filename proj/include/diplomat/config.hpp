#pragma once
// Run configuration: one JSON file with a section per module. Every field is
// optional and falls back to the compiled default; unknown keys are rejected
// so typos surface instead of silently reverting to defaults.

#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "diplomat/evaluation.hpp"
#include "diplomat/training.hpp"

namespace diplomat::config {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RunConfig {
  training::TrainOptions train;
  evaluation::EvalOptions eval;  // env_cfg mirrors train.env_cfg after parsing
};

// Throws ConfigError naming the offending field (dotted path) on any type
// mismatch, out-of-range value, or unknown key.
RunConfig parse_run_config(const nlohmann::json& j);

// Adds file/line diagnostics from the JSON parser to ConfigError.
RunConfig load_run_config(const std::string& path);

}  // namespace diplomat::config
