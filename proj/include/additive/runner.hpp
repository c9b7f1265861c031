#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"

namespace additive {

// Exit codes shared by run_preset and the CLI.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitAcceptance = 4;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parse + schema-check + fill preset defaults. Unknown keys anywhere in the
// tree are rejected; missing required keys (custom preset) are reported
// together. The result echoes every resolved value.
nlohmann::json validate_config(const nlohmann::json& input);
nlohmann::json validate_config_file(const std::string& path);

// Executes the preset pipeline: writes resolved_config.json before any
// computation, then traces/reports and summary.json under out_dir. Returns an
// exit code; failures against the preset's documented thresholds give
// kExitAcceptance, numeric failures kExitNumeric.
int run_preset(const nlohmann::json& resolved);

}  // namespace additive
