#pragma once

// YAML scenario configuration. Every key is optional; missing keys keep the
// defaults of ScenarioConfig. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>

#include "qukf/simulation.hpp"

namespace qukf {

/// Throws Error(kParseError) with line and field on malformed input, and
/// Error(kValidationError) listing every violated invariant.
ScenarioConfig parse_config_string(const std::string& text);
/// As parse_config_string; Error(kIoError) if the file cannot be read. The
/// literal path "default" selects the built-in defaults.
ScenarioConfig parse_config(const std::filesystem::path& path);

/// Emits every field so the result reparses to an equal config.
std::string serialize_config(const ScenarioConfig& config);

/// FNV-1a 64 of serialize_config(), as 16 hex digits.
std::string config_digest(const ScenarioConfig& config);

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b);

}  // namespace qukf
