#pragma once

#include "dualline/pipeline.hpp"

#include <string>

namespace dualline {

// Line-oriented `key = value` files with `#` comments. Unknown keys,
// malformed lines, and type mismatches are rejected with line numbers;
// missing keys fall back to the PipelineConfig defaults.
PipelineConfig parse_config_text(const std::string& text);
PipelineConfig parse_config_file(const std::string& path);

// Serializes every key in a fixed order; parse(emit(cfg)) == cfg.
std::string emit_config(const PipelineConfig& cfg);

bool config_equals(const PipelineConfig& a, const PipelineConfig& b);

}  // namespace dualline
