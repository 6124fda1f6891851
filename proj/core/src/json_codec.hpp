#pragma once

#include <json.hpp>

#include "adafuse/engine.hpp"

namespace adafuse::detail {

nlohmann::json trace_json(const DecodeTrace& trace, bool include_wall_time);
DecodeTrace trace_value(const nlohmann::json& j);

nlohmann::json config_json(const DecodeConfig& config);
// Overlays the keys present in `j` onto `config`; unknown keys throw FormatError.
void apply_config_json(const nlohmann::json& j, DecodeConfig& config);

}  // namespace adafuse::detail
