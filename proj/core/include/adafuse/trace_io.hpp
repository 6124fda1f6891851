#pragma once

// JSON forms of decode traces and decode configurations. Wall time is
// omitted from traces by default so that serialized traces of identical runs
// are byte-identical.

#include <string>
#include <string_view>

#include "adafuse/engine.hpp"

namespace adafuse {

std::string trace_to_json(const DecodeTrace& trace, bool include_wall_time = false,
                          int indent = -1);

// Inverse of trace_to_json. Throws FormatError on schema violations.
DecodeTrace trace_from_json(std::string_view json);

// Keys mirror DecodeConfig field names; enums are written by name.
std::string config_to_json(const DecodeConfig& config, int indent = -1);

// Overlays the keys present in a JSON object onto `config`. Unknown keys and
// ill-typed values throw FormatError.
void apply_config_json(std::string_view json_object, DecodeConfig& config);

}  // namespace adafuse
