// json_io.hpp -- strict JSON (de)serialization of run configurations.
// Parsing rejects unknown fields and wrong types with messages naming the
// offending field's full path.

#pragma once

#include <string>

#include "wqed/experiments.hpp"

namespace wqed::jio {

// Parses a complete run configuration from JSON text.  Throws config_error
// on schema violations (unknown field, missing field, wrong type, malformed
// JSON), naming the field where possible.
exp::RunConfig parse_run_config(const std::string& text);

// Reads a file and parses it; throws io_error when the file cannot be read.
exp::RunConfig load_run_config(const std::string& path);

// Serializes the fully resolved configuration (all defaults filled in) plus
// the version string -- the manifest.json payload.
std::string manifest_json(const exp::RunConfig& cfg);

}  // namespace wqed::jio
