#pragma once

#include <iosfwd>
#include <string>

#include "dmn/training.hpp"

namespace dmn {

// Reads a JSON object whose keys mirror TrainConfig fields. Absent keys keep
// their defaults; unknown keys raise ConfigError so a typo never silently
// trains with a default value.
TrainConfig load_train_config(const std::string& path);

// Entry point behind the dmn binary, separated from main() so tests can call
// it in-process. Returns the process exit code: 0 on success, 1 when loading
// or validation fails, 2 on usage errors (unknown flags, missing required
// flags, malformed values).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace dmn
