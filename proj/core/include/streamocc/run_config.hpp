#pragma once

#include "streamocc/pipeline.hpp"

#include <string>

namespace streamocc {

/// Run configuration parsed from JSON (see docs/formats.md). Every field has
/// a default; `has_grid` records whether the file pinned the grid or the run
/// should inherit the scene's.
struct RunConfig {
    PipelineConfig pipeline;
    bool has_grid = false;
};

RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text, const std::string& origin);

} // namespace streamocc
