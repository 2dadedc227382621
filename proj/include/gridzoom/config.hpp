#pragma once

#include "gridzoom/backends.hpp"
#include "gridzoom/grid.hpp"
#include "gridzoom/search.hpp"

#include <string>

namespace gridzoom {

// Everything a run needs, loadable from one JSON file. Unknown keys are
// rejected so typos surface immediately.
struct EngineConfig {
    SearchConfig search;
    OracleParams oracle;
    RemoteOptions relevance_remote;
    RemoteOptions evidence_remote;
    Backbone backbone = Backbone::other;
    bool auto_min_unit = false; // derive min_unit from the backbone rule per image
};

[[nodiscard]] EngineConfig config_from_json_text(const std::string& text);
[[nodiscard]] EngineConfig load_config(const std::string& path);

// GRIDZOOM_RELEVANCE_URL / GRIDZOOM_EVIDENCE_URL override the file values.
void apply_env_overrides(EngineConfig& config);

[[nodiscard]] int resolved_min_unit(const EngineConfig& config, int image_width,
                                    int image_height);

} // namespace gridzoom
