#pragma once

#include "gridzoom/backends.hpp"
#include "gridzoom/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gridzoom {

struct SceneOptions {
    std::uint64_t seed = 0;
    int side = 4096;
    int targets = 1;
    int min_short_side = 8;
    int max_short_side = 64;
    double max_aspect = 2.0;
    // Leaf granularity the search will use; each target is placed wholly
    // inside one leaf-depth grid cell so that the committed cell can cover it.
    int min_unit = 224;
    bool distinct_roots = false;      // scatter targets over distinct coarse cells
    std::vector<int> forced_roots;    // optional per-target coarse cell (0..8), -1 = free
    int margin = 2;                   // gap kept between a target and its cell border
    int max_attempts = 64;
};

struct SyntheticScene {
    Image image;
    std::vector<PlantedTarget> targets;
    std::uint64_t seed = 0;
};

// Deterministic per options; throws placement_failure when a target cannot
// be placed within the attempt budget.
[[nodiscard]] SyntheticScene generate_scene(const SceneOptions& options);

// Question naming every planted target, understood by the oracle backends.
[[nodiscard]] std::string scene_question(const SyntheticScene& scene);

[[nodiscard]] std::string manifest_to_json(const SyntheticScene& scene);
[[nodiscard]] std::vector<PlantedTarget> targets_from_manifest(const std::string& text);

} // namespace gridzoom
