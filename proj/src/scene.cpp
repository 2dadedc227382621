#include "gridzoom/scene.hpp"

#include "gridzoom/error.hpp"
#include "gridzoom/grid.hpp"
#include "gridzoom/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace gridzoom {

using nlohmann::json;

namespace {

constexpr std::array<Rgb, 6> kTargetPalette{{{220, 40, 40},
                                             {240, 200, 40},
                                             {40, 170, 230},
                                             {225, 60, 200},
                                             {60, 220, 90},
                                             {250, 130, 30}}};

void paint_background(Image& image, std::uint64_t seed) {
    for (int y = 0; y < image.height(); ++y) {
        std::uint8_t* row = image.row(y);
        std::uint64_t row_state = hash_combine(seed, static_cast<std::uint64_t>(y));
        for (int x = 0; x < image.width(); ++x) {
            const std::uint64_t h = splitmix64(row_state);
            const std::uint8_t v = static_cast<std::uint8_t>(92 + (h & 31));
            row[0] = v;
            row[1] = static_cast<std::uint8_t>(v + ((h >> 5) & 7));
            row[2] = static_cast<std::uint8_t>(v - ((h >> 8) & 7));
            row += 3;
        }
    }
}

// Deepest grid that still fits a target per cell, stopping once every cell
// is within the leaf size (where the search is guaranteed to commit).
int placement_depth(int side, int min_unit, int min_inner) {
    const Region full = full_region(side, side);
    int chosen = 1;
    for (int depth = 1; depth <= 8; ++depth) {
        const FineGrid grid = fine_grid(full, depth);
        int max_seg = 0;
        int min_seg = side;
        for (std::size_t i = 0; i + 1 < grid.xs.size(); ++i) {
            max_seg = std::max(max_seg, grid.xs[i + 1] - grid.xs[i]);
            min_seg = std::min(min_seg, grid.xs[i + 1] - grid.xs[i]);
        }
        if (min_seg < min_inner) break;
        chosen = depth;
        if (max_seg <= min_unit) break;
    }
    return chosen;
}

} // namespace

SyntheticScene generate_scene(const SceneOptions& options) {
    if (options.side < 243) {
        fail(ErrorCode::bad_argument, "scene side must be at least 243 px");
    }
    if (options.targets < 1) {
        fail(ErrorCode::bad_argument, "scene needs at least one target");
    }
    if (options.min_short_side < 1 || options.max_short_side < options.min_short_side) {
        fail(ErrorCode::bad_argument, "bad target size range");
    }
    if (options.distinct_roots && options.targets > 9) {
        fail(ErrorCode::placement_failure, "at most 9 targets fit distinct coarse cells");
    }
    if (!options.forced_roots.empty() &&
        options.forced_roots.size() != static_cast<std::size_t>(options.targets)) {
        fail(ErrorCode::bad_argument, "forced_roots must list one cell per target");
    }

    SyntheticScene scene;
    scene.seed = options.seed;
    scene.image = Image(options.side, options.side);
    paint_background(scene.image, hash_combine(options.seed, 0xbac5ull));

    Rng rng(hash_combine(options.seed, 0x7a26e7ull));

    const int min_inner = options.min_short_side + 2 * options.margin;
    const int depth = placement_depth(options.side, options.min_unit, min_inner);
    const Region full = full_region(options.side, options.side);
    const FineGrid grid = fine_grid(full, depth);
    const int cells = static_cast<int>(grid.xs.size()) - 1;
    const int cells_per_root = cells / 3;

    std::array<int, 9> root_order{};
    std::iota(root_order.begin(), root_order.end(), 0);
    if (options.distinct_roots) {
        for (int i = 8; i > 0; --i) {
            std::swap(root_order[static_cast<std::size_t>(i)],
                      root_order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
        }
    }

    std::vector<std::pair<int, int>> used_cells;
    for (int t = 0; t < options.targets; ++t) {
        int forced = -1;
        if (!options.forced_roots.empty()) {
            forced = options.forced_roots[static_cast<std::size_t>(t)];
        } else if (options.distinct_roots) {
            forced = root_order[static_cast<std::size_t>(t)];
        }

        bool placed = false;
        for (int attempt = 0; attempt < options.max_attempts && !placed; ++attempt) {
            int row, col;
            if (forced >= 0) {
                const int ri = forced / 3;
                const int ci = forced % 3;
                row = ri * cells_per_root + rng.uniform_int(0, cells_per_root - 1);
                col = ci * cells_per_root + rng.uniform_int(0, cells_per_root - 1);
            } else {
                row = rng.uniform_int(0, cells - 1);
                col = rng.uniform_int(0, cells - 1);
            }
            if (std::find(used_cells.begin(), used_cells.end(), std::make_pair(row, col)) !=
                used_cells.end()) {
                continue;
            }
            const int cx0 = grid.xs[static_cast<std::size_t>(col)] + options.margin;
            const int cx1 = grid.xs[static_cast<std::size_t>(col) + 1] - options.margin;
            const int cy0 = grid.ys[static_cast<std::size_t>(row)] + options.margin;
            const int cy1 = grid.ys[static_cast<std::size_t>(row) + 1] - options.margin;
            const int inner_w = cx1 - cx0;
            const int inner_h = cy1 - cy0;
            if (inner_w < options.min_short_side || inner_h < options.min_short_side) {
                continue;
            }

            const int short_cap = std::min({options.max_short_side, inner_w, inner_h});
            const int short_side = rng.uniform_int(options.min_short_side, short_cap);
            const int long_cap = std::max(inner_w, inner_h);
            const double aspect =
                rng.uniform(1.0, std::min(options.max_aspect,
                                          static_cast<double>(long_cap) / short_side));
            int long_side = std::min(long_cap, static_cast<int>(short_side * aspect));
            long_side = std::max(long_side, short_side);

            int w = short_side, h = long_side;
            if (rng.next() & 1) std::swap(w, h);
            if (w > inner_w || h > inner_h) {
                w = std::min(w, inner_w);
                h = std::min(h, inner_h);
            }

            const int x0 = cx0 + rng.uniform_int(0, inner_w - w);
            const int y0 = cy0 + rng.uniform_int(0, inner_h - h);

            PlantedTarget target;
            target.x0 = x0;
            target.y0 = y0;
            target.x1 = x0 + w;
            target.y1 = y0 + h;
            target.label = "target-" + std::to_string(t);
            target.color = kTargetPalette[static_cast<std::size_t>(t) % kTargetPalette.size()];

            bool overlaps = false;
            for (const PlantedTarget& other : scene.targets) {
                if (rect_overlap(target.x0, target.y0, target.x1, target.y1, other.x0,
                                 other.y0, other.x1, other.y1) > 0) {
                    overlaps = true;
                    break;
                }
            }
            if (overlaps) continue;

            scene.image.fill_rect(target.x0, target.y0, target.x1, target.y1, target.color);
            scene.targets.push_back(std::move(target));
            used_cells.emplace_back(row, col);
            placed = true;
        }
        if (!placed) {
            fail(ErrorCode::placement_failure,
                 "could not place target " + std::to_string(t) + " after " +
                     std::to_string(options.max_attempts) + " attempts");
        }
    }
    return scene;
}

std::string scene_question(const SyntheticScene& scene) {
    std::string q = "locate";
    for (std::size_t i = 0; i < scene.targets.size(); ++i) {
        q += i == 0 ? " " : " and ";
        q += scene.targets[i].label;
    }
    return q;
}

std::string manifest_to_json(const SyntheticScene& scene) {
    json doc;
    doc["version"] = 1;
    doc["seed"] = scene.seed;
    doc["image"] = json{{"width", scene.image.width()}, {"height", scene.image.height()}};
    json targets = json::array();
    for (const PlantedTarget& t : scene.targets) {
        targets.push_back(json{{"bbox", json::array({t.x0, t.y0, t.x1, t.y1})},
                               {"label", t.label},
                               {"color", json::array({t.color.r, t.color.g, t.color.b})}});
    }
    doc["targets"] = std::move(targets);
    return doc.dump(2);
}

std::vector<PlantedTarget> targets_from_manifest(const std::string& text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.contains("targets") || !doc["targets"].is_array()) {
        fail(ErrorCode::bad_argument, "malformed target manifest");
    }
    std::vector<PlantedTarget> targets;
    for (const json& t : doc["targets"]) {
        PlantedTarget target;
        const json& bbox = t.at("bbox");
        target.x0 = bbox.at(0).get<int>();
        target.y0 = bbox.at(1).get<int>();
        target.x1 = bbox.at(2).get<int>();
        target.y1 = bbox.at(3).get<int>();
        target.label = t.at("label").get<std::string>();
        if (t.contains("color")) {
            target.color = Rgb{t["color"].at(0).get<std::uint8_t>(),
                               t["color"].at(1).get<std::uint8_t>(),
                               t["color"].at(2).get<std::uint8_t>()};
        }
        if (target.x1 <= target.x0 || target.y1 <= target.y0) {
            fail(ErrorCode::bad_argument, "manifest target has an empty bbox");
        }
        targets.push_back(std::move(target));
    }
    if (targets.empty()) {
        fail(ErrorCode::bad_argument, "manifest lists no targets");
    }
    return targets;
}

} // namespace gridzoom
