#pragma once

#include "gridzoom/image.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace gridzoom {

// Axis-aligned sub-rectangle of the source image, half-open on both axes.
// `path` records the child index (0..8, row-major) taken at each split from
// the full image; depth == path.size(). The full image is depth 0.
struct Region {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;
    int depth = 0;
    std::vector<std::uint8_t> path;

    [[nodiscard]] int width() const noexcept { return x1 - x0; }
    [[nodiscard]] int height() const noexcept { return y1 - y0; }
    [[nodiscard]] int max_side() const noexcept { return width() > height() ? width() : height(); }
    [[nodiscard]] long long area() const noexcept {
        return static_cast<long long>(width()) * height();
    }

    bool operator==(const Region&) const = default;
};

[[nodiscard]] Region full_region(int image_width, int image_height);

// Split boundaries along one axis: {0, floor(s/3), floor(2s/3), s}.
[[nodiscard]] std::array<int, 4> third_offsets(int side);

// Nine children in row-major order; disjoint and covering the parent exactly.
// Throws indivisible_region when either side is below 3 px.
[[nodiscard]] std::array<Region, 9> split3x3(const Region& region);

// Reconstructs a region by replaying the path's splits from the full image.
[[nodiscard]] Region region_from_path(int image_width, int image_height,
                                      std::span<const std::uint8_t> path);

// Boundaries of the recursive thirds subdivision of a region; xs/ys hold
// 3^levels + 1 entries and agree with the region tree's split boundaries.
struct FineGrid {
    std::vector<int> xs;
    std::vector<int> ys;
};
[[nodiscard]] FineGrid fine_grid(const Region& anchor, int levels);

enum class Backbone { onevision, other };

// Minimum search unit (leaf cell size) chosen from the backbone family and
// the source resolution.
[[nodiscard]] int min_search_unit(Backbone backbone, int width, int height);

// One fixed-size scoring cell. The square may overhang the parent region on
// the right/bottom edge; overhang pixels in `content` carry neutral gray.
struct Tile {
    Region parent;
    int row = 0;
    int col = 0;
    int x0 = 0; // square bounds in image coordinates
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;
    Image content; // unit x unit

    // Portion of the square actually backed by parent pixels.
    [[nodiscard]] int content_x1() const noexcept { return x1 < parent.x1 ? x1 : parent.x1; }
    [[nodiscard]] int content_y1() const noexcept { return y1 < parent.y1 ? y1 : parent.y1; }
};

[[nodiscard]] int tile_rows(const Region& region, int unit);
[[nodiscard]] int tile_cols(const Region& region, int unit);

// ceil(h/unit) x ceil(w/unit) lattice in row-major order.
[[nodiscard]] std::vector<Tile> tile_region(const Region& region, const Image& image, int unit);

} // namespace gridzoom
