#include "gridzoom/grid.hpp"

#include "gridzoom/error.hpp"

#include <algorithm>
#include <string>

namespace gridzoom {

Region full_region(int image_width, int image_height) {
    if (image_width < 1 || image_height < 1) {
        fail(ErrorCode::bad_image, "image must be at least 1x1");
    }
    return Region{0, 0, image_width, image_height, 0, {}};
}

std::array<int, 4> third_offsets(int side) {
    return {0, side / 3, 2 * side / 3, side};
}

std::array<Region, 9> split3x3(const Region& region) {
    if (region.width() < 3 || region.height() < 3) {
        fail(ErrorCode::indivisible_region,
             "region " + std::to_string(region.width()) + "x" + std::to_string(region.height()) +
                 " cannot be split 3x3");
    }
    const std::array<int, 4> xo = third_offsets(region.width());
    const std::array<int, 4> yo = third_offsets(region.height());
    std::array<Region, 9> children;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            Region& child = children[static_cast<std::size_t>(r) * 3 + c];
            child.x0 = region.x0 + xo[c];
            child.x1 = region.x0 + xo[c + 1];
            child.y0 = region.y0 + yo[r];
            child.y1 = region.y0 + yo[r + 1];
            child.depth = region.depth + 1;
            child.path = region.path;
            child.path.push_back(static_cast<std::uint8_t>(r * 3 + c));
        }
    }
    return children;
}

Region region_from_path(int image_width, int image_height, std::span<const std::uint8_t> path) {
    Region region = full_region(image_width, image_height);
    for (std::uint8_t step : path) {
        if (step > 8) {
            fail(ErrorCode::bad_argument, "path step out of range 0..8");
        }
        const int r = step / 3;
        const int c = step % 3;
        const std::array<int, 4> xo = third_offsets(region.width());
        const std::array<int, 4> yo = third_offsets(region.height());
        region.x1 = region.x0 + xo[c + 1];
        region.x0 += xo[c];
        region.y1 = region.y0 + yo[r + 1];
        region.y0 += yo[r];
        region.depth += 1;
        region.path.push_back(step);
    }
    return region;
}

FineGrid fine_grid(const Region& anchor, int levels) {
    FineGrid grid;
    grid.xs = {anchor.x0, anchor.x1};
    grid.ys = {anchor.y0, anchor.y1};
    auto refine = [](std::vector<int>& bounds) {
        std::vector<int> next;
        next.reserve((bounds.size() - 1) * 3 + 1);
        for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
            const int lo = bounds[i];
            const std::array<int, 4> offs = third_offsets(bounds[i + 1] - lo);
            next.push_back(lo);
            next.push_back(lo + offs[1]);
            next.push_back(lo + offs[2]);
        }
        next.push_back(bounds.back());
        bounds = std::move(next);
    };
    for (int level = 0; level < levels; ++level) {
        refine(grid.xs);
        refine(grid.ys);
    }
    return grid;
}

int min_search_unit(Backbone backbone, int width, int height) {
    if (width < 1 || height < 1) {
        fail(ErrorCode::bad_argument, "dimensions must be positive");
    }
    const int long_side = std::max(width, height);
    if (backbone == Backbone::onevision) {
        return long_side >= 4000 ? 448 : 112;
    }
    return long_side > 5096 ? 336 : 224;
}

int tile_rows(const Region& region, int unit) {
    return (region.height() + unit - 1) / unit;
}

int tile_cols(const Region& region, int unit) {
    return (region.width() + unit - 1) / unit;
}

std::vector<Tile> tile_region(const Region& region, const Image& image, int unit) {
    if (unit < 1) {
        fail(ErrorCode::bad_argument, "tile unit must be positive");
    }
    if (region.x0 < 0 || region.y0 < 0 || region.x1 > image.width() ||
        region.y1 > image.height() || region.width() < 1 || region.height() < 1) {
        fail(ErrorCode::bad_argument, "region out of image bounds");
    }
    const int rows = tile_rows(region, unit);
    const int cols = tile_cols(region, unit);
    std::vector<Tile> tiles;
    tiles.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            Tile tile;
            tile.parent = region;
            tile.row = r;
            tile.col = c;
            tile.x0 = region.x0 + c * unit;
            tile.y0 = region.y0 + r * unit;
            tile.x1 = tile.x0 + unit;
            tile.y1 = tile.y0 + unit;
            tile.content = Image(unit, unit, kNeutralGray);
            const int cx1 = tile.content_x1();
            const int cy1 = tile.content_y1();
            tile.content.paste(image.crop(tile.x0, tile.y0, cx1, cy1), 0, 0);
            tiles.push_back(std::move(tile));
        }
    }
    return tiles;
}

} // namespace gridzoom
