#include "gridzoom/reassembly.hpp"

#include "gridzoom/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>

namespace gridzoom {

using nlohmann::json;

const char* to_string(Strategy strategy) {
    switch (strategy) {
    case Strategy::global_relative: return "global_relative";
    case Strategy::relative_only: return "relative_only";
    case Strategy::sequential: return "sequential";
    }
    return "unknown";
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "global" || name == "global_relative") return Strategy::global_relative;
    if (name == "relative" || name == "relative_only") return Strategy::relative_only;
    if (name == "sequential") return Strategy::sequential;
    fail(ErrorCode::bad_argument, "unknown reassembly strategy: " + name);
}

bool OccupancyMask::any() const {
    return std::any_of(cells.begin(), cells.end(), [](std::uint8_t c) { return c != 0; });
}

std::array<std::vector<Region>, 9> assign_coarse(std::span<const Region> patches) {
    std::array<std::vector<Region>, 9> cells;
    for (const Region& patch : patches) {
        if (patch.depth < 1 || patch.path.empty()) {
            fail(ErrorCode::bad_argument, "selected patches must have depth >= 1");
        }
        cells[patch.path.front()].push_back(patch);
    }
    return cells;
}

namespace {

int pow3(int exponent) {
    int value = 1;
    for (int i = 0; i < exponent; ++i) value *= 3;
    return value;
}

// Marks the block a patch covers on a grid with `levels` subdivision levels,
// reading the patch path from `first_digit` on.
void mark_patch(OccupancyMask& mask, const Region& patch, int first_digit) {
    const int digits = patch.depth - first_digit;
    if (digits > mask.levels) {
        fail(ErrorCode::bad_argument, "patch deeper than the occupancy grid");
    }
    int row = 0;
    int col = 0;
    for (int i = 0; i < digits; ++i) {
        const int step = patch.path[static_cast<std::size_t>(first_digit + i)];
        row = row * 3 + step / 3;
        col = col * 3 + step % 3;
    }
    const int block = pow3(mask.levels - digits);
    row *= block;
    col *= block;
    for (int r = row; r < row + block; ++r) {
        for (int c = col; c < col + block; ++c) {
            mask.cells[static_cast<std::size_t>(r) * mask.side + c] = 1;
        }
    }
}

OccupancyMask make_mask(const Region& anchor, int coarse_index, int levels,
                        std::span<const Region> patches, int first_digit) {
    OccupancyMask mask;
    mask.anchor = anchor;
    mask.coarse_index = coarse_index;
    mask.levels = levels;
    mask.side = pow3(levels);
    mask.cells.assign(static_cast<std::size_t>(mask.side) * mask.side, 0);
    for (const Region& patch : patches) {
        mark_patch(mask, patch, first_digit);
    }
    return mask;
}

} // namespace

OccupancyMask build_mask(std::span<const Region> patches, const Region& coarse,
                         int coarse_index) {
    if (patches.empty()) {
        fail(ErrorCode::bad_argument, "build_mask needs at least one patch");
    }
    int max_depth = 1;
    for (const Region& patch : patches) {
        if (patch.path.empty() || patch.path.front() != coarse_index) {
            fail(ErrorCode::bad_argument, "patch does not belong to this coarse cell");
        }
        max_depth = std::max(max_depth, patch.depth);
    }
    return make_mask(coarse, coarse_index, max_depth - 1, patches, 1);
}

std::optional<MaskCompression> compress_mask(const OccupancyMask& mask) {
    MaskCompression out;
    for (int r = 0; r < mask.side; ++r) {
        for (int c = 0; c < mask.side; ++c) {
            if (mask.at(r, c)) {
                out.rows.push_back(r);
                break;
            }
        }
    }
    for (int c = 0; c < mask.side; ++c) {
        for (int r = 0; r < mask.side; ++r) {
            if (mask.at(r, c)) {
                out.cols.push_back(c);
                break;
            }
        }
    }
    if (out.rows.empty() || out.cols.empty()) {
        return std::nullopt;
    }
    out.compact.reserve(out.rows.size() * out.cols.size());
    for (int r : out.rows) {
        for (int c : out.cols) {
            out.compact.push_back(mask.at(r, c) ? 1 : 0);
        }
    }
    return out;
}

CoarseBlock crop_block(const Image& image, const OccupancyMask& mask,
                       const MaskCompression& compression, bool gaps_show_source) {
    const FineGrid grid = fine_grid(mask.anchor, mask.levels);

    CoarseBlock block;
    block.compression = compression;
    for (int r : compression.rows) {
        block.row_extents.emplace_back(grid.ys[static_cast<std::size_t>(r)],
                                       grid.ys[static_cast<std::size_t>(r) + 1]);
    }
    for (int c : compression.cols) {
        block.col_extents.emplace_back(grid.xs[static_cast<std::size_t>(c)],
                                       grid.xs[static_cast<std::size_t>(c) + 1]);
    }

    int width = 0, height = 0;
    for (const auto& [x0, x1] : block.col_extents) width += x1 - x0;
    for (const auto& [y0, y1] : block.row_extents) height += y1 - y0;
    block.pixels = Image(width, height, kNeutralGray);

    int oy = 0;
    for (int ri = 0; ri < compression.height(); ++ri) {
        const auto [sy0, sy1] = block.row_extents[static_cast<std::size_t>(ri)];
        int ox = 0;
        for (int ci = 0; ci < compression.width(); ++ci) {
            const auto [sx0, sx1] = block.col_extents[static_cast<std::size_t>(ci)];
            if (compression.at(ri, ci) || gaps_show_source) {
                block.pixels.paste(image.crop(sx0, sy0, sx1, sy1), ox, oy);
            }
            ox += sx1 - sx0;
        }
        oy += sy1 - sy0;
    }
    return block;
}

std::pair<Image, ResizePlacement> resize_pad(const Image& block, int height, int width) {
    if (block.empty() || height < 1 || width < 1) {
        fail(ErrorCode::bad_argument, "resize_pad needs a non-empty block and positive slot");
    }
    ResizePlacement placement;
    placement.scale = std::min(static_cast<double>(height) / block.height(),
                               static_cast<double>(width) / block.width());
    if (block.height() == height && block.width() == width) {
        placement.width = width;
        placement.height = height;
        return {block, placement};
    }
    // The limiting axis fills its dimension exactly; the other one rounds.
    int out_w, out_h;
    if (static_cast<double>(height) / block.height() <=
        static_cast<double>(width) / block.width()) {
        out_h = height;
        out_w = std::clamp(static_cast<int>(std::lround(block.width() * placement.scale)), 1,
                           width);
    } else {
        out_w = width;
        out_h = std::clamp(static_cast<int>(std::lround(block.height() * placement.scale)), 1,
                           height);
    }
    placement.width = out_w;
    placement.height = out_h;
    placement.x = (width - out_w) / 2;
    placement.y = (height - out_h) / 2;

    Image slot(width, height, kNeutralGray);
    slot.paste(resize_bilinear(block, out_w, out_h), placement.x, placement.y);
    return {std::move(slot), placement};
}

namespace {

Canvas reassemble_global(const Image& image, std::span<const Region> regions,
                         const ReassemblyOptions& options) {
    const Region full = full_region(image.width(), image.height());
    const std::array<Region, 9> coarse = split3x3(full);
    const std::array<std::vector<Region>, 9> grouped = assign_coarse(regions);

    struct Prepared {
        int index;
        CoarseBlock block;
    };
    std::vector<Prepared> prepared;
    for (int k = 0; k < 9; ++k) {
        if (grouped[static_cast<std::size_t>(k)].empty()) continue;
        const OccupancyMask mask =
            build_mask(grouped[static_cast<std::size_t>(k)], coarse[static_cast<std::size_t>(k)], k);
        const std::optional<MaskCompression> comp = compress_mask(mask);
        if (!comp) continue;
        prepared.push_back(
            Prepared{k, crop_block(image, mask, *comp, options.gaps_show_source)});
    }
    if (prepared.empty()) {
        fail(ErrorCode::empty_selection, "no coarse region produced content");
    }

    int cell_h = 0, cell_w = 0;
    for (const Prepared& p : prepared) {
        cell_h = std::max(cell_h, p.block.pixels.height());
        cell_w = std::max(cell_w, p.block.pixels.width());
    }

    Canvas canvas;
    canvas.strategy = Strategy::global_relative;
    canvas.slot_height = cell_h;
    canvas.slot_width = cell_w;
    canvas.image = Image(3 * cell_w, 3 * cell_h, kNeutralGray);

    for (const Prepared& p : prepared) {
        const int i = p.index / 3;
        const int j = p.index % 3;
        auto [slot_img, placement] = resize_pad(p.block.pixels, cell_h, cell_w);
        canvas.image.paste(slot_img, j * cell_w, i * cell_h);

        SlotProvenance prov;
        prov.slot = p.index;
        prov.slot_x = j * cell_w;
        prov.slot_y = i * cell_h;
        prov.source_bbox = coarse[static_cast<std::size_t>(p.index)];
        prov.scale = placement.scale;
        prov.content_x = placement.x;
        prov.content_y = placement.y;
        prov.content_w = placement.width;
        prov.content_h = placement.height;
        prov.block_w = p.block.pixels.width();
        prov.block_h = p.block.pixels.height();
        prov.row_extents = p.block.row_extents;
        prov.col_extents = p.block.col_extents;
        prov.compact_mask = p.block.compression.compact;
        prov.mask_rows = p.block.compression.height();
        prov.mask_cols = p.block.compression.width();
        canvas.slots.push_back(std::move(prov));
    }
    return canvas;
}

Canvas reassemble_relative(const Image& image, std::span<const Region> regions,
                           const ReassemblyOptions& options) {
    int max_depth = 1;
    for (const Region& r : regions) max_depth = std::max(max_depth, r.depth);

    const Region full = full_region(image.width(), image.height());
    OccupancyMask mask = make_mask(full, -1, max_depth, regions, 0);
    const std::optional<MaskCompression> comp = compress_mask(mask);
    if (!comp) {
        fail(ErrorCode::empty_selection, "selection marked no cells");
    }
    CoarseBlock block = crop_block(image, mask, *comp, options.gaps_show_source);

    Canvas canvas;
    canvas.strategy = Strategy::relative_only;
    canvas.image = block.pixels;

    SlotProvenance prov;
    prov.slot = 0;
    prov.source_bbox = full;
    prov.scale = 1.0;
    prov.content_w = block.pixels.width();
    prov.content_h = block.pixels.height();
    prov.block_w = block.pixels.width();
    prov.block_h = block.pixels.height();
    prov.row_extents = block.row_extents;
    prov.col_extents = block.col_extents;
    prov.compact_mask = block.compression.compact;
    prov.mask_rows = block.compression.height();
    prov.mask_cols = block.compression.width();
    canvas.slots.push_back(std::move(prov));
    return canvas;
}

Canvas reassemble_sequential(const Image& image, std::span<const Region> regions,
                             const ReassemblyOptions& options) {
    std::vector<Region> ordered(regions.begin(), regions.end());
    std::sort(ordered.begin(), ordered.end(), [](const Region& a, const Region& b) {
        if (a.y0 != b.y0) return a.y0 < b.y0;
        if (a.x0 != b.x0) return a.x0 < b.x0;
        return a.path < b.path;
    });

    const int unit = options.sequential_tile;
    if (unit < 1) fail(ErrorCode::bad_argument, "sequential tile size must be positive");
    const int n = static_cast<int>(ordered.size());
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    const int rows = (n + cols - 1) / cols;

    Canvas canvas;
    canvas.strategy = Strategy::sequential;
    canvas.slot_height = unit;
    canvas.slot_width = unit;
    canvas.image = Image(cols * unit, rows * unit, kNeutralGray);

    for (int idx = 0; idx < n; ++idx) {
        const Region& r = ordered[static_cast<std::size_t>(idx)];
        const Image patch_pixels = image.crop(r.x0, r.y0, r.x1, r.y1);
        auto [tile, placement] = resize_pad(patch_pixels, unit, unit);
        const int tx = (idx % cols) * unit;
        const int ty = (idx / cols) * unit;
        canvas.image.paste(tile, tx, ty);

        SlotProvenance prov;
        prov.slot = idx;
        prov.slot_x = tx;
        prov.slot_y = ty;
        prov.source_bbox = r;
        prov.scale = placement.scale;
        prov.content_x = placement.x;
        prov.content_y = placement.y;
        prov.content_w = placement.width;
        prov.content_h = placement.height;
        prov.block_w = r.width();
        prov.block_h = r.height();
        prov.row_extents = {{r.y0, r.y1}};
        prov.col_extents = {{r.x0, r.x1}};
        prov.mask_rows = 1;
        prov.mask_cols = 1;
        prov.compact_mask = {1};
        canvas.slots.push_back(std::move(prov));
    }
    return canvas;
}

} // namespace

Canvas reassemble(const Image& image, const SelectionSet& selection, Strategy strategy,
                  const ReassemblyOptions& options) {
    if (selection.empty()) {
        fail(ErrorCode::empty_selection, "cannot reassemble an empty selection");
    }
    std::vector<Region> regions;
    regions.reserve(selection.size());
    for (const SelectedPatch& patch : selection.patches) {
        regions.push_back(patch.region);
    }
    switch (strategy) {
    case Strategy::global_relative: return reassemble_global(image, regions, options);
    case Strategy::relative_only: return reassemble_relative(image, regions, options);
    case Strategy::sequential: return reassemble_sequential(image, regions, options);
    }
    fail(ErrorCode::bad_argument, "unknown strategy");
}

std::optional<std::pair<int, int>> Canvas::map_source(int x, int y) const {
    for (const SlotProvenance& slot : slots) {
        // Locate the kept row/column containing the source pixel.
        int block_y = 0;
        int row = -1;
        for (std::size_t ri = 0; ri < slot.row_extents.size(); ++ri) {
            const auto [y0, y1] = slot.row_extents[ri];
            if (y >= y0 && y < y1) {
                row = static_cast<int>(ri);
                block_y += y - y0;
                break;
            }
            block_y += y1 - y0;
        }
        if (row < 0) continue;
        int block_x = 0;
        int col = -1;
        for (std::size_t ci = 0; ci < slot.col_extents.size(); ++ci) {
            const auto [x0, x1] = slot.col_extents[ci];
            if (x >= x0 && x < x1) {
                col = static_cast<int>(ci);
                block_x += x - x0;
                break;
            }
            block_x += x1 - x0;
        }
        if (col < 0) continue;
        if (!slot.compact_mask.empty() &&
            slot.compact_mask[static_cast<std::size_t>(row) * slot.mask_cols + col] == 0) {
            continue;
        }
        const int cx = slot.slot_x + slot.content_x +
                       std::min(slot.content_w - 1,
                                static_cast<int>(std::floor(block_x * slot.scale)));
        const int cy = slot.slot_y + slot.content_y +
                       std::min(slot.content_h - 1,
                                static_cast<int>(std::floor(block_y * slot.scale)));
        return std::make_pair(cx, cy);
    }
    return std::nullopt;
}

std::string provenance_to_json(const Canvas& canvas) {
    json doc;
    doc["version"] = 1;
    doc["strategy"] = to_string(canvas.strategy);
    doc["canvas"] = json::array({canvas.image.width(), canvas.image.height()});
    if (canvas.strategy == Strategy::global_relative) {
        doc["slot_size"] = json::array({canvas.slot_width, canvas.slot_height});
    }
    json slots = json::array();
    for (const SlotProvenance& slot : canvas.slots) {
        json s;
        s["slot"] = slot.slot;
        s["slot_origin"] = json::array({slot.slot_x, slot.slot_y});
        s["source_bbox"] = json::array(
            {slot.source_bbox.x0, slot.source_bbox.y0, slot.source_bbox.x1, slot.source_bbox.y1});
        s["scale"] = slot.scale;
        s["offset"] = json::array({slot.content_x, slot.content_y});
        s["content_size"] = json::array({slot.content_w, slot.content_h});
        s["block_size"] = json::array({slot.block_w, slot.block_h});
        json rows = json::array();
        for (const auto& [y0, y1] : slot.row_extents) rows.push_back(json::array({y0, y1}));
        json cols = json::array();
        for (const auto& [x0, x1] : slot.col_extents) cols.push_back(json::array({x0, x1}));
        s["row_extents"] = std::move(rows);
        s["col_extents"] = std::move(cols);
        slots.push_back(std::move(s));
    }
    doc["slots"] = std::move(slots);
    return doc.dump(2);
}

} // namespace gridzoom
