#pragma once

#include "gridzoom/grid.hpp"
#include "gridzoom/image.hpp"
#include "gridzoom/search.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gridzoom {

enum class Strategy { global_relative, relative_only, sequential };
[[nodiscard]] const char* to_string(Strategy strategy);
[[nodiscard]] Strategy strategy_from_name(const std::string& name);

// Binary occupancy of the fine grid covering one anchor region. The grid has
// 3^levels cells per axis; marks come from selected patches.
struct OccupancyMask {
    Region anchor;            // the region the grid subdivides
    int coarse_index = -1;    // 0..8 for coarse cells, -1 for a global mask
    int levels = 0;
    int side = 1;             // 3^levels
    std::vector<std::uint8_t> cells; // row-major side*side

    [[nodiscard]] bool at(int row, int col) const {
        return cells[static_cast<std::size_t>(row) * side + col] != 0;
    }
    [[nodiscard]] bool any() const;
};

struct MaskCompression {
    std::vector<int> rows; // ascending indices of non-empty rows
    std::vector<int> cols;
    std::vector<std::uint8_t> compact; // rows.size() x cols.size()

    [[nodiscard]] int height() const noexcept { return static_cast<int>(rows.size()); }
    [[nodiscard]] int width() const noexcept { return static_cast<int>(cols.size()); }
    [[nodiscard]] bool at(int row, int col) const {
        return compact[static_cast<std::size_t>(row) * cols.size() + col] != 0;
    }
};

struct CoarseBlock {
    Image pixels;
    MaskCompression compression;
    std::vector<std::pair<int, int>> row_extents; // source y spans of kept rows
    std::vector<std::pair<int, int>> col_extents; // source x spans of kept cols
};

struct SlotProvenance {
    int slot = 0;          // 0..8 for global_relative, linear index otherwise
    int slot_x = 0;        // slot origin on the canvas
    int slot_y = 0;
    Region source_bbox;    // anchor (or patch, for the sequential strategy)
    double scale = 1.0;
    int content_x = 0;     // placed content offset within the slot
    int content_y = 0;
    int content_w = 0;
    int content_h = 0;
    int block_w = 0;       // pre-scaling block size
    int block_h = 0;
    std::vector<std::pair<int, int>> row_extents;
    std::vector<std::pair<int, int>> col_extents;
    std::vector<std::uint8_t> compact_mask; // empty for the sequential strategy
    int mask_rows = 0;
    int mask_cols = 0;
};

struct Canvas {
    Image image;
    Strategy strategy = Strategy::global_relative;
    int slot_height = 0; // per-slot cell size for global_relative
    int slot_width = 0;
    std::vector<SlotProvenance> slots;

    // Maps a source pixel to its canvas position, when that pixel landed on
    // the canvas (i.e. lies in a marked cell of some placed block).
    [[nodiscard]] std::optional<std::pair<int, int>> map_source(int x, int y) const;
};

struct ReassemblyOptions {
    // Kept-row/kept-col intersections that are unmarked show gray by default;
    // this flips them to original pixels.
    bool gaps_show_source = false;
    int sequential_tile = 224;
};

// Groups patches by the coarse cell named by their path head.
[[nodiscard]] std::array<std::vector<Region>, 9> assign_coarse(std::span<const Region> patches);

// Fine-grid occupancy for one coarse cell; levels = deepest patch depth - 1.
[[nodiscard]] OccupancyMask build_mask(std::span<const Region> patches, const Region& coarse,
                                       int coarse_index);

// Drops all-zero rows/columns, preserving order. Empty result means the
// region holds no marks and is skipped.
[[nodiscard]] std::optional<MaskCompression> compress_mask(const OccupancyMask& mask);

[[nodiscard]] CoarseBlock crop_block(const Image& image, const OccupancyMask& mask,
                                     const MaskCompression& compression,
                                     bool gaps_show_source = false);

struct ResizePlacement {
    double scale = 1.0;
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
};

// Uniform aspect-preserving scale into (height, width), centered on gray.
[[nodiscard]] std::pair<Image, ResizePlacement> resize_pad(const Image& block, int height,
                                                           int width);

[[nodiscard]] Canvas reassemble(const Image& image, const SelectionSet& selection,
                                Strategy strategy, const ReassemblyOptions& options = {});

[[nodiscard]] std::string provenance_to_json(const Canvas& canvas);

} // namespace gridzoom
