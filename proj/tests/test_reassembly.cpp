#include "doctest.h"

#include "gridzoom/error.hpp"
#include "gridzoom/reassembly.hpp"
#include "gridzoom/rng.hpp"

#include <algorithm>
#include <set>
#include <vector>

using namespace gridzoom;

namespace {

Image gradient_image(int side) {
    Image img(side, side);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            img.set(x, y, Rgb{static_cast<std::uint8_t>(x * 255 / side),
                              static_cast<std::uint8_t>(y * 255 / side),
                              static_cast<std::uint8_t>((x + y) & 0xff)});
        }
    }
    return img;
}

SelectionSet selection_of(std::initializer_list<std::vector<std::uint8_t>> paths, int side) {
    SelectionSet selection;
    for (const auto& path : paths) {
        SelectedPatch patch;
        patch.region = region_from_path(side, side, path);
        patch.score.depth = patch.region.depth;
        selection.patches.push_back(std::move(patch));
    }
    return selection;
}

// Prefix-free random path set: pairwise disjoint tree regions.
SelectionSet random_selection(Rng& rng, int side) {
    std::vector<std::vector<std::uint8_t>> paths;
    const int count = rng.uniform_int(1, 8);
    int guard = 0;
    while (static_cast<int>(paths.size()) < count && guard++ < 200) {
        std::vector<std::uint8_t> path;
        const int depth = rng.uniform_int(1, 4);
        for (int d = 0; d < depth; ++d) {
            path.push_back(static_cast<std::uint8_t>(rng.uniform_int(0, 8)));
        }
        bool clashes = false;
        for (const auto& other : paths) {
            const std::size_t n = std::min(other.size(), path.size());
            if (std::equal(other.begin(), other.begin() + n, path.begin())) {
                clashes = true;
                break;
            }
        }
        if (!clashes) paths.push_back(std::move(path));
    }
    SelectionSet selection;
    for (const auto& path : paths) {
        SelectedPatch patch;
        patch.region = region_from_path(side, side, path);
        patch.score.depth = patch.region.depth;
        selection.patches.push_back(std::move(patch));
    }
    return selection;
}

} // namespace

TEST_CASE("assign_coarse routes patches by their path head") {
    const int side = 729;
    const SelectionSet sel = selection_of({{4, 0}, {0}, {8, 1, 2}, {8, 5}}, side);
    std::vector<Region> regions;
    for (const auto& p : sel.patches) regions.push_back(p.region);
    const auto cells = assign_coarse(regions);
    CHECK(cells[4].size() == 1);
    CHECK(cells[0].size() == 1);
    CHECK(cells[8].size() == 2);
    int nonempty = 0;
    for (const auto& cell : cells) {
        if (!cell.empty()) ++nonempty;
    }
    CHECK(nonempty == 3);
}

TEST_CASE("build_mask marks blocks at the fine-grid resolution") {
    const int side = 729;
    const Region coarse = region_from_path(side, side, std::vector<std::uint8_t>{4});

    SUBCASE("single depth-2 patch marks one cell of a 3x3 grid") {
        const Region patch = region_from_path(side, side, std::vector<std::uint8_t>{4, 7});
        const OccupancyMask mask = build_mask(std::vector<Region>{patch}, coarse, 4);
        CHECK(mask.levels == 1);
        CHECK(mask.side == 3);
        int marked = 0;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                if (mask.at(r, c)) ++marked;
            }
        }
        CHECK(marked == 1);
        CHECK(mask.at(2, 1)); // child 7 -> row 2, col 1
    }

    SUBCASE("depth-2 and depth-3 patches share a 9x9 grid; the shallower marks 3x3") {
        const Region d2 = region_from_path(side, side, std::vector<std::uint8_t>{4, 0});
        const Region d3 = region_from_path(side, side, std::vector<std::uint8_t>{4, 8, 4});
        const OccupancyMask mask = build_mask(std::vector<Region>{d2, d3}, coarse, 4);
        CHECK(mask.levels == 2);
        CHECK(mask.side == 9);
        int marked = 0;
        for (int r = 0; r < 9; ++r) {
            for (int c = 0; c < 9; ++c) {
                if (mask.at(r, c)) ++marked;
            }
        }
        CHECK(marked == 9 + 1);
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                CHECK(mask.at(r, c)); // depth-2 child 0 block
            }
        }
        CHECK(mask.at(7, 7)); // child 8 then child 4
    }

    SUBCASE("whole depth-1 region is a fully marked 1x1 grid") {
        const Region d1 = region_from_path(side, side, std::vector<std::uint8_t>{4});
        const OccupancyMask mask = build_mask(std::vector<Region>{d1}, coarse, 4);
        CHECK(mask.levels == 0);
        CHECK(mask.side == 1);
        CHECK(mask.at(0, 0));
    }
}

TEST_CASE("compress_mask drops only all-zero rows and columns") {
    OccupancyMask mask;
    mask.anchor = Region{0, 0, 9, 9, 1, {0}};
    mask.coarse_index = 0;
    mask.levels = 1;
    mask.side = 3;

    SUBCASE("worked example") {
        mask.cells = {0, 0, 0, 0, 1, 0, 0, 1, 1};
        const auto comp = compress_mask(mask);
        REQUIRE(comp.has_value());
        CHECK(comp->rows == std::vector<int>{1, 2});
        CHECK(comp->cols == std::vector<int>{1, 2});
        CHECK(comp->compact == std::vector<std::uint8_t>{1, 0, 1, 1});
    }
    SUBCASE("single marked cell compresses to 1x1") {
        mask.cells = {0, 0, 0, 0, 0, 1, 0, 0, 0};
        const auto comp = compress_mask(mask);
        REQUIRE(comp.has_value());
        CHECK(comp->height() == 1);
        CHECK(comp->width() == 1);
        CHECK(comp->at(0, 0));
    }
    SUBCASE("fully marked mask is unchanged") {
        mask.cells.assign(9, 1);
        const auto comp = compress_mask(mask);
        REQUIRE(comp.has_value());
        CHECK(comp->rows == std::vector<int>{0, 1, 2});
        CHECK(comp->cols == std::vector<int>{0, 1, 2});
        CHECK(comp->compact == std::vector<std::uint8_t>(9, 1));
    }
    SUBCASE("all-zero mask signals an empty region") {
        mask.cells.assign(9, 0);
        CHECK_FALSE(compress_mask(mask).has_value());
    }
    SUBCASE("idempotence: a compacted mask has nothing left to drop") {
        Rng rng(13);
        mask.levels = 2;
        mask.side = 9;
        for (int trial = 0; trial < 300; ++trial) {
            mask.cells.resize(81);
            for (auto& c : mask.cells) c = rng.uniform() < 0.25 ? 1 : 0;
            const auto comp = compress_mask(mask);
            if (!comp) continue;
            for (int r = 0; r < comp->height(); ++r) {
                bool any = false;
                for (int c = 0; c < comp->width(); ++c) {
                    if (comp->at(r, c)) any = true;
                }
                CHECK(any);
            }
            for (int c = 0; c < comp->width(); ++c) {
                bool any = false;
                for (int r = 0; r < comp->height(); ++r) {
                    if (comp->at(r, c)) any = true;
                }
                CHECK(any);
            }
            // order preservation: kept indices stay strictly ascending
            for (std::size_t i = 1; i < comp->rows.size(); ++i) {
                CHECK(comp->rows[i] > comp->rows[i - 1]);
            }
            for (std::size_t i = 1; i < comp->cols.size(); ++i) {
                CHECK(comp->cols[i] > comp->cols[i - 1]);
            }
        }
    }
}

TEST_CASE("crop_block assembles kept cells with gray gaps") {
    const int side = 729;
    const Image img = gradient_image(side);
    const Region coarse = region_from_path(side, side, std::vector<std::uint8_t>{0});

    SUBCASE("L-shaped mask leaves one gray gap cell") {
        // cells (1,1), (2,1), (2,2) marked -> compact 2x2 with (0,1) unmarked
        const Region a = region_from_path(side, side, std::vector<std::uint8_t>{0, 4});
        const Region b = region_from_path(side, side, std::vector<std::uint8_t>{0, 7});
        const Region c = region_from_path(side, side, std::vector<std::uint8_t>{0, 8});
        const OccupancyMask mask = build_mask(std::vector<Region>{a, b, c}, coarse, 0);
        const auto comp = compress_mask(mask);
        REQUIRE(comp.has_value());
        const CoarseBlock block = crop_block(img, mask, *comp);
        CHECK(block.pixels.width() == 162);  // two 81-px columns
        CHECK(block.pixels.height() == 162);
        // marked cells copy source pixels
        CHECK(block.pixels.at(0, 0) == img.at(a.x0, a.y0));
        CHECK(block.pixels.at(0, 81) == img.at(b.x0, b.y0));
        CHECK(block.pixels.at(81, 81) == img.at(c.x0, c.y0));
        // the unmarked kept intersection is gray
        CHECK(block.pixels.at(100, 10) == kNeutralGray);

        SUBCASE("gap flag shows source pixels instead") {
            const Region gap = region_from_path(side, side, std::vector<std::uint8_t>{0, 5});
            const CoarseBlock with_source = crop_block(img, mask, *comp, true);
            CHECK(with_source.pixels.at(100, 10) == img.at(gap.x0 + 19, gap.y0 + 10));
        }
    }

    SUBCASE("fully marked mask crops the contiguous region") {
        std::vector<Region> all;
        for (int k = 0; k < 9; ++k) {
            all.push_back(region_from_path(side, side,
                                           std::vector<std::uint8_t>{0, static_cast<std::uint8_t>(k)}));
        }
        const OccupancyMask mask = build_mask(all, coarse, 0);
        const auto comp = compress_mask(mask);
        REQUIRE(comp.has_value());
        const CoarseBlock block = crop_block(img, mask, *comp);
        CHECK(block.pixels == img.crop(coarse.x0, coarse.y0, coarse.x1, coarse.y1));
    }

    SUBCASE("single cell block equals that cell's pixels") {
        const Region a = region_from_path(side, side, std::vector<std::uint8_t>{0, 4});
        const OccupancyMask mask = build_mask(std::vector<Region>{a}, coarse, 0);
        const auto comp = compress_mask(mask);
        REQUIRE(comp.has_value());
        const CoarseBlock block = crop_block(img, mask, *comp);
        CHECK(block.pixels == img.crop(a.x0, a.y0, a.x1, a.y1));
    }
}

TEST_CASE("resize_pad scales uniformly and centers") {
    SUBCASE("100x200 into 300x300") {
        Image block(200, 100, Rgb{10, 20, 30});
        auto [slot, placement] = resize_pad(block, 300, 300);
        CHECK(placement.scale == doctest::Approx(1.5));
        CHECK(placement.width == 300);
        CHECK(placement.height == 150);
        CHECK(placement.x == 0);
        CHECK(placement.y == 75);
        CHECK(slot.at(150, 74) == kNeutralGray);
        CHECK(slot.at(150, 80) == Rgb{10, 20, 30});
        CHECK(slot.at(150, 226) == kNeutralGray);
    }
    SUBCASE("already fitting block copies pixel-identically") {
        const Image block = gradient_image(300);
        auto [slot, placement] = resize_pad(block, 300, 300);
        CHECK(placement.scale == doctest::Approx(1.0));
        CHECK(slot == block);
    }
    SUBCASE("square into square upscales without padding") {
        Image block(10, 10, Rgb{1, 2, 3});
        auto [slot, placement] = resize_pad(block, 300, 300);
        CHECK(placement.scale == doctest::Approx(30.0));
        CHECK(placement.width == 300);
        CHECK(placement.height == 300);
        CHECK(slot.at(0, 0) == Rgb{1, 2, 3});
        CHECK(slot.at(299, 299) == Rgb{1, 2, 3});
    }
}

TEST_CASE("reassemble global_relative anchors occupied slots") {
    const int side = 729;
    const Image img = gradient_image(side);

    SUBCASE("single patch occupies one slot, eight stay gray") {
        const SelectionSet sel = selection_of({{4, 2}}, side);
        const Canvas canvas = reassemble(img, sel, Strategy::global_relative);
        CHECK(canvas.image.width() == 3 * canvas.slot_width);
        CHECK(canvas.image.height() == 3 * canvas.slot_height);
        REQUIRE(canvas.slots.size() == 1);
        CHECK(canvas.slots[0].slot == 4);
        // every pixel outside the occupied slot is gray
        int non_gray_outside = 0;
        for (int y = 0; y < canvas.image.height(); ++y) {
            for (int x = 0; x < canvas.image.width(); ++x) {
                const bool inside = x >= canvas.slot_width && x < 2 * canvas.slot_width &&
                                    y >= canvas.slot_height && y < 2 * canvas.slot_height;
                if (!inside && !(canvas.image.at(x, y) == kNeutralGray)) {
                    ++non_gray_outside;
                }
            }
        }
        CHECK(non_gray_outside == 0);
    }

    SUBCASE("patches in cells (0,0) and (2,2) occupy those corners") {
        const SelectionSet sel = selection_of({{0, 1}, {8, 5, 2}}, side);
        const Canvas canvas = reassemble(img, sel, Strategy::global_relative);
        std::set<int> slots;
        for (const auto& slot : canvas.slots) slots.insert(slot.slot);
        CHECK(slots == std::set<int>{0, 8});
    }
}

TEST_CASE("reassemble sequential pastes tiles in raster order") {
    const int side = 729;
    const Image img = gradient_image(side);
    const SelectionSet sel = selection_of({{8, 5, 2}, {0, 1}}, side);
    ReassemblyOptions options;
    options.sequential_tile = 96;
    const Canvas canvas = reassemble(img, sel, Strategy::sequential, options);
    CHECK(canvas.image.width() == 2 * 96);
    CHECK(canvas.image.height() == 96);
    REQUIRE(canvas.slots.size() == 2);
    // ascending (y0, x0): the cell-(0,0) patch comes first
    CHECK(canvas.slots[0].source_bbox.path.front() == 0);
    CHECK(canvas.slots[1].source_bbox.path.front() == 8);
    CHECK(canvas.slots[0].slot_x == 0);
    CHECK(canvas.slots[1].slot_x == 96);
}

TEST_CASE("reassemble relative_only compacts the global grid without anchoring") {
    const int side = 729;
    const Image img = gradient_image(side);
    const SelectionSet sel = selection_of({{0, 0}, {8, 8}}, side);
    const Canvas canvas = reassemble(img, sel, Strategy::relative_only);
    // two depth-2 cells (81 px) survive on the compacted global grid
    CHECK(canvas.image.width() == 162);
    CHECK(canvas.image.height() == 162);
    const Region a = region_from_path(side, side, std::vector<std::uint8_t>{0, 0});
    const Region b = region_from_path(side, side, std::vector<std::uint8_t>{8, 8});
    CHECK(canvas.image.at(0, 0) == img.at(a.x0, a.y0));
    CHECK(canvas.image.at(161, 161) == img.at(b.x1 - 1, b.y1 - 1));
    // off-diagonal compact cells are unmarked -> gray
    CHECK(canvas.image.at(120, 20) == kNeutralGray);
    CHECK(canvas.image.at(20, 120) == kNeutralGray);
}

TEST_CASE("no-loss: every selected patch maps onto the canvas via provenance") {
    Rng rng(99);
    const int side = 729;
    const Image img = gradient_image(side);
    for (int trial = 0; trial < 50; ++trial) {
        const SelectionSet sel = random_selection(rng, side);
        if (sel.empty()) continue;
        const Canvas canvas = reassemble(img, sel, Strategy::global_relative);
        for (const SelectedPatch& patch : sel.patches) {
            const Region& r = patch.region;
            // corners and center of every selected patch land inside its slot
            const std::vector<std::pair<int, int>> probes{
                {r.x0, r.y0},
                {r.x1 - 1, r.y0},
                {r.x0, r.y1 - 1},
                {r.x1 - 1, r.y1 - 1},
                {(r.x0 + r.x1) / 2, (r.y0 + r.y1) / 2}};
            const int head = r.path.front();
            const int slot_x0 = (head % 3) * canvas.slot_width;
            const int slot_y0 = (head / 3) * canvas.slot_height;
            for (const auto& [sx, sy] : probes) {
                const auto mapped = canvas.map_source(sx, sy);
                REQUIRE(mapped.has_value());
                CHECK(mapped->first >= slot_x0);
                CHECK(mapped->first < slot_x0 + canvas.slot_width);
                CHECK(mapped->second >= slot_y0);
                CHECK(mapped->second < slot_y0 + canvas.slot_height);
            }
        }
    }
}

TEST_CASE("unscaled slots reproduce source pixels exactly") {
    // A single selected patch -> its block defines the slot size, scale 1.
    const int side = 729;
    const Image img = gradient_image(side);
    const SelectionSet sel = selection_of({{4, 1}}, side);
    const Canvas canvas = reassemble(img, sel, Strategy::global_relative);
    REQUIRE(canvas.slots.size() == 1);
    CHECK(canvas.slots[0].scale == doctest::Approx(1.0));
    const Region r = region_from_path(side, side, std::vector<std::uint8_t>{4, 1});
    for (int y = r.y0; y < r.y1; y += 13) {
        for (int x = r.x0; x < r.x1; x += 13) {
            const auto mapped = canvas.map_source(x, y);
            REQUIRE(mapped.has_value());
            CHECK(canvas.image.at(mapped->first, mapped->second) == img.at(x, y));
        }
    }
}

TEST_CASE("reassemble rejects an empty selection") {
    const Image img = gradient_image(243);
    CHECK_THROWS_AS((void)reassemble(img, SelectionSet{}, Strategy::global_relative), Error);
}

TEST_CASE("provenance JSON lists slots with scale and offsets") {
    const int side = 729;
    const Image img = gradient_image(side);
    const SelectionSet sel = selection_of({{0}, {8, 4}}, side);
    const Canvas canvas = reassemble(img, sel, Strategy::global_relative);
    const std::string text = provenance_to_json(canvas);
    CHECK(text.find("\"strategy\": \"global_relative\"") != std::string::npos);
    CHECK(text.find("\"slots\"") != std::string::npos);
    CHECK(text.find("\"scale\"") != std::string::npos);
}
