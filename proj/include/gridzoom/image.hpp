#pragma once

#include <cstdint>
#include <vector>

namespace gridzoom {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    bool operator==(const Rgb&) const = default;
};

// Fill value for every padded or vacant pixel produced by the pipeline.
inline constexpr Rgb kNeutralGray{128, 128, 128};

// Plain 8-bit RGB raster with value semantics.
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = kNeutralGray);

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] bool empty() const noexcept { return width_ == 0 || height_ == 0; }

    [[nodiscard]] Rgb at(int x, int y) const;
    void set(int x, int y, Rgb value);

    [[nodiscard]] const std::uint8_t* row(int y) const;
    [[nodiscard]] std::uint8_t* row(int y);

    // Clips the rectangle to the image bounds.
    void fill_rect(int x0, int y0, int x1, int y1, Rgb value);

    // Rectangle must lie inside the image (half-open coordinates).
    [[nodiscard]] Image crop(int x0, int y0, int x1, int y1) const;

    // Source must fit entirely at (dx, dy).
    void paste(const Image& src, int dx, int dy);

    [[nodiscard]] const std::vector<std::uint8_t>& data() const noexcept { return data_; }

    bool operator==(const Image&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

// Bilinear resampling; deterministic, center-aligned sample mapping.
[[nodiscard]] Image resize_bilinear(const Image& src, int out_width, int out_height);

} // namespace gridzoom
