#include "gridzoom/image.hpp"

#include "gridzoom/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace gridzoom {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
        fail(ErrorCode::bad_image, "image dimensions must be positive");
    }
    data_.resize(static_cast<std::size_t>(width) * height * 3);
    if (fill.r == fill.g && fill.g == fill.b) {
        std::memset(data_.data(), fill.r, data_.size());
    } else {
        for (std::size_t i = 0; i < data_.size(); i += 3) {
            data_[i] = fill.r;
            data_[i + 1] = fill.g;
            data_[i + 2] = fill.b;
        }
    }
}

Rgb Image::at(int x, int y) const {
    const std::uint8_t* p = row(y) + static_cast<std::size_t>(x) * 3;
    return {p[0], p[1], p[2]};
}

void Image::set(int x, int y, Rgb value) {
    std::uint8_t* p = row(y) + static_cast<std::size_t>(x) * 3;
    p[0] = value.r;
    p[1] = value.g;
    p[2] = value.b;
}

const std::uint8_t* Image::row(int y) const {
    return data_.data() + static_cast<std::size_t>(y) * width_ * 3;
}

std::uint8_t* Image::row(int y) {
    return data_.data() + static_cast<std::size_t>(y) * width_ * 3;
}

void Image::fill_rect(int x0, int y0, int x1, int y1, Rgb value) {
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, width_);
    y1 = std::min(y1, height_);
    for (int y = y0; y < y1; ++y) {
        std::uint8_t* p = row(y) + static_cast<std::size_t>(x0) * 3;
        for (int x = x0; x < x1; ++x) {
            p[0] = value.r;
            p[1] = value.g;
            p[2] = value.b;
            p += 3;
        }
    }
}

Image Image::crop(int x0, int y0, int x1, int y1) const {
    if (x0 < 0 || y0 < 0 || x1 > width_ || y1 > height_ || x0 >= x1 || y0 >= y1) {
        fail(ErrorCode::bad_argument, "crop rectangle out of bounds");
    }
    Image out(x1 - x0, y1 - y0);
    const std::size_t bytes = static_cast<std::size_t>(x1 - x0) * 3;
    for (int y = y0; y < y1; ++y) {
        std::memcpy(out.row(y - y0), row(y) + static_cast<std::size_t>(x0) * 3, bytes);
    }
    return out;
}

void Image::paste(const Image& src, int dx, int dy) {
    if (dx < 0 || dy < 0 || dx + src.width() > width_ || dy + src.height() > height_) {
        fail(ErrorCode::bad_argument, "paste destination out of bounds");
    }
    const std::size_t bytes = static_cast<std::size_t>(src.width()) * 3;
    for (int y = 0; y < src.height(); ++y) {
        std::memcpy(row(dy + y) + static_cast<std::size_t>(dx) * 3, src.row(y), bytes);
    }
}

Image resize_bilinear(const Image& src, int out_width, int out_height) {
    if (src.empty() || out_width < 1 || out_height < 1) {
        fail(ErrorCode::bad_argument, "resize requires non-empty source and positive output size");
    }
    if (out_width == src.width() && out_height == src.height()) {
        return src;
    }
    Image out(out_width, out_height);
    const double sx = static_cast<double>(src.width()) / out_width;
    const double sy = static_cast<double>(src.height()) / out_height;
    for (int oy = 0; oy < out_height; ++oy) {
        double fy = (oy + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(src.height() - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height() - 1);
        const double wy = fy - y0;
        std::uint8_t* dst = out.row(oy);
        const std::uint8_t* r0 = src.row(y0);
        const std::uint8_t* r1 = src.row(y1);
        for (int ox = 0; ox < out_width; ++ox) {
            double fx = (ox + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(src.width() - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width() - 1);
            const double wx = fx - x0;
            const std::uint8_t* p00 = r0 + static_cast<std::size_t>(x0) * 3;
            const std::uint8_t* p01 = r0 + static_cast<std::size_t>(x1) * 3;
            const std::uint8_t* p10 = r1 + static_cast<std::size_t>(x0) * 3;
            const std::uint8_t* p11 = r1 + static_cast<std::size_t>(x1) * 3;
            for (int c = 0; c < 3; ++c) {
                const double top = p00[c] + (p01[c] - p00[c]) * wx;
                const double bot = p10[c] + (p11[c] - p10[c]) * wx;
                dst[static_cast<std::size_t>(ox) * 3 + c] =
                    static_cast<std::uint8_t>(std::lround(top + (bot - top) * wy));
            }
        }
    }
    return out;
}

} // namespace gridzoom
