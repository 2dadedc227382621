#pragma once

#include "gridzoom/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gridzoom {

// Decodes a PNG or JPEG file; the format is sniffed from the signature bytes.
[[nodiscard]] Image load_image(const std::string& path);

void save_png(const Image& image, const std::string& path);

// PNG encoding into a memory buffer (used for wire transport).
[[nodiscard]] std::vector<std::uint8_t> encode_png(const Image& image);

} // namespace gridzoom
