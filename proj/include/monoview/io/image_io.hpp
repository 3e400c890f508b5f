#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monoview/tensor.hpp"

namespace monoview::io {

/// 8-bit image buffer, row-major, interleaved channels.
struct Image8 {
    int width = 0, height = 0, channels = 0; // channels: 1 or 3
    std::vector<std::uint8_t> pixels;
};

/// Decode a PNG. Grayscale/palette/alpha inputs are expanded or stripped to
/// 8-bit RGB.
Image8 read_png(const std::string& path);

/// Encode 8-bit RGB (channels == 3) or grayscale (channels == 1).
void write_png(const std::string& path, const Image8& image);

/// PFM (portable float map), grayscale "Pf", little-endian, rows stored
/// bottom-up per the format convention. Map tensors are (1,H,W,1).
void write_pfm(const std::string& path, const Tensorf& map);
Tensorf read_pfm(const std::string& path);

/// 8-bit visualization of a float map: linear scaling of [lo, hi] onto
/// [0, 255], values clamped. Used for confidence/occlusion/disparity PNGs.
Image8 map_to_gray8(const Tensorf& map, float lo, float hi);

} // namespace monoview::io
