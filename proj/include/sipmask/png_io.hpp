#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sipmask {

// Minimal PNG support on zlib: 8-bit RGB writer (filter 0) and a reader for
// non-interlaced 8-bit gray/RGB/RGBA images. Enough for previews, overlays,
// and desk-scale COCO fixtures.
void write_png_rgb(const std::string& path, int height, int width,
                   const std::vector<uint8_t>& rgb);

struct PngImage {
  int height = 0, width = 0;
  std::vector<uint8_t> rgb;  // always 3 channels after decode
};

PngImage read_png_rgb(const std::string& path);

}  // namespace sipmask
