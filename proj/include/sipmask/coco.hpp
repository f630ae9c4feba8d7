#pragma once

#include <string>

#include "sipmask/data.hpp"

namespace sipmask {

// COCO-format ingestion (read-only, desk scale): polygon and RLE
// segmentations (uncompressed counts or compressed strings, both
// column-major) decode to binary masks at native resolution, then scenes are
// resized to target_size with nearest-resampled masks. Images are read from
// image_dir as PNG when present; otherwise a flat render of the masks stands
// in, so mask-only fixtures remain usable.
std::vector<Scene> load_coco(const std::string& annotation_path,
                             const std::string& image_dir, int max_images,
                             int target_size);

// Exposed for tests.
Tensor rasterize_polygon(const std::vector<std::vector<double>>& rings,
                         int height, int width);
Tensor decode_rle_counts(const std::vector<int64_t>& counts, int height,
                         int width);
std::vector<int64_t> uncompress_rle_string(const std::string& s);

}  // namespace sipmask
