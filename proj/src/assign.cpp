#include "sipmask/assign.hpp"

#include <limits>

namespace sipmask {

AssignmentResult assign_targets(const std::vector<Box>& gt_boxes,
                                const std::vector<int>& gt_classes,
                                const Config& cfg) {
  SIP_CHECK(gt_boxes.size() == gt_classes.size(), "gt boxes/classes mismatch");
  for (const auto& b : gt_boxes) SIP_CHECK(b.valid(), "invalid gt box");
  for (int c : gt_classes)
    SIP_CHECK(c >= 0 && c < cfg.classes, "gt class " << c << " out of range");

  AssignmentResult res;
  res.levels.resize(cfg.num_levels());
  for (int l = 0; l < cfg.num_levels(); ++l) {
    auto& la = res.levels[l];
    la.stride = cfg.level_stride(l);
    la.h = cfg.image_size / la.stride;
    la.w = cfg.image_size / la.stride;
    la.class_target.assign(static_cast<size_t>(la.h) * la.w, -1);
    la.gt_index.assign(static_cast<size_t>(la.h) * la.w, -1);
    la.ltrb_target.assign(static_cast<size_t>(la.h) * la.w, {});
    const double lo = cfg.scale_edges[l];
    const double hi = l + 1 < static_cast<int>(cfg.scale_edges.size())
                          ? cfg.scale_edges[l + 1]
                          : std::numeric_limits<double>::infinity();
    for (int y = 0; y < la.h; ++y) {
      for (int x = 0; x < la.w; ++x) {
        const double px = (x + 0.5) * la.stride;
        const double py = (y + 0.5) * la.stride;
        int best = -1;
        double best_area = std::numeric_limits<double>::infinity();
        LTRBOffsets best_off;
        for (size_t g = 0; g < gt_boxes.size(); ++g) {
          if (!gt_boxes[g].contains_center(px, py)) continue;
          const LTRBOffsets off = ltrb_encode(gt_boxes[g], px, py);
          const double mx = std::max({off.l, off.t, off.r, off.b});
          if (!(mx > lo && mx <= hi)) continue;
          if (gt_boxes[g].area() < best_area) {
            best = static_cast<int>(g);
            best_area = gt_boxes[g].area();
            best_off = off;
          }
        }
        if (best >= 0) {
          const size_t idx = static_cast<size_t>(y) * la.w + x;
          la.class_target[idx] = gt_classes[best];
          la.gt_index[idx] = best;
          la.ltrb_target[idx] = best_off;
          res.positives.push_back({l, y, x, best});
        }
      }
    }
  }
  res.n_pos = static_cast<int>(res.positives.size());
  return res;
}

}  // namespace sipmask
