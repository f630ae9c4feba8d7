#pragma once

#include <vector>

#include "sipmask/config.hpp"
#include "sipmask/geometry.hpp"

namespace sipmask {

// Anchor-free target assignment. Grid location (row, col) at stride s sits
// at image point ((col+0.5)s, (row+0.5)s); it is positive iff that point is
// inside a gt box and max(l,t,r,b) falls in the level's scale window.
// Ties go to the smallest-area gt. The last window is open-ended.
struct LevelAssignment {
  int h = 0, w = 0, stride = 0;
  std::vector<int> class_target;        // per location, -1 = background
  std::vector<int> gt_index;            // per location, -1 = none
  std::vector<LTRBOffsets> ltrb_target; // per location, valid when positive
};

struct AssignmentResult {
  std::vector<LevelAssignment> levels;
  int n_pos = 0;
  // flat (level, y, x) of every positive location
  struct Positive {
    int level, y, x, gt;
  };
  std::vector<Positive> positives;
};

AssignmentResult assign_targets(const std::vector<Box>& gt_boxes,
                                const std::vector<int>& gt_classes,
                                const Config& cfg);

}  // namespace sipmask
