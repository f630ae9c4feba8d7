#pragma once

#include <vector>

#include "sipmask/tensor.hpp"

namespace sipmask {

// Axis-aligned box in continuous image coordinates. Pixel (y, x) covers
// [x, x+1) x [y, y+1) and its center is (x+0.5, y+0.5).
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return x1 + width() / 2; }
  double cy() const { return y1 + height() / 2; }
  bool valid() const {
    return x1 <= x2 && y1 <= y2 && std::isfinite(x1) && std::isfinite(y1) &&
           std::isfinite(x2) && std::isfinite(y2);
  }

  // Half-open membership rule: a pixel belongs iff its center lies inside,
  // with left/top edges inclusive and right/bottom exclusive.
  bool contains_center(double cx, double cy) const {
    return cx >= x1 && cx < x2 && cy >= y1 && cy < y2;
  }

  Box scaled(double s) const { return {x1 * s, y1 * s, x2 * s, y2 * s}; }
  Box shifted(double dx, double dy) const {
    return {x1 + dx, y1 + dy, x2 + dx, y2 + dy};
  }
};

// FCOS-style distances from an anchor point to the four box sides.
struct LTRBOffsets {
  double l = 0, t = 0, r = 0, b = 0;
};

struct SubregionGrid {
  int k = 1;
  std::vector<Box> regions;  // row-major, top-left first, k*k entries
};

double iou(const Box& a, const Box& b);

Box ltrb_decode(double px, double py, const LTRBOffsets& off);
LTRBOffsets ltrb_encode(const Box& box, double px, double py);

// Splits each axis at fractions i/k of the extent. Boundary coordinates are
// shared exactly between neighbors and the outer edges reuse the parent's
// values, so the half-open center rule partitions the box support exactly.
SubregionGrid subregion_grid(const Box& box, int k);

// Index of the sub-region whose half-open extent contains the pixel center,
// or -1 when the center is outside the box.
int subregion_index(const SubregionGrid& grid, double cx, double cy);

// Zeroes map values whose pixel centers fall outside the region.
Tensor prune_support(const Tensor& map, const Box& region);
TensorD prune_support(const TensorD& map, const Box& region);

// Closed-form IoU of two ltrb tuples sharing one anchor point.
double ltrb_iou(const LTRBOffsets& a, const LTRBOffsets& b);

}  // namespace sipmask
