#include "sipmask/geometry.hpp"

#include <algorithm>

namespace sipmask {

double iou(const Box& a, const Box& b) {
  SIP_CHECK_ARG(a.valid() && b.valid(), "iou needs valid boxes");
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

Box ltrb_decode(double px, double py, const LTRBOffsets& off) {
  return {px - off.l, py - off.t, px + off.r, py + off.b};
}

LTRBOffsets ltrb_encode(const Box& box, double px, double py) {
  return {px - box.x1, py - box.y1, box.x2 - px, box.y2 - py};
}

SubregionGrid subregion_grid(const Box& box, int k) {
  SIP_CHECK_ARG(k >= 1, "subregion_grid needs k >= 1");
  SubregionGrid grid;
  grid.k = k;
  grid.regions.reserve(static_cast<size_t>(k) * k);
  // Interior boundaries at fractions i/k; outer boundaries are the parent's
  // exact values so neighbors share bits and the tiling telescopes exactly.
  std::vector<double> bx(static_cast<size_t>(k) + 1), by(static_cast<size_t>(k) + 1);
  for (int i = 0; i <= k; ++i) {
    bx[i] = i == 0 ? box.x1 : (i == k ? box.x2 : box.x1 + i * box.width() / k);
    by[i] = i == 0 ? box.y1 : (i == k ? box.y2 : box.y1 + i * box.height() / k);
  }
  for (int row = 0; row < k; ++row)
    for (int col = 0; col < k; ++col)
      grid.regions.push_back({bx[col], by[row], bx[col + 1], by[row + 1]});
  return grid;
}

int subregion_index(const SubregionGrid& grid, double cx, double cy) {
  for (size_t i = 0; i < grid.regions.size(); ++i)
    if (grid.regions[i].contains_center(cx, cy)) return static_cast<int>(i);
  return -1;
}

namespace {

template <typename T>
TensorT<T> prune_impl(const TensorT<T>& map, const Box& region) {
  SIP_CHECK(map.ndim() == 2, "prune_support expects an h x w map");
  const int h = map.dim(0), w = map.dim(1);
  TensorT<T> out({h, w});
  for (int y = 0; y < h; ++y) {
    const double cy = y + 0.5;
    if (cy < region.y1 || cy >= region.y2) continue;
    for (int x = 0; x < w; ++x) {
      if (region.contains_center(x + 0.5, cy))
        out.at(y, x) = map.at(y, x);
    }
  }
  return out;
}

}  // namespace

Tensor prune_support(const Tensor& map, const Box& region) {
  return prune_impl<float>(map, region);
}

TensorD prune_support(const TensorD& map, const Box& region) {
  return prune_impl<double>(map, region);
}

double ltrb_iou(const LTRBOffsets& a, const LTRBOffsets& b) {
  const double area_a = (a.l + a.r) * (a.t + a.b);
  const double area_b = (b.l + b.r) * (b.t + b.b);
  const double iw = std::min(a.l, b.l) + std::min(a.r, b.r);
  const double ih = std::min(a.t, b.t) + std::min(a.b, b.b);
  const double inter = iw * ih;
  const double uni = area_a + area_b - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace sipmask
