#pragma once

#include "sipmask/geometry.hpp"
#include "sipmask/nn_ops.hpp"
#include "sipmask/tensor.hpp"

namespace sipmask {

// Feature-alignment offsets for a 3x3 deformable kernel: the nine sampling
// points are placed on a uniform 3x3 lattice over the regressed box (corners
// at box corners, center at box center) and expressed in feature-grid units.
// The returned tensor is H x W x 9 x 2 as (dy, dx) per tap.
//
// Fixed point: when the regressed box equals the kernel's natural 3x3
// footprint (ltrb = stride on every side), every offset is exactly zero.
template <typename T>
TensorT<T> offsets_from_regression(const TensorT<T>& ltrb, double stride) {
  SIP_CHECK(ltrb.ndim() == 3 && ltrb.dim(2) == 4,
            "offsets_from_regression expects H x W x 4 ltrb");
  const int h = ltrb.dim(0), w = ltrb.dim(1);
  TensorT<T> out({h, w, 9, 2});
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const T* o = ltrb.data() + (static_cast<size_t>(row) * w + col) * 4;
      const double ax = (col + 0.5) * stride;
      const double ay = (row + 0.5) * stride;
      const double x1 = ax - static_cast<double>(o[0]);
      const double y1 = ay - static_cast<double>(o[1]);
      const double x2 = ax + static_cast<double>(o[2]);
      const double y2 = ay + static_cast<double>(o[3]);
      // Lattice points in image coordinates; endpoints use the exact box
      // corners so the zero-offset fixed point holds bitwise.
      double lx[3] = {x1, x1 + (x2 - x1) / 2, x2};
      double ly[3] = {y1, y1 + (y2 - y1) / 2, y2};
      T* orow = out.data() + (static_cast<size_t>(row) * w + col) * 18;
      for (int r = 0; r < 9; ++r) {
        const int i = r / 3, j = r % 3;
        const double gy = ly[i] / stride - 0.5;  // grid units
        const double gx = lx[j] / stride - 0.5;
        orow[2 * r] = static_cast<T>(gy - (row + (i - 1)));
        orow[2 * r + 1] = static_cast<T>(gx - (col + (j - 1)));
      }
    }
  }
  return out;
}

// Deformable 3x3 conv with box-derived offsets; shared kernel weights.
// Offsets enter as constants (the detach point at ltrb lives in the caller).
template <typename T>
VarPtr<T> feature_align(const VarPtr<T>& feats, const TensorT<T>& offsets,
                        const VarPtr<T>& kernel, const VarPtr<T>& bias) {
  return deformable_conv3x3(feats, kernel, bias, make_constant<T>(offsets));
}

// Coefficient block i (row-major sub-region order, matching subregion_grid)
// occupies channels [i*m, (i+1)*m) of the k^2*m coefficient tensor.
template <typename T>
std::vector<std::vector<T>> gather_coefficients(const TensorT<T>& coeffs,
                                                int y, int x, int k, int m) {
  SIP_CHECK(coeffs.ndim() == 3, "coefficients must be H x W x (k^2*m)");
  SIP_CHECK(coeffs.dim(2) == k * k * m,
            "coefficient channels " << coeffs.dim(2) << " != k^2*m = " << k * k * m);
  SIP_CHECK(y >= 0 && y < coeffs.dim(0) && x >= 0 && x < coeffs.dim(1),
            "gather_coefficients location out of grid");
  const T* base =
      coeffs.data() + (static_cast<size_t>(y) * coeffs.dim(1) + x) * coeffs.dim(2);
  std::vector<std::vector<T>> blocks(static_cast<size_t>(k) * k);
  for (int i = 0; i < k * k; ++i)
    blocks[i].assign(base + static_cast<size_t>(i) * m,
                     base + static_cast<size_t>(i + 1) * m);
  return blocks;
}

template <typename T>
void scatter_coefficients(TensorT<T>& coeffs, int y, int x, int k, int m,
                          const std::vector<std::vector<T>>& blocks) {
  SIP_CHECK(static_cast<int>(blocks.size()) == k * k, "block count != k^2");
  T* base =
      coeffs.data() + (static_cast<size_t>(y) * coeffs.dim(1) + x) * coeffs.dim(2);
  for (int i = 0; i < k * k; ++i) {
    SIP_CHECK(static_cast<int>(blocks[i].size()) == m, "block size != m");
    std::copy(blocks[i].begin(), blocks[i].end(), base + static_cast<size_t>(i) * m);
  }
}

}  // namespace sipmask
