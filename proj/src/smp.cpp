#include "sipmask/smp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace sipmask {

namespace {

// Polynomial expf (Cephes coefficients), accurate to ~1 ulp over the
// range that matters here; vectorizes cleanly.
inline float fast_expf(float x) {
  x = std::min(88.0f, std::max(-88.0f, x));
  const float t = x * 1.44269504088896341f;
  const float fi = std::floor(t + 0.5f);
  const int i = static_cast<int>(fi);
  const float f = (x - fi * 0.693359375f) - fi * -2.12194440e-4f;
  float p = 1.9875691500e-4f;
  p = p * f + 1.3981999507e-3f;
  p = p * f + 8.3334519073e-3f;
  p = p * f + 4.1665795894e-2f;
  p = p * f + 1.6666665459e-1f;
  p = p * f + 5.0000001201e-1f;
  p = p * f * f + f + 1.0f;
  union {
    uint32_t u;
    float fl;
  } bits;
  bits.u = static_cast<uint32_t>(i + 127) << 23;
  return p * bits.fl;
}

inline float dot_m(const float* basis_row, const float* coeff, int m) {
  float acc = 0.0f;
  for (int i = 0; i < m; ++i) acc += basis_row[i] * coeff[i];
  return acc;
}

// Half-open [lo, hi) pixel-center range clipped to [0, n).
inline void center_range(double lo, double hi, int n, int& i0, int& i1) {
  i0 = std::max(static_cast<int>(std::ceil(lo - 0.5)), 0);
  i1 = std::min(static_cast<int>(std::ceil(hi - 0.5)), n);
}

void check_det(const Detection& d, const SmpParams& prm) {
  SIP_CHECK(d.box.valid(), "detection box invalid");
  SIP_CHECK(static_cast<int>(d.coeffs.size()) == prm.k * prm.k * prm.m,
            "detection carries " << d.coeffs.size()
                                 << " coefficients, expected k^2*m = "
                                 << prm.k * prm.k * prm.m);
}

}  // namespace

float sigmoid_f(float x) { return 1.0f / (1.0f + fast_expf(-x)); }

Tensor assemble_region_maps(const Tensor& basis, const Tensor& coeff_matrix) {
  SIP_CHECK(basis.ndim() == 3, "basis must be h x w x m");
  SIP_CHECK(coeff_matrix.ndim() == 2, "coefficient matrix must be m x p");
  const int h = basis.dim(0), w = basis.dim(1), m = basis.dim(2);
  SIP_CHECK(coeff_matrix.dim(0) == m,
            "basis has m=" << m << " but coefficient matrix has "
                           << coeff_matrix.dim(0) << " rows");
  const int p = coeff_matrix.dim(1);
  Tensor out({h, w, p});
  if (p == 0) return out;
  // Column j of the m x p matrix gathered once, then per-pixel dots; same
  // scalar dot the fused path uses, so the two routes agree bitwise.
  std::vector<float> col(static_cast<size_t>(m));
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i < m; ++i) col[i] = coeff_matrix.at(i, j);
    const float* B = basis.data();
    float* O = out.data();
    for (int px = 0; px < h * w; ++px)
      O[static_cast<size_t>(px) * p + j] =
          sigmoid_f(dot_m(B + static_cast<size_t>(px) * m, col.data(), m));
  }
  return out;
}

Tensor assemble_instance(const Box& box, const std::vector<Tensor>& region_maps,
                         int k) {
  SIP_CHECK(static_cast<int>(region_maps.size()) == k * k,
            "assemble_instance got " << region_maps.size()
                                     << " maps, expected k^2 = " << k * k);
  const auto grid = subregion_grid(box, k);
  Tensor acc = prune_support(region_maps[0], grid.regions[0]);
  for (int i = 1; i < k * k; ++i) {
    const Tensor pruned = prune_support(region_maps[i], grid.regions[i]);
    SIP_CHECK(pruned.same_shape(acc), "region map shape mismatch");
    for (size_t j = 0; j < acc.size(); ++j) acc[j] += pruned[j];
  }
  return acc;
}

Tensor binarize(const Tensor& soft, double tau) {
  Tensor out(soft.shape());
  const float t = static_cast<float>(tau);
  for (size_t i = 0; i < soft.size(); ++i)
    out[i] = soft[i] >= t ? 1.0f : 0.0f;
  return out;
}

const std::vector<InstanceMask>& SmpAssembler::assemble(
    const Tensor& basis, const std::vector<Detection>& dets,
    const SmpParams& prm) {
  SIP_CHECK(basis.ndim() == 3, "basis must be h x w x m");
  SIP_CHECK(basis.dim(2) == prm.m,
            "basis channel count " << basis.dim(2) << " != m = " << prm.m);
  const int h = basis.dim(0), w = basis.dim(1), m = prm.m;
  const double inv_stride = 1.0 / prm.basis_stride;
  const float thr = static_cast<float>(prm.mask_thr);
  const int p = static_cast<int>(dets.size());

  // Recycle output slots; zero only the rectangles dirtied last call.
  if (static_cast<int>(out_.size()) > p) {
    out_.resize(p);
    dirty_.resize(p);
  }
  for (int j = 0; j < p; ++j) {
    if (j < static_cast<int>(out_.size()) && out_[j].soft.dim(0) == h &&
        out_[j].soft.dim(1) == w) {
      int y0, y1, x0, x1;
      center_range(dirty_[j].y1, dirty_[j].y2, h, y0, y1);
      center_range(dirty_[j].x1, dirty_[j].x2, w, x0, x1);
      const int span = x1 - x0;
      if (span > 0) {
        for (int y = y0; y < y1; ++y) {
          const size_t off = static_cast<size_t>(y) * w + x0;
          std::memset(out_[j].soft.data() + off, 0, sizeof(float) * span);
          std::memset(out_[j].binary.data() + off, 0, sizeof(float) * span);
        }
      }
    } else if (j < static_cast<int>(out_.size())) {
      out_[j].soft = Tensor({h, w});
      out_[j].binary = Tensor({h, w});
    } else {
      out_.push_back({Tensor({h, w}), Tensor({h, w}), {}, 0, 0});
      dirty_.push_back({});
    }
  }

  for (int j = 0; j < p; ++j) {
    const Detection& det = dets[j];
    check_det(det, prm);
    const Box bbox = det.box.scaled(inv_stride);
    InstanceMask& im = out_[j];
    im.box = bbox;
    im.score = det.score;
    im.class_id = det.class_id;
    dirty_[j] = bbox;

    const auto grid = subregion_grid(bbox, prm.k);
    for (int i = 0; i < prm.k * prm.k; ++i) {
      const Box& r = grid.regions[i];
      int y0, y1, x0, x1;
      center_range(r.y1, r.y2, h, y0, y1);
      center_range(r.x1, r.x2, w, x0, x1);
      const int span = x1 - x0;
      if (span <= 0) continue;
      const float* coeff = det.coeffs.data() + static_cast<size_t>(i) * m;
      for (int y = y0; y < y1; ++y) {
        const size_t row0 = static_cast<size_t>(y) * w + x0;
        const float* brow = basis.data() + row0 * m;
        float* srow = im.soft.data() + row0;
        float* crow = im.binary.data() + row0;
        for (int x = 0; x < span; ++x) {
          const float s =
              sigmoid_f(dot_m(brow + static_cast<size_t>(x) * m, coeff, m));
          srow[x] = s;
          crow[x] = s >= thr ? 1.0f : 0.0f;
        }
      }
    }
  }
  return out_;
}

std::vector<InstanceMask> assemble_masks(const Tensor& basis,
                                         const std::vector<Detection>& dets,
                                         const SmpParams& prm) {
  SmpAssembler a;
  auto masks = a.assemble(basis, dets, prm);
  return masks;
}

std::vector<InstanceMask> assemble_masks_via_region_maps(
    const Tensor& basis, const std::vector<Detection>& dets,
    const SmpParams& prm) {
  const int h = basis.dim(0), w = basis.dim(1), m = prm.m;
  const int p = static_cast<int>(dets.size());
  const int ksq = prm.k * prm.k;
  // k^2 coefficient matrices C_i (m x p), column j = c_ij.
  std::vector<Tensor> region_full(ksq);
  for (int i = 0; i < ksq; ++i) {
    Tensor ci({m, p});
    for (int j = 0; j < p; ++j) {
      check_det(dets[j], prm);
      for (int mm = 0; mm < m; ++mm)
        ci.at(mm, j) = dets[j].coeffs[static_cast<size_t>(i) * m + mm];
    }
    region_full[i] = assemble_region_maps(basis, ci);
  }
  std::vector<InstanceMask> out;
  out.reserve(p);
  for (int j = 0; j < p; ++j) {
    const Box bbox = dets[j].box.scaled(1.0 / prm.basis_stride);
    std::vector<Tensor> maps(ksq);
    for (int i = 0; i < ksq; ++i) {
      Tensor mij({h, w});
      for (int px = 0; px < h * w; ++px)
        mij[px] = region_full[i][static_cast<size_t>(px) * p + j];
      maps[i] = std::move(mij);
    }
    InstanceMask im;
    im.soft = assemble_instance(bbox, maps, prm.k);
    im.binary = Tensor({h, w});
    const Tensor thresholded = binarize(im.soft, prm.mask_thr);
    // binary restricted to the box support
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (bbox.contains_center(x + 0.5, y + 0.5))
          im.binary.at(y, x) = thresholded.at(y, x);
    im.box = bbox;
    im.score = dets[j].score;
    im.class_id = dets[j].class_id;
    out.push_back(std::move(im));
  }
  return out;
}

InstanceMask single_coefficient_reference(const Tensor& basis,
                                          const Detection& det,
                                          const SmpParams& prm) {
  SIP_CHECK(static_cast<int>(det.coeffs.size()) == prm.m,
            "single-coefficient reference needs exactly m coefficients");
  const int h = basis.dim(0), w = basis.dim(1), m = prm.m;
  Tensor cmat({m, 1});
  for (int mm = 0; mm < m; ++mm) cmat.at(mm, 0) = det.coeffs[mm];
  const Tensor full = assemble_region_maps(basis, cmat);  // h x w x 1
  Tensor map({h, w});
  for (int px = 0; px < h * w; ++px) map[px] = full[px];
  const Box bbox = det.box.scaled(1.0 / prm.basis_stride);
  InstanceMask im;
  im.soft = prune_support(map, bbox);
  const Tensor thresholded = binarize(im.soft, prm.mask_thr);
  im.binary = Tensor({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (bbox.contains_center(x + 0.5, y + 0.5))
        im.binary.at(y, x) = thresholded.at(y, x);
  im.box = bbox;
  im.score = det.score;
  im.class_id = det.class_id;
  return im;
}

std::vector<InstanceMask> smp_oracle(const Tensor& basis,
                                     const std::vector<Detection>& dets,
                                     const SmpParams& prm) {
  SIP_CHECK(basis.ndim() == 3 && basis.dim(2) == prm.m, "basis must be h x w x m");
  const int h = basis.dim(0), w = basis.dim(1), m = prm.m;
  std::vector<InstanceMask> out;
  out.reserve(dets.size());
  for (const Detection& det : dets) {
    check_det(det, prm);
    const Box bbox = det.box.scaled(1.0 / prm.basis_stride);
    const SubregionGrid grid = subregion_grid(bbox, prm.k);
    InstanceMask im;
    im.soft = Tensor({h, w});
    im.binary = Tensor({h, w});
    im.box = bbox;
    im.score = det.score;
    im.class_id = det.class_id;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int region = subregion_index(grid, x + 0.5, y + 0.5);
        if (region < 0) continue;  // pruned
        double dot = 0.0;
        for (int mm = 0; mm < m; ++mm)
          dot += static_cast<double>(basis.at(y, x, mm)) *
                 static_cast<double>(det.coeffs[static_cast<size_t>(region) * m + mm]);
        const double s = 1.0 / (1.0 + std::exp(-dot));
        im.soft.at(y, x) = static_cast<float>(s);
        im.binary.at(y, x) = s >= prm.mask_thr ? 1.0f : 0.0f;
      }
    }
    out.push_back(std::move(im));
  }
  return out;
}

}  // namespace sipmask
