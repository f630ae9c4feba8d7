#pragma once

#include <utility>
#include <vector>

#include "sipmask/autodiff.hpp"
#include "sipmask/geometry.hpp"

namespace sipmask {

struct LossReport {
  double l_cls = 0;
  double l_reg = 0;
  double l_mask = 0;
  double total = 0;
  int n_pos = 0;

  void check_finite() const {
    SIP_CHECK(std::isfinite(l_cls) && std::isfinite(l_reg) &&
                  std::isfinite(l_mask) && std::isfinite(total),
              "non-finite loss term");
  }
};

template <typename T>
T softplus(T z) {
  return std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z)));
}

// Focal loss summed over locations and classes. logits is [... x C];
// target_class has one entry per location, -1 for background. Stable
// log-sigmoid evaluation, analytic backward.
template <typename T>
VarPtr<T> focal_loss_sum(const VarPtr<T>& logits,
                         std::vector<int> target_class, T gamma, T alpha) {
  const auto& v = logits->value;
  const int c = v.dim(v.ndim() - 1);
  const size_t n = v.size() / static_cast<size_t>(c);
  SIP_CHECK(target_class.size() == n,
            "focal targets " << target_class.size() << " != locations " << n);
  for (int t : target_class)
    SIP_CHECK(t >= -1 && t < c, "focal target class " << t << " out of range");

  double acc = 0;
  for (size_t i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const T z = v[i * c + ch];
      const T lp = -softplus(-z);   // log p
      const T lq = -softplus(z);    // log (1-p)
      const T p = T(1) / (T(1) + std::exp(-z));
      if (target_class[i] == ch)
        acc += static_cast<double>(-alpha * std::pow(T(1) - p, gamma) * lp);
      else
        acc += static_cast<double>(-(T(1) - alpha) * std::pow(p, gamma) * lq);
    }
  }
  TensorT<T> out({1}, std::vector<T>{static_cast<T>(acc)});
  return detail::make_op<T>(
      std::move(out), {logits},
      [logits, target_class = std::move(target_class), gamma, alpha, c,
       n](VarT<T>& self) {
        auto& g = logits->ensure_grad();
        const T go = self.grad[0];
        for (size_t i = 0; i < n; ++i) {
          for (int ch = 0; ch < c; ++ch) {
            const T z = logits->value[i * c + ch];
            const T p = T(1) / (T(1) + std::exp(-z));
            const T lp = -softplus(-z);
            const T lq = -softplus(z);
            T dz;
            if (target_class[i] == ch) {
              // d/dz of -alpha (1-p)^g log p
              dz = alpha * std::pow(T(1) - p, gamma) *
                   (gamma * p * lp - (T(1) - p));
            } else {
              dz = -(T(1) - alpha) * std::pow(p, gamma) *
                   (gamma * (T(1) - p) * lq - p);
            }
            g[i * c + ch] += go * dz;
          }
        }
      });
}

template <typename T>
VarPtr<T> focal_loss(const VarPtr<T>& logits, std::vector<int> target_class,
                     T gamma, T alpha, int n_pos) {
  const T norm = T(1) / static_cast<T>(std::max(n_pos, 1));
  return scale(focal_loss_sum(logits, std::move(target_class), gamma, alpha),
               norm);
}

// -log IoU of predicted vs ground-truth ltrb tuples sharing their anchor
// points, summed. pred is [n x 4] (l,t,r,b all > 0), gt a constant tensor of
// the same shape.
template <typename T>
VarPtr<T> iou_loss_sum(const VarPtr<T>& pred, const TensorT<T>& gt) {
  const auto& pv = pred->value;
  SIP_CHECK(pv.ndim() == 2 && pv.dim(1) == 4, "iou loss pred must be n x 4");
  SIP_CHECK(gt.same_shape(pv), "iou loss gt shape mismatch");
  const int n = pv.dim(0);
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    const T* p = pv.data() + static_cast<size_t>(i) * 4;
    const T* q = gt.data() + static_cast<size_t>(i) * 4;
    const T area_g = (q[0] + q[2]) * (q[1] + q[3]);
    SIP_CHECK(area_g > T(0), "zero-area ground truth in iou loss");
    const T area_p = (p[0] + p[2]) * (p[1] + p[3]);
    const T iw = std::min(p[0], q[0]) + std::min(p[2], q[2]);
    const T ih = std::min(p[1], q[1]) + std::min(p[3], q[3]);
    const T inter = iw * ih;
    const T uni = area_p + area_g - inter;
    acc += static_cast<double>(std::log(uni) - std::log(inter));
  }
  TensorT<T> out({1}, std::vector<T>{static_cast<T>(acc)});
  return detail::make_op<T>(std::move(out), {pred}, [pred, gt, n](VarT<T>& self) {
    auto& g = pred->ensure_grad();
    const T go = self.grad[0];
    for (int i = 0; i < n; ++i) {
      const T* p = pred->value.data() + static_cast<size_t>(i) * 4;
      const T* q = gt.data() + static_cast<size_t>(i) * 4;
      const T area_g = (q[0] + q[2]) * (q[1] + q[3]);
      const T area_p = (p[0] + p[2]) * (p[1] + p[3]);
      const T iw = std::min(p[0], q[0]) + std::min(p[2], q[2]);
      const T ih = std::min(p[1], q[1]) + std::min(p[3], q[3]);
      const T inter = iw * ih;
      const T uni = area_p + area_g - inter;
      // d(area_p)/d{l,r} = t+b, d/d{t,b} = l+r; d(iw)/dl = [l < l'] etc.
      const T dap[4] = {p[1] + p[3], p[0] + p[2], p[1] + p[3], p[0] + p[2]};
      const T dinter[4] = {p[0] < q[0] ? ih : T(0), p[1] < q[1] ? iw : T(0),
                           p[2] < q[2] ? ih : T(0), p[3] < q[3] ? iw : T(0)};
      T* gr = g.data() + static_cast<size_t>(i) * 4;
      for (int d = 0; d < 4; ++d) {
        const T du = dap[d] - dinter[d];
        gr[d] += go * (du / uni - dinter[d] / inter);
      }
    }
  });
}

template <typename T>
VarPtr<T> iou_loss(const VarPtr<T>& pred, const TensorT<T>& gt, int n_pos) {
  return scale(iou_loss_sum(pred, gt), T(1) / static_cast<T>(std::max(n_pos, 1)));
}

// Pixel-mean binary cross entropy on logits.
template <typename T>
VarPtr<T> bce_with_logits_mean(const VarPtr<T>& logits, const TensorT<T>& targets) {
  const size_t n = logits->value.size();
  SIP_CHECK(targets.size() == n, "bce target size mismatch");
  SIP_CHECK(n > 0, "bce over empty set");
  double acc = 0;
  for (size_t i = 0; i < n; ++i) {
    const T z = logits->value[i];
    acc += static_cast<double>(softplus(z) - z * targets[i]);
  }
  TensorT<T> out({1}, std::vector<T>{static_cast<T>(acc / static_cast<double>(n))});
  return detail::make_op<T>(std::move(out), {logits}, [logits, targets, n](VarT<T>& self) {
    auto& g = logits->ensure_grad();
    const T go = self.grad[0] / static_cast<T>(n);
    for (size_t i = 0; i < n; ++i) {
      const T p = T(1) / (T(1) + std::exp(-logits->value[i]));
      g[i] += go * (p - targets[i]);
    }
  });
}

// Pre-sigmoid instance logits over the pixels of one box: each pixel center
// inside the box takes the dot of its basis vector with the coefficient
// block of its sub-region. Returns the logits plus the enumerated pixel
// coordinates (row-major), so the caller can build matching targets.
template <typename T>
struct BoxLogits {
  VarPtr<T> logits;                          // [n_pixels]
  std::vector<std::pair<int, int>> pixels;   // (y, x) per logit
};

template <typename T>
BoxLogits<T> assemble_box_logits(const VarPtr<T>& basis, const VarPtr<T>& coeffs,
                                 const Box& box, int k, int m) {
  const auto& bv = basis->value;
  SIP_CHECK(bv.ndim() == 3 && bv.dim(2) == m, "basis must be h x w x m");
  SIP_CHECK(coeffs->value.size() == static_cast<size_t>(k) * k * m,
            "coefficient vector must be k^2*m");
  const int h = bv.dim(0), w = bv.dim(1);
  const SubregionGrid grid = subregion_grid(box, k);

  std::vector<std::pair<int, int>> pixels;
  std::vector<int> regions;
  for (int y = 0; y < h; ++y) {
    const double cy = y + 0.5;
    if (cy < box.y1 || cy >= box.y2) continue;
    for (int x = 0; x < w; ++x) {
      const int r = subregion_index(grid, x + 0.5, cy);
      if (r < 0) continue;
      pixels.emplace_back(y, x);
      regions.push_back(r);
    }
  }
  const size_t n = pixels.size();
  TensorT<T> out({static_cast<int>(n)});
  for (size_t i = 0; i < n; ++i) {
    const T* brow =
        bv.data() + (static_cast<size_t>(pixels[i].first) * w + pixels[i].second) * m;
    const T* c = coeffs->value.data() + static_cast<size_t>(regions[i]) * m;
    T acc = 0;
    for (int mm = 0; mm < m; ++mm) acc += brow[mm] * c[mm];
    out[i] = acc;
  }
  BoxLogits<T> res;
  res.pixels = pixels;
  res.logits = detail::make_op<T>(
      std::move(out), {basis, coeffs},
      [basis, coeffs, pixels, regions, w, m](VarT<T>& self) {
        T* gb = basis->requires_grad ? basis->ensure_grad().data() : nullptr;
        T* gc = coeffs->requires_grad ? coeffs->ensure_grad().data() : nullptr;
        for (size_t i = 0; i < pixels.size(); ++i) {
          const T go = self.grad[i];
          const size_t boff =
              (static_cast<size_t>(pixels[i].first) * w + pixels[i].second) * m;
          const size_t coff = static_cast<size_t>(regions[i]) * m;
          if (gb) {
            const T* c = coeffs->value.data() + coff;
            for (int mm = 0; mm < m; ++mm) gb[boff + mm] += go * c[mm];
          }
          if (gc) {
            const T* b = basis->value.data() + boff;
            for (int mm = 0; mm < m; ++mm) gc[coff + mm] += go * b[mm];
          }
        }
      });
  return res;
}

// alpha_j = o_j * s_j, treated as a constant during training.
inline double alignment_weight(double overlap, double score) {
  SIP_CHECK(overlap >= 0 && overlap <= 1, "overlap must be in [0,1]");
  SIP_CHECK(score >= 0 && score <= 1, "score must be in [0,1]");
  return overlap * score;
}

// L_mask = (1/N) sum_j alpha_j * l_j from per-instance pixel-mean BCE terms.
template <typename T>
VarPtr<T> mask_loss(const std::vector<VarPtr<T>>& per_instance_bce,
                    const std::vector<double>& alphas, int n_pos) {
  SIP_CHECK(per_instance_bce.size() == alphas.size(),
            "mask loss weight count mismatch");
  const T norm = T(1) / static_cast<T>(std::max(n_pos, 1));
  if (per_instance_bce.empty()) return make_scalar<T>(T(0));
  std::vector<VarPtr<T>> weighted;
  weighted.reserve(per_instance_bce.size());
  for (size_t j = 0; j < per_instance_bce.size(); ++j)
    weighted.push_back(scale(per_instance_bce[j], static_cast<T>(alphas[j]) * norm));
  return add_n(weighted);
}

// Value-level mask loss on soft probability maps, for oracle-style checks:
// l_j = pixel-mean BCE over the ground-truth box region.
double mask_loss_value(const std::vector<Tensor>& soft_masks,
                       const std::vector<Tensor>& gt_masks,
                       const std::vector<Box>& gt_boxes,
                       const std::vector<double>& alphas, int n_pos);

}  // namespace sipmask
