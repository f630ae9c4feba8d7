#include "sipmask/infer.hpp"

#include <algorithm>
#include <numeric>

namespace sipmask {

namespace {

std::vector<size_t> score_order(const std::vector<Detection>& dets) {
  std::vector<size_t> idx(dets.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return dets[a].score > dets[b].score;
  });
  return idx;
}

}  // namespace

std::vector<Detection> nms(std::vector<Detection> dets, double iou_thr) {
  const auto order = score_order(dets);
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (size_t i : order) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.class_id != dets[i].class_id) continue;
      if (iou(k.box, dets[i].box) > iou_thr) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(std::move(dets[i]));
  }
  return kept;
}

std::vector<Detection> select_top(std::vector<Detection> dets, int n) {
  const auto order = score_order(dets);
  std::vector<Detection> out;
  out.reserve(std::min<size_t>(dets.size(), static_cast<size_t>(n)));
  for (size_t i : order) {
    if (static_cast<int>(out.size()) >= n) break;
    out.push_back(std::move(dets[i]));
  }
  return out;
}

std::vector<Detection> detect(const ForwardResult<float>& fwd,
                              const Config& cfg) {
  std::vector<Detection> dets;
  for (size_t l = 0; l < fwd.levels.size(); ++l) {
    const auto& lev = fwd.levels[l];
    const Tensor& cls = lev.cls_logits->value;
    const Tensor& ltrb = lev.ltrb->value;
    const int h = cls.dim(0), w = cls.dim(1), c = cls.dim(2);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float* lrow = ltrb.data() + (static_cast<size_t>(y) * w + x) * 4;
        for (int ch = 0; ch < c; ++ch) {
          const double score =
              1.0 / (1.0 + std::exp(-static_cast<double>(cls.at(y, x, ch))));
          if (score < cfg.score_thr) continue;
          Detection d;
          const double px = (x + 0.5) * lev.stride;
          const double py = (y + 0.5) * lev.stride;
          d.box = ltrb_decode(px, py,
                              {lrow[0], lrow[1], lrow[2], lrow[3]});
          d.score = score;
          d.class_id = ch;
          d.level = static_cast<int>(l);
          d.loc_y = y;
          d.loc_x = x;
          dets.push_back(std::move(d));
        }
      }
    }
  }
  return dets;
}

InferResult infer(const SipMaskModel<float>& model, const Tensor& image,
                  const Config& cfg, bool use_oracle_smp) {
  const ForwardResult<float> fwd = model.forward(image);
  std::vector<Detection> dets = detect(fwd, cfg);
  dets = nms(std::move(dets), cfg.nms_iou);
  dets = select_top(std::move(dets), cfg.top_n);

  // Gather the surviving locations' spatial coefficients.
  for (Detection& d : dets) {
    const Tensor& coeffs = fwd.levels[static_cast<size_t>(d.level)].coeffs->value;
    const int cdim = coeffs.dim(2);
    const float* base =
        coeffs.data() + (static_cast<size_t>(d.loc_y) * coeffs.dim(1) + d.loc_x) * cdim;
    d.coeffs.assign(base, base + cdim);
  }

  SmpParams prm;
  prm.k = cfg.k;
  prm.m = cfg.m;
  prm.mask_thr = cfg.mask_thr;
  prm.basis_stride = cfg.basis_stride();

  InferResult out;
  out.masks = use_oracle_smp ? smp_oracle(fwd.basis->value, dets, prm)
                             : assemble_masks(fwd.basis->value, dets, prm);
  out.detections = std::move(dets);
  return out;
}

}  // namespace sipmask
