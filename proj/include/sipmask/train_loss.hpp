#pragma once

#include "sipmask/assign.hpp"
#include "sipmask/data.hpp"
#include "sipmask/heads.hpp"
#include "sipmask/losses.hpp"

namespace sipmask {

template <typename T>
struct SceneLoss {
  VarPtr<T> total;
  LossReport report;
};

// L = L_reg + L_cls + L_mask on one scene. Classification uses focal loss
// over every location, regression -log IoU over positives, and the mask term
// is alignment-weighted BCE over each positive's gt box. All three terms
// share the positive count N. Positives beyond pos_cap are subsampled with
// the given rng (mask term only; cls/reg always see all of them).
template <typename T>
SceneLoss<T> build_scene_loss(const SipMaskModel<T>& model, const Scene& scene,
                              Rng& step_rng) {
  const Config& cfg = model.config();
  const TensorT<T> image = scene.image.template cast<T>();
  const ForwardResult<T> fwd = model.forward(image);

  std::vector<Box> gt_boxes;
  std::vector<int> gt_classes;
  for (const auto& inst : scene.instances) {
    gt_boxes.push_back(inst.box);
    gt_classes.push_back(inst.class_id);
  }
  const AssignmentResult assign = assign_targets(gt_boxes, gt_classes, cfg);
  const int n_pos = std::max(assign.n_pos, 1);
  const T inv_n = T(1) / static_cast<T>(n_pos);

  // Classification: focal loss over all locations of all levels.
  std::vector<VarPtr<T>> cls_terms;
  for (size_t l = 0; l < fwd.levels.size(); ++l)
    cls_terms.push_back(focal_loss_sum<T>(fwd.levels[l].cls_logits,
                                          assign.levels[l].class_target,
                                          T(2), T(0.25)));
  VarPtr<T> l_cls = scale(add_n(cls_terms), inv_n);

  // Regression: -log IoU at the positive locations, grouped per level.
  std::vector<VarPtr<T>> reg_terms;
  for (size_t l = 0; l < fwd.levels.size(); ++l) {
    std::vector<std::pair<int, int>> locs;
    std::vector<T> gt_flat;
    const auto& la = assign.levels[l];
    for (int y = 0; y < la.h; ++y)
      for (int x = 0; x < la.w; ++x) {
        const size_t idx = static_cast<size_t>(y) * la.w + x;
        if (la.gt_index[idx] < 0) continue;
        locs.emplace_back(y, x);
        const LTRBOffsets& o = la.ltrb_target[idx];
        gt_flat.insert(gt_flat.end(),
                       {static_cast<T>(o.l), static_cast<T>(o.t),
                        static_cast<T>(o.r), static_cast<T>(o.b)});
      }
    if (locs.empty()) continue;
    auto pred = gather_locations(fwd.levels[l].ltrb, locs);
    TensorT<T> gt({static_cast<int>(locs.size()), 4}, std::move(gt_flat));
    reg_terms.push_back(iou_loss_sum(pred, gt));
  }
  VarPtr<T> l_reg = reg_terms.empty()
                        ? make_scalar<T>(T(0))
                        : scale(add_n(reg_terms), inv_n);

  // Mask term: alignment-weighted per-instance BCE over the gt box.
  std::vector<size_t> sampled(assign.positives.size());
  for (size_t i = 0; i < sampled.size(); ++i) sampled[i] = i;
  if (static_cast<int>(sampled.size()) > cfg.pos_cap) {
    shuffle(sampled, step_rng);
    sampled.resize(static_cast<size_t>(cfg.pos_cap));
    std::sort(sampled.begin(), sampled.end());
  }

  const double bs = cfg.basis_stride();
  std::vector<VarPtr<T>> bces;
  std::vector<double> alphas;
  for (size_t si : sampled) {
    const auto& pos = assign.positives[si];
    const auto& lev = fwd.levels[static_cast<size_t>(pos.level)];
    const SceneInstance& inst = scene.instances[static_cast<size_t>(pos.gt)];

    auto coeffs = gather_yx(lev.coeffs, pos.y, pos.x);
    const Box box_basis = inst.box.scaled(1.0 / bs);
    BoxLogits<T> bl =
        assemble_box_logits(fwd.basis, coeffs, box_basis, cfg.k, cfg.m);
    if (bl.pixels.empty()) continue;

    TensorT<T> targets({static_cast<int>(bl.pixels.size())});
    for (size_t i = 0; i < bl.pixels.size(); ++i) {
      // basis pixel center back to the gt mask's image grid
      const int iy = std::min(scene.image.dim(0) - 1,
                              static_cast<int>((bl.pixels[i].first + 0.5) * bs));
      const int ix = std::min(scene.image.dim(1) - 1,
                              static_cast<int>((bl.pixels[i].second + 0.5) * bs));
      targets[i] = static_cast<T>(inst.mask.at(iy, ix));
    }
    bces.push_back(bce_with_logits_mean(bl.logits, targets));

    double alpha = 1.0;
    if (cfg.weighting_loss) {
      const auto& ltrb = lev.ltrb->value;
      const float* lr =
          ltrb.data() + (static_cast<size_t>(pos.y) * ltrb.dim(1) + pos.x) * 4;
      const double px = (pos.x + 0.5) * lev.stride;
      const double py = (pos.y + 0.5) * lev.stride;
      const Box pred_box = ltrb_decode(
          px, py,
          {static_cast<double>(lr[0]), static_cast<double>(lr[1]),
           static_cast<double>(lr[2]), static_cast<double>(lr[3])});
      const double o = iou(pred_box, inst.box);
      const double s =
          1.0 / (1.0 + std::exp(-static_cast<double>(
                           lev.cls_logits->value.at(pos.y, pos.x, inst.class_id))));
      alpha = alignment_weight(o, s);
    }
    alphas.push_back(alpha);
  }
  VarPtr<T> l_mask = mask_loss(bces, alphas, n_pos);

  SceneLoss<T> out;
  out.total = add(add(l_cls, l_reg), l_mask);
  out.report.l_cls = static_cast<double>(l_cls->value[0]);
  out.report.l_reg = static_cast<double>(l_reg->value[0]);
  out.report.l_mask = static_cast<double>(l_mask->value[0]);
  out.report.total = static_cast<double>(out.total->value[0]);
  out.report.n_pos = assign.n_pos;
  out.report.check_finite();
  return out;
}

}  // namespace sipmask
