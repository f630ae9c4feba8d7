#pragma once

#include "sipmask/heads.hpp"
#include "sipmask/smp.hpp"

namespace sipmask {

// Greedy descending-score suppression per class; a detection is dropped when
// its IoU with an already-kept detection of the same class exceeds iou_thr.
// Ties in score break deterministically by lower input index.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_thr);

// n highest-score detections, non-increasing score order, score ties broken
// by lower input index.
std::vector<Detection> select_top(std::vector<Detection> dets, int n);

struct InferResult {
  std::vector<Detection> detections;
  std::vector<InstanceMask> masks;
};

// Forward pass -> score filter -> per-class NMS -> top-n -> coefficient
// gather at the surviving locations -> SMP assembly -> binarize.
InferResult infer(const SipMaskModel<float>& model, const Tensor& image,
                  const Config& cfg, bool use_oracle_smp = false);

// Detection extraction without mask assembly (shared by infer and tests).
std::vector<Detection> detect(const ForwardResult<float>& fwd,
                              const Config& cfg);

}  // namespace sipmask
