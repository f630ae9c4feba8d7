#pragma once

#include <map>
#include <string>
#include <vector>

#include "sipmask/geometry.hpp"
#include "sipmask/tensor.hpp"

namespace sipmask {

struct EvalPrediction {
  int image_id = 0;
  int class_id = 0;
  double score = 0;
  Tensor mask;  // binary {0,1}
};

struct EvalGroundTruth {
  int image_id = 0;
  int class_id = 0;
  Tensor mask;  // binary {0,1}
};

struct APReport {
  double ap = 0;    // mean over IoU thresholds 0.50:0.05:0.95 and classes
  double ap50 = 0;
  double ap75 = 0;
  std::map<int, double> per_class;  // mean over thresholds
  // 101-point interpolated precision at threshold 0.5 per class
  std::map<int, std::vector<double>> pr_curves;
};

std::vector<double> default_iou_thresholds();

double mask_iou(const Tensor& a, const Tensor& b);

// COCO-style greedy score-ordered matching per class and threshold, each gt
// matched at most once, 101-point interpolated precision.
APReport mask_ap(const std::vector<EvalPrediction>& preds,
                 const std::vector<EvalGroundTruth>& gts,
                 const std::vector<double>& iou_thresholds);

// Independently written evaluator that recomputes everything from scratch
// per threshold (fresh IoUs, full rescans, naive interpolation). Same
// matching rule; used as the fidelity oracle on small fixtures.
APReport mask_ap_exhaustive(const std::vector<EvalPrediction>& preds,
                            const std::vector<EvalGroundTruth>& gts,
                            const std::vector<double>& iou_thresholds);

std::string ap_report_to_json(const APReport& rep);

// Tracking identity metric: fraction of (frame, gt-instance) pairs whose
// matched prediction carries the majority track id of that gt over the
// whole video. Empty videos score 1.
struct FrameTrack {
  int track_id = 0;
  int class_id = 0;
  Box box;
};

struct FrameGt {
  int gt_id = 0;
  Box box;
};

double identity_consistency(const std::vector<std::vector<FrameTrack>>& tracks,
                            const std::vector<std::vector<FrameGt>>& gt_video,
                            double match_iou = 0.5);

}  // namespace sipmask
