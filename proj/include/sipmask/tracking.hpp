#pragma once

#include <vector>

#include "sipmask/config.hpp"
#include "sipmask/geometry.hpp"
#include "sipmask/smp.hpp"
#include "sipmask/tensor.hpp"

namespace sipmask {

struct TrackState {
  int track_id = 0;
  std::vector<float> feature;  // appearance vector, EMA-updated on match
  Box last_box;
  int class_id = 0;
  int age = 0;  // frames since last match
  double score = 0;
};

// Appearance vector bilinearly sampled from the tracking feature maps at the
// box center. track_stride maps image coordinates to track-map grid units.
// Centers outside the map read as zero (zero-padding convention).
std::vector<float> extract_track_vector(const Tensor& track_maps,
                                        const Box& box, double track_stride);

struct MatchOutcome {
  // per detection: matched track_id (new tracks get fresh ids)
  std::vector<int> det_track_ids;
  // per detection: true when it opened a new track
  std::vector<bool> is_new;
};

// Cross-frame matcher. score(t,d) = log-softmax appearance affinity over
// tracks + lambda_iou * IoU(last box, det box) + lambda_class * [class match]
// + lambda_score * det score. Greedy best-first, injective both ways;
// pairs scoring below theta_new are rejected and the detection opens a new
// track. Unmatched tracks age and retire after retire_age frames.
class VideoTracker {
 public:
  explicit VideoTracker(const Config& cfg) : cfg_(cfg) {}

  MatchOutcome update(const std::vector<Detection>& dets,
                      const std::vector<std::vector<float>>& det_features);

  const std::vector<TrackState>& tracks() const { return tracks_; }

 private:
  Config cfg_;
  std::vector<TrackState> tracks_;
  int next_id_ = 1;
};

// Score matrix alone (tracks x detections), exposed for tests.
std::vector<std::vector<double>> match_score_matrix(
    const std::vector<TrackState>& tracks, const std::vector<Detection>& dets,
    const std::vector<std::vector<float>>& det_features, const Config& cfg);

}  // namespace sipmask
