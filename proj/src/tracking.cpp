#include "sipmask/tracking.hpp"

#include <cmath>
#include <limits>

#include "sipmask/nn_ops.hpp"

namespace sipmask {

std::vector<float> extract_track_vector(const Tensor& track_maps,
                                        const Box& box, double track_stride) {
  SIP_CHECK(track_maps.ndim() == 3, "track maps must be H x W x d");
  const double gy = box.cy() / track_stride - 0.5;
  const double gx = box.cx() / track_stride - 0.5;
  return bilinear_sample(track_maps, gy, gx);
}

std::vector<std::vector<double>> match_score_matrix(
    const std::vector<TrackState>& tracks, const std::vector<Detection>& dets,
    const std::vector<std::vector<float>>& det_features, const Config& cfg) {
  SIP_CHECK(dets.size() == det_features.size(),
            "detections/features count mismatch");
  const size_t nt = tracks.size(), nd = dets.size();
  std::vector<std::vector<double>> scores(nt, std::vector<double>(nd, 0.0));
  if (nt == 0 || nd == 0) return scores;

  for (size_t d = 0; d < nd; ++d) {
    // log-softmax of appearance affinities over tracks for this detection
    std::vector<double> aff(nt);
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t t = 0; t < nt; ++t) {
      SIP_CHECK(tracks[t].feature.size() == det_features[d].size(),
                "feature dim mismatch");
      double dot = 0;
      for (size_t i = 0; i < det_features[d].size(); ++i)
        dot += static_cast<double>(tracks[t].feature[i]) *
               static_cast<double>(det_features[d][i]);
      aff[t] = dot;
      mx = std::max(mx, dot);
    }
    double lse = 0;
    for (size_t t = 0; t < nt; ++t) lse += std::exp(aff[t] - mx);
    lse = mx + std::log(lse);
    for (size_t t = 0; t < nt; ++t) {
      double s = aff[t] - lse;
      s += cfg.lambda_iou * iou(tracks[t].last_box, dets[d].box);
      s += cfg.lambda_class * (tracks[t].class_id == dets[d].class_id ? 1.0 : 0.0);
      s += cfg.lambda_score * dets[d].score;
      scores[t][d] = s;
    }
  }
  return scores;
}

MatchOutcome VideoTracker::update(
    const std::vector<Detection>& dets,
    const std::vector<std::vector<float>>& det_features) {
  const auto scores = match_score_matrix(tracks_, dets, det_features, cfg_);
  const size_t nt = tracks_.size(), nd = dets.size();

  MatchOutcome out;
  out.det_track_ids.assign(nd, -1);
  out.is_new.assign(nd, false);
  std::vector<bool> track_used(nt, false), det_used(nd, false);
  std::vector<int> det_to_track(nd, -1);

  // Greedy best-first; deterministic tie-break by lower track then lower
  // detection index.
  for (size_t round = 0; round < std::min(nt, nd); ++round) {
    double best = -std::numeric_limits<double>::infinity();
    int bt = -1, bd = -1;
    for (size_t t = 0; t < nt; ++t) {
      if (track_used[t]) continue;
      for (size_t d = 0; d < nd; ++d) {
        if (det_used[d]) continue;
        if (scores[t][d] > best) {
          best = scores[t][d];
          bt = static_cast<int>(t);
          bd = static_cast<int>(d);
        }
      }
    }
    if (bt < 0 || best < cfg_.theta_new) break;
    track_used[static_cast<size_t>(bt)] = true;
    det_used[static_cast<size_t>(bd)] = true;
    det_to_track[static_cast<size_t>(bd)] = bt;
  }

  // Matched tracks: EMA feature update, refresh geometry.
  for (size_t d = 0; d < nd; ++d) {
    const int t = det_to_track[d];
    if (t < 0) continue;
    TrackState& ts = tracks_[static_cast<size_t>(t)];
    const double mu = cfg_.ema_momentum;
    for (size_t i = 0; i < ts.feature.size(); ++i)
      ts.feature[i] = static_cast<float>(mu * ts.feature[i] +
                                         (1.0 - mu) * det_features[d][i]);
    ts.last_box = dets[d].box;
    ts.class_id = dets[d].class_id;
    ts.age = 0;
    ts.score = dets[d].score;
    out.det_track_ids[d] = ts.track_id;
  }

  // Unmatched detections open new tracks.
  for (size_t d = 0; d < nd; ++d) {
    if (det_to_track[d] >= 0) continue;
    TrackState ts;
    ts.track_id = next_id_++;
    ts.feature = det_features[d];
    ts.last_box = dets[d].box;
    ts.class_id = dets[d].class_id;
    ts.age = 0;
    ts.score = dets[d].score;
    tracks_.push_back(std::move(ts));
    out.det_track_ids[d] = tracks_.back().track_id;
    out.is_new[d] = true;
  }

  // Unmatched tracks age; retire old ones.
  std::vector<TrackState> alive;
  alive.reserve(tracks_.size());
  for (size_t t = 0; t < tracks_.size(); ++t) {
    const bool matched = t < nt ? track_used[t] : true;  // new tracks stay
    if (!matched) {
      tracks_[t].age += 1;
      if (tracks_[t].age >= cfg_.retire_age) continue;
    }
    alive.push_back(std::move(tracks_[t]));
  }
  tracks_ = std::move(alive);
  return out;
}

}  // namespace sipmask
