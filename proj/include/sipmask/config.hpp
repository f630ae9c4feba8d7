#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sipmask {

// Every hyperparameter surfaced by the paper plus the toy-scale knobs.
// Parsed from flat JSON with strict unknown-key rejection.
struct Config {
  // model
  int image_size = 64;
  int classes = 3;
  int channels = 32;
  int tower_depth = 2;
  int k = 2;    // sub-region grid is k x k
  int m = 32;   // basis mask channels
  int track_dim = 32;
  int base_stride = 4;  // P3 stride; P3..P7 at s,2s,4s,8s,16s
  int basis_upsample = 4;
  // per-level scale windows on max(l,t,r,b), image pixels; last is open-ended
  std::vector<double> scale_edges = {0, 32, 64, 128, 256};

  // training
  uint64_t seed = 1;
  double lr = 0.01;
  double momentum = 0.9;
  int steps = 2000;
  int pos_cap = 64;
  bool weighting_loss = true;
  int train_scenes = 2000;
  int eval_scenes = 500;
  double overlap_bias = 0.8;
  int min_shapes = 2;
  int max_shapes = 5;
  int ckpt_interval = 1000;

  // inference
  double score_thr = 0.05;
  double nms_iou = 0.5;
  int top_n = 100;
  double mask_thr = 0.5;  // binarization threshold tau

  // tracking
  double lambda_iou = 1.0;
  double lambda_class = 1.0;
  double lambda_score = 1.0;
  double theta_new = 0.0;
  int retire_age = 8;
  double ema_momentum = 0.9;

  int num_levels() const { return 5; }
  int level_stride(int level) const { return base_stride << level; }
  int max_stride() const { return base_stride << 4; }
  // basis stride maps image pixels to basis pixels
  double basis_stride() const {
    return static_cast<double>(base_stride) / basis_upsample;
  }

  void validate() const;
};

// Strict parse: unknown keys are an error (invalid_argument).
Config parse_config_json(const std::string& json_text);
Config load_config_file(const std::string& path);
std::string config_to_json(const Config& cfg);

}  // namespace sipmask
