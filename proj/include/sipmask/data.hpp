#pragma once

#include <cstdint>
#include <vector>

#include "sipmask/geometry.hpp"
#include "sipmask/rng.hpp"
#include "sipmask/tensor.hpp"

namespace sipmask {

// Classes: 0 = rectangle, 1 = ellipse, 2 = triangle.
constexpr int kNumShapeClasses = 3;

struct SceneInstance {
  int class_id = 0;
  Box box;       // tight bounding box of the visible mask
  Tensor mask;   // H x W in {0,1}, visible region only
  int gt_id = 0; // persistent identity within a video
};

struct Scene {
  Tensor image;  // H x W x 3 in [0,1]
  std::vector<SceneInstance> instances;
};

struct SceneGenParams {
  int height = 64;
  int width = 64;
  int min_shapes = 2;
  int max_shapes = 5;
  double overlap_bias = 0.8;  // probability a new shape is placed adjacent
  double min_radius = 6.0;
  double max_radius = 13.0;
};

// Deterministic per seed. Shapes are painted in order; later shapes occlude
// earlier ones and gt masks keep only the visible region. overlap_bias = 0
// guarantees pairwise-disjoint boxes (rejection sampling).
Scene gen_scene(uint64_t seed, const SceneGenParams& p);

// True when any two instances' boxes overlap (the adjacency measure frozen
// at generator-design time).
bool has_adjacent_pair(const Scene& scene);

struct VideoGenParams {
  SceneGenParams scene;
  int n_frames = 20;
  double min_speed = 0.5;   // pixels per frame
  double max_speed = 2.0;
};

// Shapes translate linearly with per-instance velocity; gt ids persist;
// shapes may cross. Instances whose visible mask vanishes in a frame are
// dropped for that frame only.
std::vector<Scene> gen_video(uint64_t seed, const VideoGenParams& p);

// Constructed fixtures for the matcher.
std::vector<Scene> gen_video_noncrossing(uint64_t seed, int n_frames,
                                         int n_shapes, int height = 64,
                                         int width = 64);
std::vector<Scene> gen_video_crossing(uint64_t seed, int n_frames,
                                      int height = 64, int width = 64);

// 8-bit RGB render of a scene with instance outlines, for previews.
std::vector<uint8_t> render_scene_rgb(const Scene& scene);

}  // namespace sipmask
