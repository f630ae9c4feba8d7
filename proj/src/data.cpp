#include "sipmask/data.hpp"

#include <algorithm>
#include <cmath>

namespace sipmask {

namespace {

struct ShapeSpec {
  int class_id = 0;
  double cx = 0, cy = 0, rx = 0, ry = 0;
  float color[3] = {0, 0, 0};
};

bool inside_shape(const ShapeSpec& s, double px, double py) {
  switch (s.class_id) {
    case 0:  // rectangle, half-open
      return px >= s.cx - s.rx && px < s.cx + s.rx && py >= s.cy - s.ry &&
             py < s.cy + s.ry;
    case 1: {  // ellipse
      const double dx = (px - s.cx) / s.rx, dy = (py - s.cy) / s.ry;
      return dx * dx + dy * dy <= 1.0;
    }
    default: {  // triangle: apex up, base down
      const double ax = s.cx, ay = s.cy - s.ry;
      const double bx = s.cx - s.rx, by = s.cy + s.ry;
      const double cx2 = s.cx + s.rx, cy2 = s.cy + s.ry;
      auto side = [](double x1, double y1, double x2, double y2, double px2,
                     double py2) {
        return (x2 - x1) * (py2 - y1) - (y2 - y1) * (px2 - x1);
      };
      const double d1 = side(ax, ay, bx, by, px, py);
      const double d2 = side(bx, by, cx2, cy2, px, py);
      const double d3 = side(cx2, cy2, ax, ay, px, py);
      const bool has_neg = d1 < 0 || d2 < 0 || d3 < 0;
      const bool has_pos = d1 > 0 || d2 > 0 || d3 > 0;
      return !(has_neg && has_pos);
    }
  }
}

Box shape_box(const ShapeSpec& s) {
  return {s.cx - s.rx, s.cy - s.ry, s.cx + s.rx, s.cy + s.ry};
}

constexpr float kClassColors[3][3] = {
    {0.82f, 0.26f, 0.22f}, {0.22f, 0.72f, 0.32f}, {0.26f, 0.38f, 0.86f}};

std::vector<ShapeSpec> layout_shapes(Rng& rng, const SceneGenParams& p,
                                     int n_shapes) {
  std::vector<ShapeSpec> shapes;
  for (int i = 0; i < n_shapes; ++i) {
    ShapeSpec s;
    s.class_id = static_cast<int>(rng.uniform_int(0, kNumShapeClasses - 1));
    s.rx = rng.uniform(p.min_radius, p.max_radius);
    s.ry = rng.uniform(p.min_radius, p.max_radius);
    for (int c = 0; c < 3; ++c)
      s.color[c] = static_cast<float>(std::clamp(
          kClassColors[s.class_id][c] + rng.uniform(-0.15, 0.15), 0.0, 1.0));

    auto uniform_center = [&]() {
      s.cx = rng.uniform(s.rx + 1, p.width - s.rx - 1);
      s.cy = rng.uniform(s.ry + 1, p.height - s.ry - 1);
    };

    if (i > 0 && rng.bernoulli(p.overlap_bias)) {
      // Place adjacent to a previous shape: both axis gaps below the sum of
      // half-extents, so the boxes overlap before clamping.
      const ShapeSpec& anchor =
          shapes[static_cast<size_t>(rng.uniform_int(0, i - 1))];
      const double fx = rng.uniform(0.35, 0.85) * (rng.bernoulli(0.5) ? 1 : -1);
      const double fy = rng.uniform(0.35, 0.85) * (rng.bernoulli(0.5) ? 1 : -1);
      s.cx = anchor.cx + fx * (anchor.rx + s.rx);
      s.cy = anchor.cy + fy * (anchor.ry + s.ry);
      s.cx = std::clamp(s.cx, s.rx + 1, p.width - s.rx - 1);
      s.cy = std::clamp(s.cy, s.ry + 1, p.height - s.ry - 1);
    } else if (p.overlap_bias == 0.0) {
      // Disjoint boxes by rejection (1px gap).
      bool placed = false;
      for (int attempt = 0; attempt < 400 && !placed; ++attempt) {
        uniform_center();
        const Box nb = shape_box(s);
        placed = true;
        for (const auto& prev : shapes) {
          const Box pb = shape_box(prev);
          if (nb.x1 < pb.x2 + 1 && pb.x1 < nb.x2 + 1 && nb.y1 < pb.y2 + 1 &&
              pb.y1 < nb.y2 + 1) {
            placed = false;
            break;
          }
        }
      }
      if (!placed) continue;  // skip this shape, scene stays valid
    } else {
      uniform_center();
    }
    shapes.push_back(s);
  }
  return shapes;
}

// Rasterizes shapes (later occludes earlier), builds visible-region masks
// and tight boxes. Shapes whose visible mask is empty are dropped.
Scene render_frame(const std::vector<ShapeSpec>& shapes,
                   const std::vector<int>& gt_ids, int height, int width,
                   const float bg[2][3], Rng& noise_rng) {
  Scene scene;
  scene.image = Tensor({height, width, 3});
  std::vector<int> id_map(static_cast<size_t>(height) * width, -1);

  for (int y = 0; y < height; ++y) {
    const double ty = static_cast<double>(y) / std::max(1, height - 1);
    for (int x = 0; x < width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      int owner = -1;
      for (size_t i = 0; i < shapes.size(); ++i)
        if (inside_shape(shapes[i], px, py)) owner = static_cast<int>(i);
      id_map[static_cast<size_t>(y) * width + x] = owner;
      for (int c = 0; c < 3; ++c) {
        float v = owner >= 0
                      ? shapes[static_cast<size_t>(owner)].color[c]
                      : static_cast<float>((1 - ty) * bg[0][c] + ty * bg[1][c]);
        v += static_cast<float>(noise_rng.uniform(-0.02, 0.02));
        scene.image.at(y, x, c) = std::clamp(v, 0.0f, 1.0f);
      }
    }
  }

  for (size_t i = 0; i < shapes.size(); ++i) {
    Tensor mask({height, width});
    int min_x = width, min_y = height, max_x = -1, max_y = -1;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (id_map[static_cast<size_t>(y) * width + x] == static_cast<int>(i)) {
          mask.at(y, x) = 1.0f;
          min_x = std::min(min_x, x);
          min_y = std::min(min_y, y);
          max_x = std::max(max_x, x);
          max_y = std::max(max_y, y);
        }
    if (max_x < 0) continue;  // fully occluded or out of frame
    SceneInstance inst;
    inst.class_id = shapes[i].class_id;
    inst.mask = std::move(mask);
    inst.box = {static_cast<double>(min_x), static_cast<double>(min_y),
                static_cast<double>(max_x + 1), static_cast<double>(max_y + 1)};
    inst.gt_id = gt_ids[i];
    scene.instances.push_back(std::move(inst));
  }
  return scene;
}

void random_background(Rng& rng, float bg[2][3]) {
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < 3; ++c)
      bg[i][c] = static_cast<float>(rng.uniform(0.05, 0.55));
}

}  // namespace

Scene gen_scene(uint64_t seed, const SceneGenParams& p) {
  SIP_CHECK_ARG(p.min_shapes >= 1 && p.max_shapes >= p.min_shapes,
                "invalid shape count range");
  SIP_CHECK_ARG(p.overlap_bias >= 0 && p.overlap_bias <= 1,
                "overlap_bias must be in [0,1]");
  Rng rng(seed);
  float bg[2][3];
  random_background(rng, bg);
  const int n = static_cast<int>(rng.uniform_int(p.min_shapes, p.max_shapes));
  const auto shapes = layout_shapes(rng, p, n);
  std::vector<int> ids(shapes.size());
  for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  Rng noise = rng.fork(0xBA5E);
  return render_frame(shapes, ids, p.height, p.width, bg, noise);
}

bool has_adjacent_pair(const Scene& scene) {
  for (size_t i = 0; i < scene.instances.size(); ++i)
    for (size_t j = i + 1; j < scene.instances.size(); ++j)
      if (iou(scene.instances[i].box, scene.instances[j].box) > 0) return true;
  return false;
}

std::vector<Scene> gen_video(uint64_t seed, const VideoGenParams& p) {
  Rng rng(seed);
  float bg[2][3];
  random_background(rng, bg);
  const int n =
      static_cast<int>(rng.uniform_int(p.scene.min_shapes, p.scene.max_shapes));
  auto shapes = layout_shapes(rng, p.scene, n);
  std::vector<std::array<double, 2>> vel(shapes.size());
  for (auto& v : vel) {
    const double speed = rng.uniform(p.min_speed, p.max_speed);
    const double ang = rng.uniform(0, 2 * M_PI);
    v = {speed * std::cos(ang), speed * std::sin(ang)};
  }
  std::vector<int> ids(shapes.size());
  for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);

  std::vector<Scene> frames;
  frames.reserve(static_cast<size_t>(p.n_frames));
  for (int f = 0; f < p.n_frames; ++f) {
    auto moved = shapes;
    for (size_t i = 0; i < moved.size(); ++i) {
      moved[i].cx += vel[i][0] * f;
      moved[i].cy += vel[i][1] * f;
    }
    Rng noise = rng.fork(0xF000 + static_cast<uint64_t>(f));
    frames.push_back(
        render_frame(moved, ids, p.scene.height, p.scene.width, bg, noise));
  }
  return frames;
}

std::vector<Scene> gen_video_noncrossing(uint64_t seed, int n_frames,
                                         int n_shapes, int height, int width) {
  SIP_CHECK_ARG(n_shapes >= 1, "need at least one shape");
  Rng rng(seed);
  float bg[2][3];
  random_background(rng, bg);
  const double band = static_cast<double>(height) / n_shapes;
  SIP_CHECK_ARG(band >= 10, "too many lanes for the frame height");

  std::vector<ShapeSpec> shapes;
  std::vector<std::array<double, 2>> vel;
  for (int i = 0; i < n_shapes; ++i) {
    ShapeSpec s;
    s.class_id = static_cast<int>(rng.uniform_int(0, kNumShapeClasses - 1));
    s.ry = rng.uniform(3.0, band / 2 - 2.0);
    s.rx = rng.uniform(4.0, 8.0);
    for (int c = 0; c < 3; ++c)
      s.color[c] = static_cast<float>(std::clamp(
          kClassColors[s.class_id][c] + rng.uniform(-0.15, 0.15), 0.0, 1.0));
    // Lane keeps boxes disjoint across every frame.
    s.cy = band * i + band / 2;
    const double speed = rng.uniform(0.5, 1.5);
    const double travel = speed * (n_frames - 1);
    s.cx = rng.uniform(s.rx + 1, std::max(s.rx + 2, width - s.rx - 1 - travel));
    shapes.push_back(s);
    vel.push_back({speed, 0.0});
  }
  std::vector<int> ids(shapes.size());
  for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);

  std::vector<Scene> frames;
  for (int f = 0; f < n_frames; ++f) {
    auto moved = shapes;
    for (size_t i = 0; i < moved.size(); ++i) moved[i].cx += vel[i][0] * f;
    Rng noise = rng.fork(0xF000 + static_cast<uint64_t>(f));
    frames.push_back(render_frame(moved, ids, height, width, bg, noise));
  }
  return frames;
}

std::vector<Scene> gen_video_crossing(uint64_t seed, int n_frames, int height,
                                      int width) {
  Rng rng(seed);
  float bg[2][3];
  random_background(rng, bg);
  // Two shapes in the same horizontal strip moving toward each other; paths
  // swap sides around the middle frame.
  std::vector<ShapeSpec> shapes(2);
  std::vector<std::array<double, 2>> vel(2);
  const double cy = height / 2.0;
  for (int i = 0; i < 2; ++i) {
    ShapeSpec& s = shapes[i];
    s.class_id = static_cast<int>(rng.uniform_int(0, kNumShapeClasses - 1));
    s.rx = rng.uniform(5.0, 8.0);
    s.ry = rng.uniform(5.0, 8.0);
    for (int c = 0; c < 3; ++c)
      s.color[c] = static_cast<float>(std::clamp(
          kClassColors[s.class_id][c] + rng.uniform(-0.15, 0.15), 0.0, 1.0));
    s.cy = cy + (i == 0 ? -1 : 1) * rng.uniform(1.0, 3.0);
  }
  const double gap = rng.uniform(0.55, 0.7) * width;
  shapes[0].cx = (width - gap) / 2;
  shapes[1].cx = (width + gap) / 2;
  const double speed = gap / (n_frames - 1);  // full swap over the video
  vel[0] = {speed, 0.0};
  vel[1] = {-speed, 0.0};

  std::vector<int> ids = {0, 1};
  std::vector<Scene> frames;
  for (int f = 0; f < n_frames; ++f) {
    auto moved = shapes;
    for (size_t i = 0; i < moved.size(); ++i) moved[i].cx += vel[i][0] * f;
    Rng noise = rng.fork(0xF000 + static_cast<uint64_t>(f));
    frames.push_back(render_frame(moved, ids, height, width, bg, noise));
  }
  return frames;
}

std::vector<uint8_t> render_scene_rgb(const Scene& scene) {
  const int h = scene.image.dim(0), w = scene.image.dim(1);
  std::vector<uint8_t> rgb(static_cast<size_t>(h) * w * 3);
  for (size_t i = 0; i < rgb.size(); ++i)
    rgb[i] = static_cast<uint8_t>(
        std::clamp(scene.image[i] * 255.0f + 0.5f, 0.0f, 255.0f));
  // thin white outline on each instance box
  for (const auto& inst : scene.instances) {
    const int x1 = std::clamp(static_cast<int>(inst.box.x1), 0, w - 1);
    const int y1 = std::clamp(static_cast<int>(inst.box.y1), 0, h - 1);
    const int x2 = std::clamp(static_cast<int>(inst.box.x2) - 1, 0, w - 1);
    const int y2 = std::clamp(static_cast<int>(inst.box.y2) - 1, 0, h - 1);
    for (int x = x1; x <= x2; ++x)
      for (int y : {y1, y2})
        for (int c = 0; c < 3; ++c)
          rgb[(static_cast<size_t>(y) * w + x) * 3 + c] = 255;
    for (int y = y1; y <= y2; ++y)
      for (int x : {x1, x2})
        for (int c = 0; c < 3; ++c)
          rgb[(static_cast<size_t>(y) * w + x) * 3 + c] = 255;
  }
  return rgb;
}

}  // namespace sipmask
