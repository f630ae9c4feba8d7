#include "sipmask/coco.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "sipmask/png_io.hpp"

namespace sipmask {

using nlohmann::json;

Tensor rasterize_polygon(const std::vector<std::vector<double>>& rings,
                         int height, int width) {
  Tensor mask({height, width});
  for (int y = 0; y < height; ++y) {
    const double py = y + 0.5;
    for (int x = 0; x < width; ++x) {
      const double px = x + 0.5;
      // even-odd crossing rule over the union of rings
      bool inside = false;
      for (const auto& ring : rings) {
        SIP_CHECK(ring.size() >= 6 && ring.size() % 2 == 0,
                  "polygon ring needs >= 3 (x, y) pairs");
        const size_t n = ring.size() / 2;
        for (size_t i = 0, j = n - 1; i < n; j = i++) {
          const double xi = ring[2 * i], yi = ring[2 * i + 1];
          const double xj = ring[2 * j], yj = ring[2 * j + 1];
          if ((yi > py) != (yj > py) &&
              px < (xj - xi) * (py - yi) / (yj - yi) + xi)
            inside = !inside;
        }
      }
      if (inside) mask.at(y, x) = 1.0f;
    }
  }
  return mask;
}

Tensor decode_rle_counts(const std::vector<int64_t>& counts, int height,
                         int width) {
  Tensor mask({height, width});
  // COCO RLE runs are column-major, starting with a zeros run.
  int64_t pos = 0;
  bool value = false;
  for (int64_t c : counts) {
    SIP_CHECK(c >= 0, "negative RLE count");
    for (int64_t i = 0; i < c; ++i) {
      SIP_CHECK(pos < static_cast<int64_t>(height) * width,
                "RLE counts exceed mask size");
      if (value) {
        const int col = static_cast<int>(pos / height);
        const int row = static_cast<int>(pos % height);
        mask.at(row, col) = 1.0f;
      }
      ++pos;
    }
    value = !value;
  }
  SIP_CHECK(pos == static_cast<int64_t>(height) * width,
            "RLE counts cover " << pos << " pixels, mask has "
                                << static_cast<int64_t>(height) * width);
  return mask;
}

std::vector<int64_t> uncompress_rle_string(const std::string& s) {
  // COCO compressed RLE: 5-bit groups biased by 48, bit 0x20 continues,
  // sign-extension flag 0x10, counts delta-coded against count[i-2].
  std::vector<int64_t> counts;
  size_t m = 0;
  while (m < s.size()) {
    int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      SIP_CHECK(m < s.size(), "truncated compressed RLE");
      const int64_t c = static_cast<int64_t>(s[m]) - 48;
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++m;
      ++k;
      if (!more && (c & 0x10)) x |= -1LL << (5 * k);
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    counts.push_back(x);
  }
  return counts;
}

namespace {

Tensor resize_mask_nearest(const Tensor& mask, int oh, int ow) {
  const int h = mask.dim(0), w = mask.dim(1);
  Tensor out({oh, ow});
  for (int y = 0; y < oh; ++y) {
    const int sy = std::min(h - 1, static_cast<int>((y + 0.5) * h / oh));
    for (int x = 0; x < ow; ++x) {
      const int sx = std::min(w - 1, static_cast<int>((x + 0.5) * w / ow));
      out.at(y, x) = mask.at(sy, sx);
    }
  }
  return out;
}

Tensor resize_image_bilinear(const Tensor& img, int oh, int ow) {
  const int h = img.dim(0), w = img.dim(1);
  Tensor out({oh, ow, 3});
  for (int y = 0; y < oh; ++y) {
    const double sy = std::clamp((y + 0.5) * h / oh - 0.5, 0.0, h - 1.0);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - y0;
    for (int x = 0; x < ow; ++x) {
      const double sx = std::clamp((x + 0.5) * w / ow - 0.5, 0.0, w - 1.0);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - x0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - fy) * ((1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c)) +
                         fy * ((1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c));
        out.at(y, x, c) = static_cast<float>(v);
      }
    }
  }
  return out;
}

bool mask_bounds(const Tensor& mask, Box& box) {
  const int h = mask.dim(0), w = mask.dim(1);
  int min_x = w, min_y = h, max_x = -1, max_y = -1;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask.at(y, x) > 0) {
        min_x = std::min(min_x, x);
        min_y = std::min(min_y, y);
        max_x = std::max(max_x, x);
        max_y = std::max(max_y, y);
      }
  if (max_x < 0) return false;
  box = {static_cast<double>(min_x), static_cast<double>(min_y),
         static_cast<double>(max_x + 1), static_cast<double>(max_y + 1)};
  return true;
}

}  // namespace

std::vector<Scene> load_coco(const std::string& annotation_path,
                             const std::string& image_dir, int max_images,
                             int target_size) {
  std::ifstream in(annotation_path);
  SIP_CHECK(in.good(), "missing annotation file " << annotation_path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("malformed COCO JSON: ") + e.what());
  }

  // contiguous class ids in ascending category-id order
  std::map<int64_t, int> cat_to_class;
  if (root.contains("categories"))
    for (const auto& c : root["categories"])
      cat_to_class.emplace(c.at("id").get<int64_t>(), 0);
  int next_class = 0;
  for (auto& [id, cls] : cat_to_class) cls = next_class++;

  struct ImgRec {
    int64_t id;
    int h, w;
    std::string file;
  };
  std::vector<ImgRec> images;
  std::map<int64_t, size_t> img_index;
  if (root.contains("images")) {
    for (const auto& im : root["images"]) {
      if (max_images > 0 && static_cast<int>(images.size()) >= max_images) break;
      ImgRec rec{im.at("id").get<int64_t>(), im.at("height").get<int>(),
                 im.at("width").get<int>(),
                 im.value("file_name", std::string())};
      img_index[rec.id] = images.size();
      images.push_back(std::move(rec));
    }
  }

  std::vector<Scene> scenes(images.size());
  std::vector<std::vector<SceneInstance>> native_instances(images.size());
  std::vector<std::pair<int, int>> native_dims(images.size());
  for (size_t i = 0; i < images.size(); ++i)
    native_dims[i] = {images[i].h, images[i].w};

  if (root.contains("annotations")) {
    for (const auto& an : root["annotations"]) {
      const int64_t img_id = an.at("image_id").get<int64_t>();
      auto it = img_index.find(img_id);
      if (it == img_index.end()) {
        if (max_images > 0) continue;  // image beyond the cap
        SIP_CHECK(false, "annotation references unknown image id " << img_id);
      }
      const ImgRec& rec = images[it->second];
      const int64_t cat = an.at("category_id").get<int64_t>();
      SIP_CHECK(cat_to_class.count(cat),
                "annotation references unknown category " << cat);

      Tensor mask;
      const auto& seg = an.at("segmentation");
      if (seg.is_array()) {
        std::vector<std::vector<double>> rings;
        for (const auto& ring : seg)
          rings.push_back(ring.get<std::vector<double>>());
        mask = rasterize_polygon(rings, rec.h, rec.w);
      } else {
        SIP_CHECK(seg.is_object() && seg.contains("counts"),
                  "segmentation must be polygons or RLE");
        const auto size = seg.at("size").get<std::vector<int>>();
        SIP_CHECK(size.size() == 2 && size[0] == rec.h && size[1] == rec.w,
                  "RLE size does not match image dims");
        std::vector<int64_t> counts;
        if (seg["counts"].is_array())
          counts = seg["counts"].get<std::vector<int64_t>>();
        else
          counts = uncompress_rle_string(seg["counts"].get<std::string>());
        mask = decode_rle_counts(counts, rec.h, rec.w);
      }

      SceneInstance inst;
      inst.class_id = cat_to_class[cat];
      inst.mask = std::move(mask);
      if (!mask_bounds(inst.mask, inst.box)) continue;  // empty segmentation
      native_instances[it->second].push_back(std::move(inst));
    }
  }

  for (size_t i = 0; i < images.size(); ++i) {
    Scene& scene = scenes[i];
    const auto [nh, nw] = native_dims[i];

    Tensor native_img;
    const std::string img_path =
        image_dir.empty() || images[i].file.empty()
            ? std::string()
            : image_dir + "/" + images[i].file;
    std::ifstream probe(img_path, std::ios::binary);
    if (!img_path.empty() && probe.good()) {
      const PngImage png = read_png_rgb(img_path);
      SIP_CHECK(png.height == nh && png.width == nw,
                "image/annotation dims mismatch for " << images[i].file);
      native_img = Tensor({nh, nw, 3});
      for (size_t j = 0; j < png.rgb.size(); ++j)
        native_img[j] = png.rgb[j] / 255.0f;
    } else {
      // flat render of the masks keeps mask-only fixtures usable
      native_img = Tensor({nh, nw, 3}, 0.1f);
      for (const auto& inst : native_instances[i]) {
        const float shade = 0.3f + 0.2f * static_cast<float>(inst.class_id % 3);
        for (int y = 0; y < nh; ++y)
          for (int x = 0; x < nw; ++x)
            if (inst.mask.at(y, x) > 0)
              for (int c = 0; c < 3; ++c) native_img.at(y, x, c) = shade;
      }
    }

    scene.image = resize_image_bilinear(native_img, target_size, target_size);
    for (auto& inst : native_instances[i]) {
      SceneInstance scaled;
      scaled.class_id = inst.class_id;
      scaled.gt_id = static_cast<int>(scene.instances.size());
      scaled.mask = resize_mask_nearest(inst.mask, target_size, target_size);
      if (!mask_bounds(scaled.mask, scaled.box)) continue;
      scene.instances.push_back(std::move(scaled));
    }
  }
  return scenes;
}

}  // namespace sipmask
