#include "sipmask/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sipmask/check.hpp"

namespace sipmask {

using nlohmann::json;

void Config::validate() const {
  SIP_CHECK_ARG(image_size > 0 && image_size % max_stride() == 0,
                "image_size must be divisible by the largest stride "
                    << max_stride());
  SIP_CHECK_ARG(classes >= 1, "classes must be >= 1");
  SIP_CHECK_ARG(channels >= 1, "channels must be >= 1");
  SIP_CHECK_ARG(tower_depth >= 1, "tower_depth must be >= 1");
  SIP_CHECK_ARG(k >= 1, "k must be >= 1");
  SIP_CHECK_ARG(m >= 1, "m must be >= 1");
  SIP_CHECK_ARG(track_dim >= 1, "track_dim must be >= 1");
  SIP_CHECK_ARG(base_stride == 4, "base_stride is fixed at 4 by the backbone");
  SIP_CHECK_ARG(basis_upsample >= 1, "basis_upsample must be >= 1");
  SIP_CHECK_ARG(scale_edges.size() == 5, "scale_edges needs 5 entries");
  for (size_t i = 1; i < scale_edges.size(); ++i)
    SIP_CHECK_ARG(scale_edges[i] > scale_edges[i - 1],
                  "scale_edges must be increasing");
  SIP_CHECK_ARG(lr > 0, "lr must be positive");
  SIP_CHECK_ARG(momentum >= 0 && momentum < 1, "momentum must be in [0,1)");
  SIP_CHECK_ARG(steps >= 0, "steps must be >= 0");
  SIP_CHECK_ARG(pos_cap >= 1, "pos_cap must be >= 1");
  SIP_CHECK_ARG(train_scenes >= 1, "train_scenes must be >= 1");
  SIP_CHECK_ARG(min_shapes >= 1 && max_shapes >= min_shapes,
                "shape count range invalid");
  SIP_CHECK_ARG(overlap_bias >= 0 && overlap_bias <= 1,
                "overlap_bias must be in [0,1]");
  SIP_CHECK_ARG(score_thr >= 0 && score_thr <= 1, "score_thr must be in [0,1]");
  SIP_CHECK_ARG(nms_iou >= 0 && nms_iou <= 1, "nms_iou must be in [0,1]");
  SIP_CHECK_ARG(top_n >= 1, "top_n must be >= 1");
  SIP_CHECK_ARG(retire_age >= 1, "retire_age must be >= 1");
  SIP_CHECK_ARG(ema_momentum >= 0 && ema_momentum <= 1,
                "ema_momentum must be in [0,1]");
}

namespace {

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

Config parse_config_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  SIP_CHECK_ARG(j.is_object(), "config root must be a JSON object");

  static const std::vector<std::string> known = {
      "image_size",  "classes",      "channels",     "tower_depth",
      "k",           "m",            "track_dim",    "base_stride",
      "basis_upsample", "scale_edges", "seed",        "lr",
      "momentum",    "steps",        "pos_cap",      "weighting_loss",
      "train_scenes", "eval_scenes", "overlap_bias", "min_shapes",
      "max_shapes",  "ckpt_interval", "score_thr",   "nms_iou",
      "top_n",       "mask_thr",     "lambda_iou",   "lambda_class",
      "lambda_score", "theta_new",   "retire_age",   "ema_momentum"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : known)
      if (k == it.key()) { ok = true; break; }
    SIP_CHECK_ARG(ok, "unknown config key \"" << it.key() << "\"");
  }

  Config c;
  read_key(j, "image_size", c.image_size);
  read_key(j, "classes", c.classes);
  read_key(j, "channels", c.channels);
  read_key(j, "tower_depth", c.tower_depth);
  read_key(j, "k", c.k);
  read_key(j, "m", c.m);
  read_key(j, "track_dim", c.track_dim);
  read_key(j, "base_stride", c.base_stride);
  read_key(j, "basis_upsample", c.basis_upsample);
  read_key(j, "scale_edges", c.scale_edges);
  read_key(j, "seed", c.seed);
  read_key(j, "lr", c.lr);
  read_key(j, "momentum", c.momentum);
  read_key(j, "steps", c.steps);
  read_key(j, "pos_cap", c.pos_cap);
  read_key(j, "weighting_loss", c.weighting_loss);
  read_key(j, "train_scenes", c.train_scenes);
  read_key(j, "eval_scenes", c.eval_scenes);
  read_key(j, "overlap_bias", c.overlap_bias);
  read_key(j, "min_shapes", c.min_shapes);
  read_key(j, "max_shapes", c.max_shapes);
  read_key(j, "ckpt_interval", c.ckpt_interval);
  read_key(j, "score_thr", c.score_thr);
  read_key(j, "nms_iou", c.nms_iou);
  read_key(j, "top_n", c.top_n);
  read_key(j, "mask_thr", c.mask_thr);
  read_key(j, "lambda_iou", c.lambda_iou);
  read_key(j, "lambda_class", c.lambda_class);
  read_key(j, "lambda_score", c.lambda_score);
  read_key(j, "theta_new", c.theta_new);
  read_key(j, "retire_age", c.retire_age);
  read_key(j, "ema_momentum", c.ema_momentum);
  c.validate();
  return c;
}

Config load_config_file(const std::string& path) {
  std::ifstream in(path);
  SIP_CHECK_ARG(in.good(), "cannot open config file " << path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_json(ss.str());
}

std::string config_to_json(const Config& c) {
  json j;
  j["image_size"] = c.image_size;
  j["classes"] = c.classes;
  j["channels"] = c.channels;
  j["tower_depth"] = c.tower_depth;
  j["k"] = c.k;
  j["m"] = c.m;
  j["track_dim"] = c.track_dim;
  j["base_stride"] = c.base_stride;
  j["basis_upsample"] = c.basis_upsample;
  j["scale_edges"] = c.scale_edges;
  j["seed"] = c.seed;
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["steps"] = c.steps;
  j["pos_cap"] = c.pos_cap;
  j["weighting_loss"] = c.weighting_loss;
  j["train_scenes"] = c.train_scenes;
  j["eval_scenes"] = c.eval_scenes;
  j["overlap_bias"] = c.overlap_bias;
  j["min_shapes"] = c.min_shapes;
  j["max_shapes"] = c.max_shapes;
  j["ckpt_interval"] = c.ckpt_interval;
  j["score_thr"] = c.score_thr;
  j["nms_iou"] = c.nms_iou;
  j["top_n"] = c.top_n;
  j["mask_thr"] = c.mask_thr;
  j["lambda_iou"] = c.lambda_iou;
  j["lambda_class"] = c.lambda_class;
  j["lambda_score"] = c.lambda_score;
  j["theta_new"] = c.theta_new;
  j["retire_age"] = c.retire_age;
  j["ema_momentum"] = c.ema_momentum;
  return j.dump(2);
}

}  // namespace sipmask
