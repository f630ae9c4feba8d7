#pragma once

#include <map>
#include <string>

#include "sipmask/config.hpp"
#include "sipmask/nn_ops.hpp"
#include "sipmask/rng.hpp"
#include "sipmask/sp.hpp"

namespace sipmask {

template <typename T>
class ParamStore {
 public:
  VarPtr<T> add(const std::string& name, TensorT<T> init) {
    SIP_CHECK(index_.find(name) == index_.end(), "duplicate param " << name);
    auto v = make_leaf<T>(std::move(init), true);
    index_[name] = vars_.size();
    names_.push_back(name);
    vars_.push_back(v);
    return v;
  }

  VarPtr<T> get(const std::string& name) const {
    auto it = index_.find(name);
    SIP_CHECK(it != index_.end(), "unknown param " << name);
    return vars_[it->second];
  }

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<VarPtr<T>>& vars() const { return vars_; }
  size_t size() const { return vars_.size(); }

  void zero_grads() {
    for (auto& v : vars_) v->zero_grad();
  }

 private:
  std::map<std::string, size_t> index_;
  std::vector<std::string> names_;
  std::vector<VarPtr<T>> vars_;
};

template <typename T>
struct LevelOutputs {
  VarPtr<T> cls_logits;   // Hl x Wl x C, pre-sigmoid
  VarPtr<T> ltrb;         // Hl x Wl x 4, positive (exp transform, per-level scale)
  VarPtr<T> coeffs;       // Hl x Wl x (k^2*m), unbounded
  VarPtr<T> tower_feats;  // regression tower features
  int stride = 0;
};

template <typename T>
struct ForwardResult {
  std::vector<VarPtr<T>> pyramid;        // P3..P7
  std::vector<LevelOutputs<T>> levels;   // per pyramid level
  VarPtr<T> basis;                        // bh x bw x m, pre-sigmoid
  VarPtr<T> track_maps;                   // H3 x W3 x d
};

// exp with an upper clamp on the raw logit, then a constant scale. Keeps
// ltrb strictly positive and finite through training.
template <typename T>
VarPtr<T> clamped_exp_scale(const VarPtr<T>& a, T s, T raw_hi = T(8)) {
  TensorT<T> out(a->value.shape());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = std::exp(std::min(a->value[i], raw_hi)) * s;
  return detail::make_op<T>(std::move(out), {a}, [a, s, raw_hi](VarT<T>& self) {
    auto& g = a->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i)
      if (a->value[i] < raw_hi) g[i] += self.grad[i] * self.value[i];
  });
}

// Toy SipMask network: stem + 3 stride-2 blocks, 1x1 laterals with a
// top-down pathway for P3..P5, stride-2 convs for P6/P7, shared
// mask-specialized classification and regression branches, contextual basis
// masks from P3-P5, and the tracking branch.
template <typename T>
class SipMaskModel {
 public:
  SipMaskModel(const Config& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed ^ 0x5157a5c0de11ULL);
    const int c = cfg_.channels;
    add_conv("stem", 3, 3, c, rng);
    add_conv("block1", 3, c, c, rng);
    add_conv("block2", 3, c, c, rng);
    add_conv("block3", 3, c, c, rng);
    add_conv("lat3", 1, c, c, rng);
    add_conv("lat4", 1, c, c, rng);
    add_conv("lat5", 1, c, c, rng);
    add_conv("p6", 3, c, c, rng);
    add_conv("p7", 3, c, c, rng);
    for (int d = 0; d < cfg_.tower_depth; ++d) {
      add_conv("cls_tower." + std::to_string(d), 3, c, c, rng);
      add_conv("reg_tower." + std::to_string(d), 3, c, c, rng);
    }
    add_conv("align", 3, c, c, rng);
    // focal-loss prior on the classification bias
    add_conv("cls_out", 3, c, cfg_.classes, rng,
             static_cast<T>(-std::log((1.0 - 0.01) / 0.01)));
    add_conv("coef_out", 3, c, cfg_.k * cfg_.k * cfg_.m, rng);
    add_conv("reg_out", 3, c, 4, rng);
    add_conv("basis", 3, 3 * c, cfg_.m, rng);
    add_conv("track.0", 3, c, c, rng);
    add_conv("track.1", 3, c, c, rng);
    add_conv("track_proj", 1, c, cfg_.track_dim, rng);
  }

  const Config& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  std::vector<VarPtr<T>> build_pyramid(const VarPtr<T>& image) const {
    const auto& shp = image->value.shape();
    SIP_CHECK(image->value.ndim() == 3 && shp[2] == 3,
              "image must be H x W x 3");
    SIP_CHECK_ARG(shp[0] % cfg_.max_stride() == 0 &&
                      shp[1] % cfg_.max_stride() == 0,
                  "image dims must be divisible by the largest stride "
                      << cfg_.max_stride());
    auto stem = relu(conv("stem", image, 2));
    auto c3 = relu(conv("block1", stem, 2));
    auto c4 = relu(conv("block2", c3, 2));
    auto c5 = relu(conv("block3", c4, 2));
    auto p5 = conv("lat5", c5, 1);
    auto p4 = add(conv("lat4", c4, 1), upsample_bilinear(p5, 2));
    auto p3 = add(conv("lat3", c3, 1), upsample_bilinear(p4, 2));
    auto p6 = conv("p6", p5, 2);
    auto p7 = conv("p7", p6, 2);
    return {p3, p4, p5, p6, p7};
  }

  // (ltrb, tower_feats); ltrb strictly positive via exp, scaled per level.
  std::pair<VarPtr<T>, VarPtr<T>> regression_branch(const VarPtr<T>& level,
                                                    int stride) const {
    auto t = level;
    for (int d = 0; d < cfg_.tower_depth; ++d)
      t = relu(conv("reg_tower." + std::to_string(d), t, 1));
    auto raw = conv("reg_out", t, 1);
    auto ltrb = clamped_exp_scale(raw, static_cast<T>(stride));
    return {ltrb, t};
  }

  // SP module inside: alignment offsets come from the regressed boxes
  // (gradient-detached), then two sibling convs produce class logits and
  // spatial coefficients.
  std::pair<VarPtr<T>, VarPtr<T>> classification_branch(
      const VarPtr<T>& level, const TensorT<T>& ltrb_detached,
      int stride) const {
    auto t = level;
    for (int d = 0; d < cfg_.tower_depth; ++d)
      t = relu(conv("cls_tower." + std::to_string(d), t, 1));
    TensorT<T> offsets =
        offsets_from_regression(ltrb_detached, static_cast<double>(stride));
    auto aligned = relu(feature_align(t, offsets, params_.get("align.w"),
                                      params_.get("align.b")));
    auto cls = conv("cls_out", aligned, 1);
    auto coeffs = conv("coef_out", aligned, 1);
    return {cls, coeffs};
  }

  VarPtr<T> contextual_basis_masks(const VarPtr<T>& p3, const VarPtr<T>& p4,
                                   const VarPtr<T>& p5) const {
    auto cat = concat_channels<T>(
        {p3, upsample_bilinear(p4, 2), upsample_bilinear(p5, 4)});
    auto fused = conv("basis", cat, 1);
    return upsample_bilinear(fused, cfg_.basis_upsample);
  }

  VarPtr<T> tracking_branch(const std::vector<VarPtr<T>>& pyramid) const {
    std::vector<VarPtr<T>> ups;
    for (int l = 0; l < 3; ++l) {
      auto t = relu(conv("track.0", pyramid[l], 1));
      t = relu(conv("track.1", t, 1));
      ups.push_back(l == 0 ? t : upsample_bilinear(t, 1 << l));
    }
    auto fused = add(add(ups[0], ups[1]), ups[2]);
    return conv("track_proj", fused, 1);
  }

  ForwardResult<T> forward(const TensorT<T>& image) const {
    ForwardResult<T> out;
    out.pyramid = build_pyramid(make_constant<T>(image));
    out.levels.resize(out.pyramid.size());
    for (size_t l = 0; l < out.pyramid.size(); ++l) {
      const int stride = cfg_.level_stride(static_cast<int>(l));
      auto [ltrb, tower] = regression_branch(out.pyramid[l], stride);
      auto [cls, coeffs] =
          classification_branch(out.pyramid[l], ltrb->value, stride);
      out.levels[l] = {cls, ltrb, coeffs, tower, stride};
    }
    out.basis =
        contextual_basis_masks(out.pyramid[0], out.pyramid[1], out.pyramid[2]);
    out.track_maps = tracking_branch(out.pyramid);
    return out;
  }

 private:
  void add_conv(const std::string& name, int ksize, int cin, int cout, Rng& rng,
                T bias_init = T(0)) {
    TensorT<T> w({ksize, ksize, cin, cout});
    const double std = std::sqrt(2.0 / (ksize * ksize * cin));
    for (size_t i = 0; i < w.size(); ++i)
      w[i] = static_cast<T>(rng.normal(0.0, std));
    params_.add(name + ".w", std::move(w));
    params_.add(name + ".b", TensorT<T>({cout}, bias_init));
  }

  VarPtr<T> conv(const std::string& name, const VarPtr<T>& x, int stride) const {
    const auto w = params_.get(name + ".w");
    const int pad = w->value.dim(0) / 2;
    return conv2d(x, w, params_.get(name + ".b"), stride, pad);
  }

  Config cfg_;
  ParamStore<T> params_;
};

}  // namespace sipmask
