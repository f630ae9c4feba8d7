#pragma once

#include <array>
#include <cmath>

#include "sipmask/autodiff.hpp"
#include "sipmask/tensor.hpp"

namespace sipmask {

// 3x3 deformable kernel per Eq. 1: per-tap scalar weights over the regular
// grid G, plus per-tap fractional 2-D displacements. Taps are row-major
// (dy, dx) in {-1,0,1} x {-1,0,1}.
template <typename T>
struct DeformableKernelT {
  static constexpr int kTaps = 9;
  std::array<T, kTaps> weights{};
  std::array<std::array<T, 2>, kTaps> offsets{};  // (dy, dx) per tap

  static std::array<int, 2> tap(int r) {
    return {r / 3 - 1, r % 3 - 1};
  }
};

using DeformableKernel = DeformableKernelT<float>;

// ---- value-level kernels ----

// Cross-correlation. input H x W x Cin, kernel Kh x Kw x Cin x Cout,
// zero padding. Odd kernel dims required; pad = K/2 keeps resolution at
// stride 1.
template <typename T>
TensorT<T> conv2d_fwd(const TensorT<T>& input, const TensorT<T>& kernel,
                      const TensorT<T>& bias, int stride, int pad) {
  SIP_CHECK(input.ndim() == 3, "conv2d input must be H x W x Cin");
  SIP_CHECK(kernel.ndim() == 4, "conv2d kernel must be Kh x Kw x Cin x Cout");
  const int h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const int kh = kernel.dim(0), kw = kernel.dim(1), cout = kernel.dim(3);
  SIP_CHECK_ARG(kh % 2 == 1 && kw % 2 == 1, "conv2d kernel dims must be odd");
  SIP_CHECK_ARG(kernel.dim(2) == cin, "conv2d channel mismatch: input Cin="
                                          << cin << " kernel Cin=" << kernel.dim(2));
  SIP_CHECK_ARG(bias.size() == static_cast<size_t>(cout),
                "conv2d bias size mismatch");
  SIP_CHECK_ARG(stride >= 1, "conv2d stride must be >= 1");
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (w + 2 * pad - kw) / stride + 1;
  SIP_CHECK_ARG(oh >= 1 && ow >= 1, "conv2d output would be empty");

  TensorT<T> out({oh, ow, cout});
  const T* in = input.data();
  const T* K = kernel.data();
  T* O = out.data();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      T* orow = O + (static_cast<size_t>(oy) * ow + ox) * cout;
      for (int co = 0; co < cout; ++co) orow[co] = bias[co];
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= w) continue;
          const T* irow = in + (static_cast<size_t>(iy) * w + ix) * cin;
          const T* krow = K + (static_cast<size_t>(ky) * kw + kx) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            const T iv = irow[ci];
            const T* kr = krow + static_cast<size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) orow[co] += iv * kr[co];
          }
        }
      }
    }
  }
  return out;
}

// 4-neighbor bilinear interpolation at a fractional (y, x) in index
// coordinates; out-of-range neighbors read as zero (no clamping).
template <typename T>
void bilinear_sample_fwd(const TensorT<T>& input, double y, double x,
                         T* out_c) {
  const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const T fy = static_cast<T>(y - y0), fx = static_cast<T>(x - x0);
  const T w00 = (T(1) - fy) * (T(1) - fx), w01 = (T(1) - fy) * fx;
  const T w10 = fy * (T(1) - fx), w11 = fy * fx;
  for (int ch = 0; ch < c; ++ch) out_c[ch] = T(0);
  auto acc = [&](int yy, int xx, T wt) {
    if (wt == T(0) || yy < 0 || yy >= h || xx < 0 || xx >= w) return;
    const T* row = input.data() + (static_cast<size_t>(yy) * w + xx) * c;
    for (int ch = 0; ch < c; ++ch) out_c[ch] += wt * row[ch];
  };
  acc(y0, x0, w00);
  acc(y0, x0 + 1, w01);
  acc(y0 + 1, x0, w10);
  acc(y0 + 1, x0 + 1, w11);
}

template <typename T>
std::vector<T> bilinear_sample(const TensorT<T>& input, double y, double x) {
  SIP_CHECK(input.ndim() == 3, "bilinear_sample needs H x W x C");
  std::vector<T> out(static_cast<size_t>(input.dim(2)));
  bilinear_sample_fwd(input, y, x, out.data());
  return out;
}

// Single-location deformable response per Eq. 1, scalar weights on a
// single-channel map: y(p0) = sum_r w_r * x(p0 + p_r + dp_r).
template <typename T>
T deformable_response(const TensorT<T>& input, const DeformableKernelT<T>& k,
                      int y0, int x0) {
  SIP_CHECK(input.ndim() == 2 || (input.ndim() == 3 && input.dim(2) == 1),
            "deformable_response needs a single-channel map");
  const int h = input.dim(0), w = input.dim(1);
  TensorT<T> view = input.ndim() == 2
                        ? TensorT<T>({h, w, 1}, input.vec())
                        : input;
  T acc = 0;
  for (int r = 0; r < DeformableKernelT<T>::kTaps; ++r) {
    const auto tap = DeformableKernelT<T>::tap(r);
    const double sy = y0 + tap[0] + static_cast<double>(k.offsets[r][0]);
    const double sx = x0 + tap[1] + static_cast<double>(k.offsets[r][1]);
    T v;
    bilinear_sample_fwd(view, sy, sx, &v);
    acc += k.weights[r] * v;
  }
  return acc;
}

// Bilinear upsampling by an integer factor, half-pixel-center convention
// (non-align-corners) with border replication, so constant maps stay
// constant. Distinct from bilinear_sample's zero-padding on purpose.
template <typename T>
TensorT<T> upsample_bilinear_fwd(const TensorT<T>& input, int factor) {
  SIP_CHECK(input.ndim() == 3, "upsample needs H x W x C");
  SIP_CHECK_ARG(factor >= 1, "upsample factor must be >= 1");
  const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
  const int oh = h * factor, ow = w * factor;
  TensorT<T> out({oh, ow, c});
  for (int oy = 0; oy < oh; ++oy) {
    const double sy = (oy + 0.5) / factor - 0.5;
    int y0 = static_cast<int>(std::floor(sy));
    const T fy = static_cast<T>(sy - y0);
    int y1 = std::min(y0 + 1, h - 1);
    y0 = std::max(y0, 0);
    for (int ox = 0; ox < ow; ++ox) {
      const double sx = (ox + 0.5) / factor - 0.5;
      int x0 = static_cast<int>(std::floor(sx));
      const T fx = static_cast<T>(sx - x0);
      int x1 = std::min(x0 + 1, w - 1);
      x0 = std::max(x0, 0);
      const T* r00 = input.data() + (static_cast<size_t>(y0) * w + x0) * c;
      const T* r01 = input.data() + (static_cast<size_t>(y0) * w + x1) * c;
      const T* r10 = input.data() + (static_cast<size_t>(y1) * w + x0) * c;
      const T* r11 = input.data() + (static_cast<size_t>(y1) * w + x1) * c;
      T* orow = out.data() + (static_cast<size_t>(oy) * ow + ox) * c;
      const T w00 = (T(1) - fy) * (T(1) - fx), w01 = (T(1) - fy) * fx;
      const T w10 = fy * (T(1) - fx), w11 = fy * fx;
      for (int ch = 0; ch < c; ++ch)
        orow[ch] = w00 * r00[ch] + w01 * r01[ch] + w10 * r10[ch] + w11 * r11[ch];
    }
  }
  return out;
}

// ---- graph ops ----

template <typename T>
VarPtr<T> conv2d(const VarPtr<T>& input, const VarPtr<T>& kernel,
                 const VarPtr<T>& bias, int stride, int pad) {
  TensorT<T> out = conv2d_fwd(input->value, kernel->value, bias->value, stride, pad);
  return detail::make_op<T>(
      std::move(out), {input, kernel, bias},
      [input, kernel, bias, stride, pad](VarT<T>& self) {
        const int h = input->value.dim(0), w = input->value.dim(1),
                  cin = input->value.dim(2);
        const int kh = kernel->value.dim(0), kw = kernel->value.dim(1),
                  cout = kernel->value.dim(3);
        const int oh = self.value.dim(0), ow = self.value.dim(1);
        const T* G = self.grad.data();
        const T* K = kernel->value.data();
        const T* in = input->value.data();
        T* gin = input->requires_grad ? input->ensure_grad().data() : nullptr;
        T* gk = kernel->requires_grad ? kernel->ensure_grad().data() : nullptr;
        T* gb = bias->requires_grad ? bias->ensure_grad().data() : nullptr;
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const T* grow = G + (static_cast<size_t>(oy) * ow + ox) * cout;
            if (gb)
              for (int co = 0; co < cout; ++co) gb[co] += grow[co];
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= w) continue;
                const size_t ioff = (static_cast<size_t>(iy) * w + ix) * cin;
                const size_t koff = (static_cast<size_t>(ky) * kw + kx) * cin * cout;
                for (int ci = 0; ci < cin; ++ci) {
                  const T* kr = K + koff + static_cast<size_t>(ci) * cout;
                  if (gin) {
                    T acc = 0;
                    for (int co = 0; co < cout; ++co) acc += grow[co] * kr[co];
                    gin[ioff + ci] += acc;
                  }
                  if (gk) {
                    const T iv = in[ioff + ci];
                    T* gkr = gk + koff + static_cast<size_t>(ci) * cout;
                    for (int co = 0; co < cout; ++co) gkr[co] += iv * grow[co];
                  }
                }
              }
            }
          }
        }
      });
}

// Multi-channel 3x3 deformable convolution, stride 1, same padding.
// offsets: H x W x 9 x 2 as (dy, dx) per tap, shared across channels.
// Gradients flow to input, kernel, bias, and the offsets themselves.
template <typename T>
VarPtr<T> deformable_conv3x3(const VarPtr<T>& input, const VarPtr<T>& kernel,
                             const VarPtr<T>& bias, const VarPtr<T>& offsets) {
  const auto& x = input->value;
  SIP_CHECK(x.ndim() == 3, "deformable input must be H x W x Cin");
  const int h = x.dim(0), w = x.dim(1), cin = x.dim(2);
  SIP_CHECK(kernel->value.ndim() == 4 && kernel->value.dim(0) == 3 &&
                kernel->value.dim(1) == 3,
            "deformable kernel must be 3 x 3 x Cin x Cout");
  SIP_CHECK(kernel->value.dim(2) == cin, "deformable channel mismatch");
  const int cout = kernel->value.dim(3);
  SIP_CHECK(offsets->value.ndim() == 4 && offsets->value.dim(0) == h &&
                offsets->value.dim(1) == w && offsets->value.dim(2) == 9 &&
                offsets->value.dim(3) == 2,
            "offsets must be H x W x 9 x 2 matching the input; tap count mismatch");

  TensorT<T> out({h, w, cout});
  const T* in = x.data();
  const T* K = kernel->value.data();
  const T* off = offsets->value.data();
  T* O = out.data();
  std::vector<T> sampled(static_cast<size_t>(cin));
  for (int oy = 0; oy < h; ++oy) {
    for (int ox = 0; ox < w; ++ox) {
      T* orow = O + (static_cast<size_t>(oy) * w + ox) * cout;
      for (int co = 0; co < cout; ++co) orow[co] = bias->value[co];
      const T* offrow = off + ((static_cast<size_t>(oy) * w + ox) * 9) * 2;
      for (int r = 0; r < 9; ++r) {
        const double sy = oy + (r / 3 - 1) + static_cast<double>(offrow[2 * r]);
        const double sx = ox + (r % 3 - 1) + static_cast<double>(offrow[2 * r + 1]);
        const int y0 = static_cast<int>(std::floor(sy));
        const int x0 = static_cast<int>(std::floor(sx));
        const T fy = static_cast<T>(sy - y0), fx = static_cast<T>(sx - x0);
        const T wts[4] = {(T(1) - fy) * (T(1) - fx), (T(1) - fy) * fx,
                          fy * (T(1) - fx), fy * fx};
        const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
        const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
        std::fill(sampled.begin(), sampled.end(), T(0));
        for (int q = 0; q < 4; ++q) {
          if (ys[q] < 0 || ys[q] >= h || xs[q] < 0 || xs[q] >= w) continue;
          const T* irow = in + (static_cast<size_t>(ys[q]) * w + xs[q]) * cin;
          for (int ci = 0; ci < cin; ++ci) sampled[ci] += wts[q] * irow[ci];
        }
        const T* kr = K + static_cast<size_t>(r) * cin * cout;
        for (int ci = 0; ci < cin; ++ci) {
          const T sv = sampled[ci];
          const T* kc = kr + static_cast<size_t>(ci) * cout;
          for (int co = 0; co < cout; ++co) orow[co] += sv * kc[co];
        }
      }
    }
  }

  return detail::make_op<T>(
      std::move(out), {input, kernel, bias, offsets},
      [input, kernel, bias, offsets, h, w, cin, cout](VarT<T>& self) {
        const T* G = self.grad.data();
        const T* in = input->value.data();
        const T* K = kernel->value.data();
        const T* off = offsets->value.data();
        T* gin = input->requires_grad ? input->ensure_grad().data() : nullptr;
        T* gk = kernel->requires_grad ? kernel->ensure_grad().data() : nullptr;
        T* gb = bias->requires_grad ? bias->ensure_grad().data() : nullptr;
        T* goff = offsets->requires_grad ? offsets->ensure_grad().data() : nullptr;
        std::vector<T> sampled(static_cast<size_t>(cin));
        std::vector<T> dsampled(static_cast<size_t>(cin));
        for (int oy = 0; oy < h; ++oy) {
          for (int ox = 0; ox < w; ++ox) {
            const T* grow = G + (static_cast<size_t>(oy) * w + ox) * cout;
            if (gb)
              for (int co = 0; co < cout; ++co) gb[co] += grow[co];
            const size_t offbase = (static_cast<size_t>(oy) * w + ox) * 18;
            for (int r = 0; r < 9; ++r) {
              const double sy = oy + (r / 3 - 1) + static_cast<double>(off[offbase + 2 * r]);
              const double sx = ox + (r % 3 - 1) + static_cast<double>(off[offbase + 2 * r + 1]);
              const int y0 = static_cast<int>(std::floor(sy));
              const int x0 = static_cast<int>(std::floor(sx));
              const T fy = static_cast<T>(sy - y0), fx = static_cast<T>(sx - x0);
              const T wts[4] = {(T(1) - fy) * (T(1) - fx), (T(1) - fy) * fx,
                                fy * (T(1) - fx), fy * fx};
              const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
              const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
              const T* kr = K + static_cast<size_t>(r) * cin * cout;

              // dL/d(sampled channel) for this tap.
              for (int ci = 0; ci < cin; ++ci) {
                const T* kc = kr + static_cast<size_t>(ci) * cout;
                T acc = 0;
                for (int co = 0; co < cout; ++co) acc += grow[co] * kc[co];
                dsampled[ci] = acc;
              }
              if (gk || goff) {
                std::fill(sampled.begin(), sampled.end(), T(0));
                for (int q = 0; q < 4; ++q) {
                  if (ys[q] < 0 || ys[q] >= h || xs[q] < 0 || xs[q] >= w) continue;
                  const T* irow = in + (static_cast<size_t>(ys[q]) * w + xs[q]) * cin;
                  for (int ci = 0; ci < cin; ++ci) sampled[ci] += wts[q] * irow[ci];
                }
              }
              if (gk) {
                for (int ci = 0; ci < cin; ++ci) {
                  T* gkc = gk + static_cast<size_t>(r) * cin * cout +
                           static_cast<size_t>(ci) * cout;
                  const T sv = sampled[ci];
                  for (int co = 0; co < cout; ++co) gkc[co] += sv * grow[co];
                }
              }
              if (gin) {
                for (int q = 0; q < 4; ++q) {
                  if (wts[q] == T(0)) continue;
                  if (ys[q] < 0 || ys[q] >= h || xs[q] < 0 || xs[q] >= w) continue;
                  T* girow = gin + (static_cast<size_t>(ys[q]) * w + xs[q]) * cin;
                  for (int ci = 0; ci < cin; ++ci)
                    girow[ci] += wts[q] * dsampled[ci];
                }
              }
              if (goff) {
                // d(sample)/dy and d(sample)/dx per channel.
                auto fetch = [&](int yy, int xx, int ci) -> T {
                  if (yy < 0 || yy >= h || xx < 0 || xx >= w) return T(0);
                  return in[(static_cast<size_t>(yy) * w + xx) * cin + ci];
                };
                T gy = 0, gx = 0;
                for (int ci = 0; ci < cin; ++ci) {
                  const T v00 = fetch(y0, x0, ci), v01 = fetch(y0, x0 + 1, ci);
                  const T v10 = fetch(y0 + 1, x0, ci), v11 = fetch(y0 + 1, x0 + 1, ci);
                  const T dvy = (T(1) - fx) * (v10 - v00) + fx * (v11 - v01);
                  const T dvx = (T(1) - fy) * (v01 - v00) + fy * (v11 - v10);
                  gy += dsampled[ci] * dvy;
                  gx += dsampled[ci] * dvx;
                }
                goff[offbase + 2 * r] += gy;
                goff[offbase + 2 * r + 1] += gx;
              }
            }
          }
        }
      });
}

template <typename T>
VarPtr<T> upsample_bilinear(const VarPtr<T>& input, int factor) {
  TensorT<T> out = upsample_bilinear_fwd(input->value, factor);
  return detail::make_op<T>(std::move(out), {input}, [input, factor](VarT<T>& self) {
    const int h = input->value.dim(0), w = input->value.dim(1),
              c = input->value.dim(2);
    const int oh = self.value.dim(0), ow = self.value.dim(1);
    auto& gin = input->ensure_grad();
    const T* G = self.grad.data();
    for (int oy = 0; oy < oh; ++oy) {
      const double sy = (oy + 0.5) / factor - 0.5;
      int y0 = static_cast<int>(std::floor(sy));
      const T fy = static_cast<T>(sy - y0);
      int y1 = std::min(y0 + 1, h - 1);
      y0 = std::max(y0, 0);
      for (int ox = 0; ox < ow; ++ox) {
        const double sx = (ox + 0.5) / factor - 0.5;
        int x0 = static_cast<int>(std::floor(sx));
        const T fx = static_cast<T>(sx - x0);
        int x1 = std::min(x0 + 1, w - 1);
        x0 = std::max(x0, 0);
        const T* grow = G + (static_cast<size_t>(oy) * ow + ox) * c;
        const T w00 = (T(1) - fy) * (T(1) - fx), w01 = (T(1) - fy) * fx;
        const T w10 = fy * (T(1) - fx), w11 = fy * fx;
        T* g00 = gin.data() + (static_cast<size_t>(y0) * w + x0) * c;
        T* g01 = gin.data() + (static_cast<size_t>(y0) * w + x1) * c;
        T* g10 = gin.data() + (static_cast<size_t>(y1) * w + x0) * c;
        T* g11 = gin.data() + (static_cast<size_t>(y1) * w + x1) * c;
        for (int ch = 0; ch < c; ++ch) {
          g00[ch] += w00 * grow[ch];
          g01[ch] += w01 * grow[ch];
          g10[ch] += w10 * grow[ch];
          g11[ch] += w11 * grow[ch];
        }
      }
    }
  });
}

// Differentiable point sample (gradient wrt the input map only; the point
// is a constant).
template <typename T>
VarPtr<T> bilinear_sample_var(const VarPtr<T>& input, double y, double x) {
  SIP_CHECK(input->value.ndim() == 3, "bilinear_sample needs H x W x C");
  const int c = input->value.dim(2);
  TensorT<T> out({c});
  bilinear_sample_fwd(input->value, y, x, out.data());
  return detail::make_op<T>(std::move(out), {input}, [input, y, x, c](VarT<T>& self) {
    const int h = input->value.dim(0), w = input->value.dim(1);
    auto& gin = input->ensure_grad();
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const T fy = static_cast<T>(y - y0), fx = static_cast<T>(x - x0);
    const T wts[4] = {(T(1) - fy) * (T(1) - fx), (T(1) - fy) * fx,
                      fy * (T(1) - fx), fy * fx};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    for (int q = 0; q < 4; ++q) {
      if (ys[q] < 0 || ys[q] >= h || xs[q] < 0 || xs[q] >= w) continue;
      T* grow = gin.data() + (static_cast<size_t>(ys[q]) * w + xs[q]) * c;
      for (int ch = 0; ch < c; ++ch) grow[ch] += wts[q] * self.grad[ch];
    }
  });
}

}  // namespace sipmask
