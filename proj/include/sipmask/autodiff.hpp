#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "sipmask/tensor.hpp"

namespace sipmask {

// Reverse-mode tape node. Ops build a dynamic graph of shared_ptr nodes;
// backward() runs the closures in reverse topological order. No in-place
// mutation of values after construction.
template <typename T>
class VarT {
 public:
  using Ptr = std::shared_ptr<VarT<T>>;

  TensorT<T> value;
  TensorT<T> grad;  // allocated on demand, same shape as value
  bool requires_grad = false;
  std::vector<Ptr> parents;
  std::function<void(VarT<T>&)> backward_fn;

  TensorT<T>& ensure_grad() {
    if (grad.size() != value.size()) grad = TensorT<T>(value.shape());
    return grad;
  }

  void zero_grad() {
    if (grad.size() == value.size()) grad.fill(T(0));
  }
};

template <typename T>
using VarPtr = std::shared_ptr<VarT<T>>;

using Var = VarPtr<float>;
using VarD = VarPtr<double>;

template <typename T>
VarPtr<T> make_leaf(TensorT<T> value, bool requires_grad = true) {
  auto v = std::make_shared<VarT<T>>();
  v->value = std::move(value);
  v->requires_grad = requires_grad;
  return v;
}

template <typename T>
VarPtr<T> make_constant(TensorT<T> value) {
  return make_leaf<T>(std::move(value), false);
}

template <typename T>
VarPtr<T> make_scalar(T v, bool requires_grad = false) {
  return make_leaf<T>(TensorT<T>({1}, std::vector<T>{v}), requires_grad);
}

template <typename T>
VarPtr<T> detach(const VarPtr<T>& v) {
  return make_constant<T>(v->value);
}

namespace detail {

template <typename T>
bool any_requires(const std::vector<VarPtr<T>>& ps) {
  for (const auto& p : ps)
    if (p->requires_grad) return true;
  return false;
}

// Standard op scaffold: value + parents + backward closure.
template <typename T>
VarPtr<T> make_op(TensorT<T> value, std::vector<VarPtr<T>> parents,
                  std::function<void(VarT<T>&)> backward) {
  auto out = std::make_shared<VarT<T>>();
  out->value = std::move(value);
  out->requires_grad = any_requires(parents);
  if (out->requires_grad) {
    out->parents = std::move(parents);
    out->backward_fn = std::move(backward);
  }
  return out;
}

}  // namespace detail

// Runs reverse-mode accumulation from a scalar root. Gradients add into
// every reachable node with requires_grad; call zero_grad on leaves between
// backward passes.
template <typename T>
void backward(const VarPtr<T>& root) {
  SIP_CHECK(root->value.size() == 1, "backward needs a scalar root");
  SIP_CHECK(std::isfinite(static_cast<double>(root->value[0])),
            "non-finite loss value");
  if (!root->requires_grad) return;

  // Iterative post-order DFS for topological order.
  std::vector<VarT<T>*> topo;
  std::unordered_set<VarT<T>*> visited;
  std::vector<std::pair<VarT<T>*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      VarT<T>* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = T(1);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    VarT<T>* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }
}

// ---- elementwise ops ----

template <typename T>
VarPtr<T> add(const VarPtr<T>& a, const VarPtr<T>& b) {
  SIP_CHECK(a->value.same_shape(b->value), "add shape mismatch");
  TensorT<T> out(a->value.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
  return detail::make_op<T>(std::move(out), {a, b}, [a, b](VarT<T>& self) {
    if (a->requires_grad) {
      auto& g = a->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
VarPtr<T> sub(const VarPtr<T>& a, const VarPtr<T>& b) {
  SIP_CHECK(a->value.same_shape(b->value), "sub shape mismatch");
  TensorT<T> out(a->value.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] - b->value[i];
  return detail::make_op<T>(std::move(out), {a, b}, [a, b](VarT<T>& self) {
    if (a->requires_grad) {
      auto& g = a->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
VarPtr<T> mul(const VarPtr<T>& a, const VarPtr<T>& b) {
  SIP_CHECK(a->value.same_shape(b->value), "mul shape mismatch");
  TensorT<T> out(a->value.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
  return detail::make_op<T>(std::move(out), {a, b}, [a, b](VarT<T>& self) {
    if (a->requires_grad) {
      auto& g = a->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a->value[i];
    }
  });
}

template <typename T>
VarPtr<T> scale(const VarPtr<T>& a, T s) {
  TensorT<T> out(a->value.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * s;
  return detail::make_op<T>(std::move(out), {a}, [a, s](VarT<T>& self) {
    auto& g = a->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
  });
}

template <typename T>
VarPtr<T> relu(const VarPtr<T>& a) {
  TensorT<T> out(a->value.shape());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = a->value[i] > T(0) ? a->value[i] : T(0);
  return detail::make_op<T>(std::move(out), {a}, [a](VarT<T>& self) {
    auto& g = a->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i)
      if (a->value[i] > T(0)) g[i] += self.grad[i];
  });
}

template <typename T>
VarPtr<T> sigmoid(const VarPtr<T>& a) {
  TensorT<T> out(a->value.shape());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = T(1) / (T(1) + std::exp(-a->value[i]));
  auto outp = detail::make_op<T>(std::move(out), {a}, nullptr);
  if (outp->requires_grad) {
    outp->backward_fn = [a](VarT<T>& self) {
      auto& g = a->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) {
        const T s = self.value[i];
        g[i] += self.grad[i] * s * (T(1) - s);
      }
    };
  }
  return outp;
}

template <typename T>
VarPtr<T> exp_op(const VarPtr<T>& a) {
  TensorT<T> out(a->value.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a->value[i]);
  auto outp = detail::make_op<T>(std::move(out), {a}, nullptr);
  if (outp->requires_grad) {
    outp->backward_fn = [a](VarT<T>& self) {
      auto& g = a->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i)
        g[i] += self.grad[i] * self.value[i];
    };
  }
  return outp;
}

// ---- reductions / shape ----

template <typename T>
VarPtr<T> sum(const VarPtr<T>& a) {
  T acc = 0;
  for (size_t i = 0; i < a->value.size(); ++i) acc += a->value[i];
  TensorT<T> out({1}, std::vector<T>{acc});
  return detail::make_op<T>(std::move(out), {a}, [a](VarT<T>& self) {
    auto& g = a->ensure_grad();
    const T go = self.grad[0];
    for (size_t i = 0; i < g.size(); ++i) g[i] += go;
  });
}

template <typename T>
VarPtr<T> mean(const VarPtr<T>& a) {
  SIP_CHECK(a->value.size() > 0, "mean of empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a->value.size()));
}

template <typename T>
VarPtr<T> add_n(const std::vector<VarPtr<T>>& xs) {
  SIP_CHECK(!xs.empty(), "add_n of empty list");
  TensorT<T> out(xs[0]->value.shape());
  for (const auto& x : xs) {
    SIP_CHECK(x->value.same_shape(out), "add_n shape mismatch");
    for (size_t i = 0; i < out.size(); ++i) out[i] += x->value[i];
  }
  return detail::make_op<T>(std::move(out), xs, [xs](VarT<T>& self) {
    for (const auto& x : xs) {
      if (!x->requires_grad) continue;
      auto& g = x->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
VarPtr<T> reshape(const VarPtr<T>& a, std::vector<int> shape) {
  SIP_CHECK(TensorT<T>::count(shape) == a->value.size(),
            "reshape element count mismatch");
  TensorT<T> out(std::move(shape), a->value.vec());
  return detail::make_op<T>(std::move(out), {a}, [a](VarT<T>& self) {
    auto& g = a->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

// Channel concat of rank-3 H x W x C tensors.
template <typename T>
VarPtr<T> concat_channels(const std::vector<VarPtr<T>>& xs) {
  SIP_CHECK(!xs.empty(), "concat of empty list");
  const int h = xs[0]->value.dim(0), w = xs[0]->value.dim(1);
  int ctot = 0;
  for (const auto& x : xs) {
    SIP_CHECK(x->value.ndim() == 3 && x->value.dim(0) == h && x->value.dim(1) == w,
              "concat spatial mismatch");
    ctot += x->value.dim(2);
  }
  TensorT<T> out({h, w, ctot});
  int base = 0;
  for (const auto& x : xs) {
    const int c = x->value.dim(2);
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx)
        for (int ch = 0; ch < c; ++ch)
          out[(static_cast<size_t>(y) * w + xx) * ctot + base + ch] =
              x->value[(static_cast<size_t>(y) * w + xx) * c + ch];
    base += c;
  }
  return detail::make_op<T>(std::move(out), xs, [xs, h, w, ctot](VarT<T>& self) {
    int base2 = 0;
    for (const auto& x : xs) {
      const int c = x->value.dim(2);
      if (x->requires_grad) {
        auto& g = x->ensure_grad();
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx)
            for (int ch = 0; ch < c; ++ch)
              g[(static_cast<size_t>(y) * w + xx) * c + ch] +=
                  self.grad[(static_cast<size_t>(y) * w + xx) * ctot + base2 + ch];
      }
      base2 += c;
    }
  });
}

// Channel vector at one spatial location of an H x W x C tensor.
template <typename T>
VarPtr<T> gather_yx(const VarPtr<T>& a, int y, int x) {
  SIP_CHECK(a->value.ndim() == 3, "gather_yx needs rank-3");
  const int h = a->value.dim(0), w = a->value.dim(1), c = a->value.dim(2);
  SIP_CHECK(y >= 0 && y < h && x >= 0 && x < w,
            "gather_yx location (" << y << "," << x << ") out of grid");
  TensorT<T> out({c});
  const size_t off = (static_cast<size_t>(y) * w + x) * c;
  for (int ch = 0; ch < c; ++ch) out[ch] = a->value[off + ch];
  return detail::make_op<T>(std::move(out), {a}, [a, off, c](VarT<T>& self) {
    auto& g = a->ensure_grad();
    for (int ch = 0; ch < c; ++ch) g[off + ch] += self.grad[ch];
  });
}

// Rows gathered at (y, x) locations of an H x W x C tensor -> [n x C].
template <typename T>
VarPtr<T> gather_locations(const VarPtr<T>& a,
                           const std::vector<std::pair<int, int>>& locations) {
  SIP_CHECK(a->value.ndim() == 3, "gather_locations needs rank-3");
  const int h = a->value.dim(0), w = a->value.dim(1), c = a->value.dim(2);
  const int n = static_cast<int>(locations.size());
  TensorT<T> out({n, c});
  for (int i = 0; i < n; ++i) {
    const auto [y, x] = locations[static_cast<size_t>(i)];
    SIP_CHECK(y >= 0 && y < h && x >= 0 && x < w,
              "gather location (" << y << "," << x << ") out of grid");
    const size_t off = (static_cast<size_t>(y) * w + x) * c;
    for (int ch = 0; ch < c; ++ch)
      out[static_cast<size_t>(i) * c + ch] = a->value[off + ch];
  }
  return detail::make_op<T>(std::move(out), {a}, [a, locations, w, c](VarT<T>& self) {
    auto& g = a->ensure_grad();
    for (size_t i = 0; i < locations.size(); ++i) {
      const auto [y, x] = locations[i];
      const size_t off = (static_cast<size_t>(y) * w + x) * c;
      for (int ch = 0; ch < c; ++ch)
        g[off + ch] += self.grad[i * c + ch];
    }
  });
}

// General 2-D matmul: A [n x m] * B [m x p] -> [n x p].
template <typename T>
VarPtr<T> matmul(const VarPtr<T>& a, const VarPtr<T>& b) {
  SIP_CHECK(a->value.ndim() == 2 && b->value.ndim() == 2, "matmul needs rank-2");
  const int n = a->value.dim(0), m = a->value.dim(1), p = b->value.dim(1);
  SIP_CHECK(b->value.dim(0) == m, "matmul inner dims " << m << " vs " << b->value.dim(0));
  TensorT<T> out({n, p});
  const T* A = a->value.data();
  const T* B = b->value.data();
  T* O = out.data();
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < m; ++k) {
      const T av = A[static_cast<size_t>(i) * m + k];
      const T* brow = B + static_cast<size_t>(k) * p;
      T* orow = O + static_cast<size_t>(i) * p;
      for (int j = 0; j < p; ++j) orow[j] += av * brow[j];
    }
  return detail::make_op<T>(std::move(out), {a, b}, [a, b, n, m, p](VarT<T>& self) {
    const T* G = self.grad.data();
    if (a->requires_grad) {
      auto& ga = a->ensure_grad();
      const T* B = b->value.data();
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < m; ++k) {
          T acc = 0;
          const T* grow = G + static_cast<size_t>(i) * p;
          const T* brow = B + static_cast<size_t>(k) * p;
          for (int j = 0; j < p; ++j) acc += grow[j] * brow[j];
          ga[static_cast<size_t>(i) * m + k] += acc;
        }
    }
    if (b->requires_grad) {
      auto& gb = b->ensure_grad();
      const T* A = a->value.data();
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < m; ++k) {
          const T av = A[static_cast<size_t>(i) * m + k];
          const T* grow = G + static_cast<size_t>(i) * p;
          T* gbrow = gb.data() + static_cast<size_t>(k) * p;
          for (int j = 0; j < p; ++j) gbrow[j] += av * grow[j];
        }
    }
  });
}

}  // namespace sipmask
