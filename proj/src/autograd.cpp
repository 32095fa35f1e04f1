#include "invmih/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace invmih {

template <typename T>
void Node<T>::accumulate(const Tensor<T>& g) {
  if (grad.empty()) {
    grad = g;
  } else {
    grad.add_(g);
  }
}

template <typename T>
void Node<T>::accumulate(Tensor<T>&& g) {
  if (grad.empty()) {
    grad = std::move(g);
  } else {
    grad.add_(g);
  }
}

template <typename T>
Tensor<T>& Node<T>::grad_buffer() {
  if (grad.empty()) grad = Tensor<T>(value.shape());
  return grad;
}

template <typename T>
Var<T>::Var(Tensor<T> value, bool requires_grad) : node_(std::make_shared<Node<T>>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

template <typename T>
void Var<T>::backward() const {
  require(node_ && node_->value.numel() == 1, "backward: root must hold a single element");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->accumulate(Tensor<T>(node_->value.shape(), T(1)));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
  // Interior nodes are single-use: free their buffers and break the graph.
  for (Node<T>* node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->parents.clear();
      node->grad = Tensor<T>();
    }
  }
}

namespace ad {

template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<typename Var<T>::NodePtr> parents, BackwardFn<T> fn) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const auto& p) { return p && p->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(fn);
  }
  return Var<T>(std::move(node));
}

namespace {

template <typename T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op) {
  require(a.shape() == b.shape(),
          std::string(op) + ": shape " + a.shape().str() + " vs " + b.shape().str());
}

template <typename T, typename F>
Tensor<T> map(const Tensor<T>& x, F f) {
  Tensor<T> out(x.shape());
  const T* src = x.data();
  T* dst = out.data();
  for (int64_t i = 0; i < x.numel(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fills col (cin*k*k, h*w) from one (cin, h, w) image with zero padding k/2.
template <typename T>
void im2col(const T* img, int64_t cin, int64_t h, int64_t w, int64_t k, T* col) {
  const int64_t pad = k / 2;
  for (int64_t ci = 0; ci < cin; ++ci) {
    const T* plane = img + ci * h * w;
    for (int64_t ky = 0; ky < k; ++ky) {
      for (int64_t kx = 0; kx < k; ++kx) {
        T* row = col + ((ci * k + ky) * k + kx) * h * w;
        const int64_t x0 = std::max<int64_t>(0, pad - kx);
        const int64_t x1 = std::min<int64_t>(w, w + pad - kx);
        for (int64_t y = 0; y < h; ++y) {
          T* dst = row + y * w;
          const int64_t sy = y + ky - pad;
          if (sy < 0 || sy >= h || x0 >= x1) {
            std::fill_n(dst, w, T(0));
            continue;
          }
          const T* src = plane + sy * w + (kx - pad);
          std::fill_n(dst, x0, T(0));
          std::copy(src + x0, src + x1, dst + x0);
          std::fill(dst + x1, dst + w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int64_t cin, int64_t h, int64_t w, int64_t k, T* img) {
  const int64_t pad = k / 2;
  for (int64_t ci = 0; ci < cin; ++ci) {
    T* plane = img + ci * h * w;
    for (int64_t ky = 0; ky < k; ++ky) {
      for (int64_t kx = 0; kx < k; ++kx) {
        const T* row = col + ((ci * k + ky) * k + kx) * h * w;
        const int64_t x0 = std::max<int64_t>(0, pad - kx);
        const int64_t x1 = std::min<int64_t>(w, w + pad - kx);
        for (int64_t y = 0; y < h; ++y) {
          const int64_t sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          const T* src = row + y * w;
          T* dst = plane + sy * w + (kx - pad);
          for (int64_t x = x0; x < x1; ++x) dst[x] += src[x];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "add");
  Tensor<T> out = a.value();
  out.add_(b.value());
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) p->accumulate(self.grad);
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "sub");
  Tensor<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) self.parents[1]->accumulate(map(self.grad, [](T g) { return -g; }));
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "mul");
  Tensor<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    const int64_t count = self.value.numel();
    if (pa->requires_grad) {
      Tensor<T> g(self.value.shape());
      for (int64_t i = 0; i < count; ++i) g[i] = self.grad[i] * pb->value[i];
      pa->accumulate(std::move(g));
    }
    if (pb->requires_grad) {
      Tensor<T> g(self.value.shape());
      for (int64_t i = 0; i < count; ++i) g[i] = self.grad[i] * pa->value[i];
      pb->accumulate(std::move(g));
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  return make_result<T>(map(a.value(), [factor](T v) { return v * factor; }), {a.node()},
                        [factor](Node<T>& self) {
                          self.parents[0]->accumulate(map(self.grad, [factor](T g) { return g * factor; }));
                        });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  return make_result<T>(map(a.value(), [](T v) { return std::exp(v); }), {a.node()}, [](Node<T>& self) {
    Tensor<T> g(self.value.shape());
    for (int64_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * self.value[i];
    self.parents[0]->accumulate(std::move(g));
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
  return make_result<T>(map(a.value(), [slope](T v) { return v > T(0) ? v : v * slope; }), {a.node()},
                        [slope](Node<T>& self) {
                          const Tensor<T>& x = self.parents[0]->value;
                          Tensor<T> g(x.shape());
                          for (int64_t i = 0; i < g.numel(); ++i) {
                            g[i] = x[i] > T(0) ? self.grad[i] : self.grad[i] * slope;
                          }
                          self.parents[0]->accumulate(std::move(g));
                        });
}

template <typename T>
Var<T> clamp_scale(const Var<T>& u, T clamp_constant) {
  const T c = clamp_constant;
  auto sigmoid = [](T v) { return T(1) / (T(1) + std::exp(-v)); };
  return make_result<T>(map(u.value(), [c, sigmoid](T v) { return c * (T(2) * sigmoid(v) - T(1)); }),
                        {u.node()}, [c, sigmoid](Node<T>& self) {
                          const Tensor<T>& x = self.parents[0]->value;
                          Tensor<T> g(x.shape());
                          for (int64_t i = 0; i < g.numel(); ++i) {
                            const T s = sigmoid(x[i]);
                            g[i] = self.grad[i] * T(2) * c * s * (T(1) - s);
                          }
                          self.parents[0]->accumulate(std::move(g));
                        });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  require(ws.h == ws.w && ws.h % 2 == 1, "conv2d: kernel must be square and odd, got " + ws.str());
  require(xs.c == ws.c, "conv2d: input has " + std::to_string(xs.c) + " channels, weight expects " +
                            std::to_string(ws.c));
  const bool has_bias = static_cast<bool>(bias);
  if (has_bias) {
    require(bias.shape() == Shape{1, ws.n, 1, 1}, "conv2d: bias shape " + bias.shape().str());
  }
  const int64_t k = ws.h;
  const int64_t cout = ws.n;
  const int64_t kdim = xs.c * k * k;
  const int64_t hw = xs.plane();

  Tensor<T> out(Shape{xs.n, cout, xs.h, xs.w});
  AlignedVector<T> col(k == 1 ? 0 : static_cast<size_t>(kdim * hw));
  Eigen::Map<const RowMat<T>> wmat(weight.value().data(), cout, kdim);
  for (int64_t b = 0; b < xs.n; ++b) {
    const T* img = x.value().data() + b * xs.c * hw;
    const T* colp = img;
    if (k != 1) {
      im2col(img, xs.c, xs.h, xs.w, k, col.data());
      colp = col.data();
    }
    Eigen::Map<const RowMat<T>> cmat(colp, kdim, hw);
    Eigen::Map<RowMat<T>> omat(out.data() + b * cout * hw, cout, hw);
    omat.noalias() = wmat * cmat;
    if (has_bias) {
      for (int64_t co = 0; co < cout; ++co) omat.row(co).array() += bias.value()[co];
    }
  }

  std::vector<typename Var<T>::NodePtr> parents{x.node(), weight.node()};
  if (has_bias) parents.push_back(bias.node());
  return make_result<T>(std::move(out), std::move(parents), [xs, k, cout, kdim, hw](Node<T>& self) {
    auto& px = self.parents[0];
    auto& pw = self.parents[1];
    Node<T>* pb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
    Eigen::Map<const RowMat<T>> wmat(pw->value.data(), cout, kdim);
    AlignedVector<T> col(k == 1 ? 0 : static_cast<size_t>(kdim * hw));
    AlignedVector<T> dcol(static_cast<size_t>(kdim * hw));
    T* dw = pw->requires_grad ? pw->grad_buffer().data() : nullptr;
    T* db = (pb && pb->requires_grad) ? pb->grad_buffer().data() : nullptr;
    T* dx = px->requires_grad ? px->grad_buffer().data() : nullptr;
    for (int64_t b = 0; b < xs.n; ++b) {
      Eigen::Map<const RowMat<T>> gmat(self.grad.data() + b * cout * hw, cout, hw);
      const T* img = px->value.data() + b * xs.c * hw;
      if (dw) {
        const T* colp = img;
        if (k != 1) {
          im2col(img, xs.c, xs.h, xs.w, k, col.data());
          colp = col.data();
        }
        Eigen::Map<const RowMat<T>> cmat(colp, kdim, hw);
        Eigen::Map<RowMat<T>> dwmat(dw, cout, kdim);
        dwmat.noalias() += gmat * cmat.transpose();
      }
      if (db) {
        for (int64_t co = 0; co < cout; ++co) db[co] += gmat.row(co).sum();
      }
      if (dx) {
        T* dimg = dx + b * xs.c * hw;
        if (k == 1) {
          Eigen::Map<RowMat<T>> dmat(dimg, kdim, hw);
          dmat.noalias() += wmat.transpose() * gmat;
        } else {
          Eigen::Map<RowMat<T>> dmat(dcol.data(), kdim, hw);
          dmat.noalias() = wmat.transpose() * gmat;
          col2im(dcol.data(), xs.c, xs.h, xs.w, k, dimg);
        }
      }
    }
  });
}

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> parts) {
  std::vector<Tensor<T>> values;
  std::vector<typename Var<T>::NodePtr> parents;
  std::vector<int64_t> widths;
  values.reserve(parts.size());
  for (const auto& p : parts) {
    values.push_back(p.value());
    parents.push_back(p.node());
    widths.push_back(p.shape().c);
  }
  Tensor<T> out = invmih::concat_channels<T>(values);
  return make_result<T>(std::move(out), std::move(parents), [widths](Node<T>& self) {
    int64_t start = 0;
    for (size_t i = 0; i < widths.size(); ++i) {
      if (self.parents[i]->requires_grad) {
        self.parents[i]->accumulate(invmih::slice_channels(self.grad, start, widths[i]));
      }
      start += widths[i];
    }
  });
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, int64_t start, int64_t count) {
  Tensor<T> out = invmih::slice_channels(x.value(), start, count);
  return make_result<T>(std::move(out), {x.node()}, [start, count](Node<T>& self) {
    Tensor<T>& g = self.parents[0]->grad_buffer();
    const Shape& s = g.shape();
    const int64_t plane = s.plane();
    for (int64_t b = 0; b < s.n; ++b) {
      T* dst = g.data() + (b * s.c + start) * plane;
      const T* src = self.grad.data() + b * count * plane;
      for (int64_t i = 0; i < count * plane; ++i) dst[i] += src[i];
    }
  });
}

template <typename T>
Var<T> concat_batch(std::span<const Var<T>> parts) {
  std::vector<Tensor<T>> values;
  std::vector<typename Var<T>::NodePtr> parents;
  std::vector<int64_t> counts;
  for (const auto& p : parts) {
    values.push_back(p.value());
    parents.push_back(p.node());
    counts.push_back(p.shape().n);
  }
  Tensor<T> out = invmih::concat_batch<T>(values);
  return make_result<T>(std::move(out), std::move(parents), [counts](Node<T>& self) {
    int64_t start = 0;
    for (size_t i = 0; i < counts.size(); ++i) {
      if (self.parents[i]->requires_grad) {
        self.parents[i]->accumulate(invmih::slice_batch(self.grad, start, counts[i]));
      }
      start += counts[i];
    }
  });
}

template <typename T>
Var<T> slice_batch(const Var<T>& x, int64_t start, int64_t count) {
  Tensor<T> out = invmih::slice_batch(x.value(), start, count);
  return make_result<T>(std::move(out), {x.node()}, [start](Node<T>& self) {
    Tensor<T>& g = self.parents[0]->grad_buffer();
    const int64_t per = g.shape().c * g.shape().plane();
    T* dst = g.data() + start * per;
    for (int64_t i = 0; i < self.grad.numel(); ++i) dst[i] += self.grad[i];
  });
}

template <typename T>
Var<T> quantize_ste(const Var<T>& x) {
  Tensor<T> out = map(x.value(), [](T v) {
    const T c = std::clamp(v, T(0), T(1));
    return static_cast<T>(std::round(c * T(255)) / T(255));
  });
  return make_result<T>(std::move(out), {x.node()}, [](Node<T>& self) {
    const Tensor<T>& in = self.parents[0]->value;
    Tensor<T> g(in.shape());
    for (int64_t i = 0; i < g.numel(); ++i) {
      g[i] = (in[i] >= T(0) && in[i] <= T(1)) ? self.grad[i] : T(0);
    }
    self.parents[0]->accumulate(std::move(g));
  });
}

template <typename T>
Var<T> mean_abs_error(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "mean_abs_error");
  const int64_t count = a.value().numel();
  long double acc = 0.0L;
  for (int64_t i = 0; i < count; ++i) acc += std::abs(a.value()[i] - b.value()[i]);
  Tensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(acc / count));
  return make_result<T>(std::move(out), {a.node(), b.node()}, [count](Node<T>& self) {
    const Tensor<T>& av = self.parents[0]->value;
    const Tensor<T>& bv = self.parents[1]->value;
    const T g0 = self.grad[0] / static_cast<T>(count);
    Tensor<T> g(av.shape());
    for (int64_t i = 0; i < count; ++i) {
      const T d = av[i] - bv[i];
      g[i] = d > T(0) ? g0 : (d < T(0) ? -g0 : T(0));
    }
    if (self.parents[1]->requires_grad) self.parents[1]->accumulate(map(g, [](T v) { return -v; }));
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(std::move(g));
  });
}

template <typename T>
Var<T> mean_squared_error(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "mean_squared_error");
  const int64_t count = a.value().numel();
  long double acc = 0.0L;
  for (int64_t i = 0; i < count; ++i) {
    const long double d = static_cast<long double>(a.value()[i]) - b.value()[i];
    acc += d * d;
  }
  Tensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(acc / count));
  return make_result<T>(std::move(out), {a.node(), b.node()}, [count](Node<T>& self) {
    const Tensor<T>& av = self.parents[0]->value;
    const Tensor<T>& bv = self.parents[1]->value;
    const T g0 = T(2) * self.grad[0] / static_cast<T>(count);
    Tensor<T> g(av.shape());
    for (int64_t i = 0; i < count; ++i) g[i] = g0 * (av[i] - bv[i]);
    if (self.parents[1]->requires_grad) self.parents[1]->accumulate(map(g, [](T v) { return -v; }));
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(std::move(g));
  });
}

template <typename T>
Var<T> linear_map(const Var<T>& x, const std::function<Tensor<T>(const Tensor<T>&)>& forward,
                  std::function<Tensor<T>(const Tensor<T>&)> adjoint) {
  return make_result<T>(forward(x.value()), {x.node()}, [adjoint = std::move(adjoint)](Node<T>& self) {
    self.parents[0]->accumulate(adjoint(self.grad));
  });
}

}  // namespace ad

#define INVMIH_INSTANTIATE(T)                                                                     \
  template struct Node<T>;                                                                        \
  template class Var<T>;                                                                          \
  namespace ad {                                                                                  \
  template Var<T> make_result(Tensor<T>, std::vector<Var<T>::NodePtr>, BackwardFn<T>);            \
  template Var<T> add(const Var<T>&, const Var<T>&);                                              \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                              \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                              \
  template Var<T> scale(const Var<T>&, T);                                                        \
  template Var<T> exp(const Var<T>&);                                                             \
  template Var<T> leaky_relu(const Var<T>&, T);                                                   \
  template Var<T> clamp_scale(const Var<T>&, T);                                                  \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&);                            \
  template Var<T> concat_channels(std::span<const Var<T>>);                                       \
  template Var<T> slice_channels(const Var<T>&, int64_t, int64_t);                                \
  template Var<T> concat_batch(std::span<const Var<T>>);                                          \
  template Var<T> slice_batch(const Var<T>&, int64_t, int64_t);                                   \
  template Var<T> quantize_ste(const Var<T>&);                                                    \
  template Var<T> mean_abs_error(const Var<T>&, const Var<T>&);                                   \
  template Var<T> mean_squared_error(const Var<T>&, const Var<T>&);                               \
  template Var<T> linear_map(const Var<T>&, const std::function<Tensor<T>(const Tensor<T>&)>&,    \
                             std::function<Tensor<T>(const Tensor<T>&)>);                         \
  }

INVMIH_INSTANTIATE(float)
INVMIH_INSTANTIATE(double)
#undef INVMIH_INSTANTIATE

}  // namespace invmih
