#include "invmih/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace invmih {

std::string Shape::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
         std::to_string(w) + ")";
}

void require(bool cond, const std::string& what) {
  if (!cond) throw ShapeError(what);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(shape) {
  require(shape.valid(), "tensor extents must all be >= 1, got " + shape.str());
  data_.assign(static_cast<size_t>(shape.numel()), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(shape), data_(values.begin(), values.end()) {
  require(shape.valid(), "tensor extents must all be >= 1, got " + shape.str());
  require(static_cast<int64_t>(data_.size()) == shape.numel(),
          "value count " + std::to_string(data_.size()) + " does not match shape " + shape.str());
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
void Tensor<T>::add_(const Tensor& other) {
  require(shape_ == other.shape_, "add_: shape " + shape_.str() + " vs " + other.shape_.str());
  const T* src = other.data();
  T* dst = data_.data();
  const size_t count = data_.size();
  for (size_t i = 0; i < count; ++i) dst[i] += src[i];
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
double max_abs(const Tensor<T>& t) {
  double m = 0.0;
  for (T v : t.values()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "max_abs_diff: shape " + a.shape().str() + " vs " + b.shape().str());
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

template <typename T>
double l2_norm(const Tensor<T>& t) {
  long double acc = 0.0L;
  for (T v : t.values()) acc += static_cast<long double>(v) * v;
  return static_cast<double>(std::sqrt(acc));
}

template <typename T>
Tensor<T> randn(Shape shape, uint64_t seed) {
  Tensor<T> out(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : out.values()) v = static_cast<T>(dist(rng));
  return out;
}

template <typename T>
Tensor<T> rand_uniform(Shape shape, uint64_t seed, T lo, T hi) {
  Tensor<T> out(shape);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : out.values()) v = static_cast<T>(dist(rng));
  return out;
}

template <typename T>
Tensor<T> concat_batch(std::span<const Tensor<T>> parts) {
  require(!parts.empty(), "concat_batch: no inputs");
  Shape s = parts.front().shape();
  int64_t total = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    require(ps.c == s.c && ps.h == s.h && ps.w == s.w,
            "concat_batch: shape " + ps.str() + " incompatible with " + s.str());
    total += ps.n;
  }
  s.n = total;
  std::vector<T> out;
  out.reserve(static_cast<size_t>(s.numel()));
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return Tensor<T>(s, std::move(out));
}

template <typename T>
Tensor<T> slice_batch(const Tensor<T>& t, int64_t start, int64_t count) {
  const Shape& s = t.shape();
  require(start >= 0 && count >= 1 && start + count <= s.n,
          "slice_batch: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
              ") outside batch of " + std::to_string(s.n));
  const int64_t per = s.c * s.h * s.w;
  std::vector<T> out(t.data() + start * per, t.data() + (start + count) * per);
  return Tensor<T>(Shape{count, s.c, s.h, s.w}, std::move(out));
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  require(!parts.empty(), "concat_channels: no inputs");
  Shape s = parts.front().shape();
  int64_t channels = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    require(ps.n == s.n && ps.h == s.h && ps.w == s.w,
            "concat_channels: shape " + ps.str() + " incompatible with " + s.str());
    channels += ps.c;
  }
  Shape os{s.n, channels, s.h, s.w};
  Tensor<T> out(os);
  const int64_t plane = s.plane();
  for (int64_t b = 0; b < s.n; ++b) {
    T* dst = out.data() + b * channels * plane;
    for (const auto& p : parts) {
      const int64_t len = p.shape().c * plane;
      std::copy_n(p.data() + b * len, len, dst);
      dst += len;
    }
  }
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, int64_t start, int64_t count) {
  const Shape& s = t.shape();
  require(start >= 0 && count >= 1 && start + count <= s.c,
          "slice_channels: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
              ") outside " + std::to_string(s.c) + " channels");
  Tensor<T> out(Shape{s.n, count, s.h, s.w});
  const int64_t plane = s.plane();
  for (int64_t b = 0; b < s.n; ++b) {
    std::copy_n(t.data() + (b * s.c + start) * plane, count * plane, out.data() + b * count * plane);
  }
  return out;
}

#define INVMIH_INSTANTIATE(T)                                                          \
  template class Tensor<T>;                                                            \
  template bool all_finite(const Tensor<T>&);                                          \
  template double max_abs(const Tensor<T>&);                                           \
  template double max_abs_diff(const Tensor<T>&, const Tensor<T>&);                    \
  template double l2_norm(const Tensor<T>&);                                           \
  template Tensor<T> randn(Shape, uint64_t);                                           \
  template Tensor<T> rand_uniform(Shape, uint64_t, T, T);                              \
  template Tensor<T> concat_batch(std::span<const Tensor<T>>);                         \
  template Tensor<T> slice_batch(const Tensor<T>&, int64_t, int64_t);                  \
  template Tensor<T> concat_channels(std::span<const Tensor<T>>);                      \
  template Tensor<T> slice_channels(const Tensor<T>&, int64_t, int64_t);

INVMIH_INSTANTIATE(float)
INVMIH_INSTANTIATE(double)
#undef INVMIH_INSTANTIATE

}  // namespace invmih
