#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace invmih {

// Raised when tensor shapes violate an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a computation produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every buffer starts on the same boundary, so vectorized Eigen kernels take
// the same path on every run and results stay bit-reproducible.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

// NCHW extents. Every image-like value in the library is rank 4.
struct Shape {
  int64_t n = 0;
  int64_t c = 0;
  int64_t h = 0;
  int64_t w = 0;

  int64_t numel() const { return n * c * h * w; }
  int64_t plane() const { return h * w; }
  bool valid() const { return n >= 1 && c >= 1 && h >= 1 && w >= 1; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  const Shape& shape() const { return shape_; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  AlignedVector<T>& storage() { return data_; }
  const AlignedVector<T>& storage() const { return data_; }

  int64_t index(int64_t n, int64_t c, int64_t y, int64_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& at(int64_t n, int64_t c, int64_t y, int64_t x) { return data_[index(n, c, y, x)]; }
  T at(int64_t n, int64_t c, int64_t y, int64_t x) const { return data_[index(n, c, y, x)]; }
  T& operator[](int64_t i) { return data_[i]; }
  T operator[](int64_t i) const { return data_[i]; }

  void fill(T v);
  // Elementwise this += other; shapes must agree.
  void add_(const Tensor& other);

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

 private:
  Shape shape_{};
  AlignedVector<T> data_;
};

template <typename T>
bool all_finite(const Tensor<T>& t);

template <typename T>
double max_abs(const Tensor<T>& t);

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
double l2_norm(const Tensor<T>& t);

// i.i.d. standard normal draws; deterministic in `seed`.
template <typename T>
Tensor<T> randn(Shape shape, uint64_t seed);

// i.i.d. uniform draws in [lo, hi); deterministic in `seed`.
template <typename T>
Tensor<T> rand_uniform(Shape shape, uint64_t seed, T lo = T(0), T hi = T(1));

// Concatenate along the batch axis; all other extents must agree.
template <typename T>
Tensor<T> concat_batch(std::span<const Tensor<T>> parts);

template <typename T>
Tensor<T> slice_batch(const Tensor<T>& t, int64_t start, int64_t count);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts);

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, int64_t start, int64_t count);

void require(bool cond, const std::string& what);

}  // namespace invmih
