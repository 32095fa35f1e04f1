#include "invmih/bicubic.hpp"

#include <algorithm>
#include <cmath>

namespace invmih {

double cubic_kernel(double t, double a) {
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

Eigen::MatrixXd bicubic_weights(int64_t in_size, int64_t out_size) {
  require(in_size >= 1 && out_size >= 1, "bicubic_weights: sizes must be positive");
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  const double stretch = std::max(scale, 1.0);
  const double support = 2.0 * stretch;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(out_size, in_size);
  for (int64_t i = 0; i < out_size; ++i) {
    const double center = (static_cast<double>(i) + 0.5) * scale;
    const int64_t lo = std::max<int64_t>(0, static_cast<int64_t>(std::floor(center - support)));
    const int64_t hi = std::min<int64_t>(in_size - 1, static_cast<int64_t>(std::ceil(center + support)));
    double total = 0.0;
    for (int64_t j = lo; j <= hi; ++j) {
      const double v = cubic_kernel((static_cast<double>(j) + 0.5 - center) / stretch);
      w(i, j) = v;
      total += v;
    }
    w.row(i) /= total;
  }
  return w;
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// out_plane = rows * in_plane * cols^T for every (b, c) plane.
template <typename T>
Tensor<T> apply_separable(const Tensor<T>& x, const RowMat<T>& rows, const RowMat<T>& cols) {
  const Shape s = x.shape();
  Tensor<T> out(Shape{s.n, s.c, rows.rows(), cols.rows()});
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    Eigen::Map<const RowMat<T>> in(x.data() + p * s.plane(), s.h, s.w);
    Eigen::Map<RowMat<T>> o(out.data() + p * out.shape().plane(), rows.rows(), cols.rows());
    o.noalias() = rows * in * cols.transpose();
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& x, int64_t out_h, int64_t out_w) {
  const RowMat<T> rows = bicubic_weights(x.shape().h, out_h).template cast<T>();
  const RowMat<T> cols = bicubic_weights(x.shape().w, out_w).template cast<T>();
  return apply_separable(x, rows, cols);
}

template <typename T>
Tensor<T> bicubic_downscale(const Tensor<T>& x, const MosaicLayout& layout) {
  const Shape s = x.shape();
  require(s.h % layout.m == 0 && s.w % layout.n == 0,
          "bicubic_downscale: image " + s.str() + " not divisible by grid " + std::to_string(layout.m) +
              "x" + std::to_string(layout.n));
  return bicubic_resize(x, s.h / layout.m, s.w / layout.n);
}

namespace ad {

template <typename T>
Var<T> bicubic_resize(const Var<T>& x, int64_t out_h, int64_t out_w) {
  const RowMat<T> rows = bicubic_weights(x.shape().h, out_h).template cast<T>();
  const RowMat<T> cols = bicubic_weights(x.shape().w, out_w).template cast<T>();
  const RowMat<T> rows_t = rows.transpose();
  const RowMat<T> cols_t = cols.transpose();
  return linear_map<T>(
      x, [&](const Tensor<T>& v) { return apply_separable(v, rows, cols); },
      [rows_t, cols_t](const Tensor<T>& g) { return apply_separable(g, rows_t, cols_t); });
}

}  // namespace ad

#define INVMIH_INSTANTIATE(T)                                                         \
  template Tensor<T> bicubic_resize(const Tensor<T>&, int64_t, int64_t);              \
  template Tensor<T> bicubic_downscale(const Tensor<T>&, const MosaicLayout&);        \
  namespace ad {                                                                      \
  template Var<T> bicubic_resize(const Var<T>&, int64_t, int64_t);                    \
  }

INVMIH_INSTANTIATE(float)
INVMIH_INSTANTIATE(double)
#undef INVMIH_INSTANTIATE

}  // namespace invmih
