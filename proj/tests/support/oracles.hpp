#pragma once

// Independent reference implementations used to check the library: plain
// loops, no shared code paths with the code under test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "invmih/tensor.hpp"

namespace invmih::testing {

// Direct zero-padded "same" convolution, stride 1.
inline Tensor<double> naive_conv2d(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();  // (out, in, k, k)
  const int64_t k = ws.h, pad = k / 2;
  Tensor<double> out(Shape{xs.n, ws.n, xs.h, xs.w});
  for (int64_t n = 0; n < xs.n; ++n)
    for (int64_t o = 0; o < ws.n; ++o)
      for (int64_t y = 0; y < xs.h; ++y)
        for (int64_t xx = 0; xx < xs.w; ++xx) {
          double acc = b.empty() ? 0.0 : b.at(0, o, 0, 0);
          for (int64_t i = 0; i < ws.c; ++i)
            for (int64_t dy = 0; dy < k; ++dy)
              for (int64_t dx = 0; dx < k; ++dx) {
                const int64_t sy = y + dy - pad, sx = xx + dx - pad;
                if (sy < 0 || sy >= xs.h || sx < 0 || sx >= xs.w) continue;
                acc += w.at(o, i, dy, dx) * x.at(n, i, sy, sx);
              }
          out.at(n, o, y, xx) = acc;
        }
  return out;
}

// Modified Gram-Schmidt in long double: uniform first row, then the standard
// basis vectors in order, skipping those already in the span.
inline std::vector<std::vector<long double>> gram_schmidt_basis(int size) {
  std::vector<std::vector<long double>> rows;
  rows.emplace_back(size, 1.0L / std::sqrt(static_cast<long double>(size)));
  for (int j = 0; j < size && static_cast<int>(rows.size()) < size; ++j) {
    std::vector<long double> v(size, 0.0L);
    v[j] = 1.0L;
    for (const auto& r : rows) {
      long double d = 0;
      for (int i = 0; i < size; ++i) d += r[i] * v[i];
      for (int i = 0; i < size; ++i) v[i] -= d * r[i];
    }
    long double norm = 0;
    for (long double e : v) norm += e * e;
    norm = std::sqrt(norm);
    if (norm < 1e-9L) continue;
    for (auto& e : v) e /= norm;
    rows.push_back(v);
  }
  return rows;
}

template <typename T>
Tensor<T> scaled(Tensor<T> t, double factor) {
  for (T& v : t.values()) v = static_cast<T>(v * factor);
  return t;
}

struct GradCheck {
  double max_rel = 0.0;
  int checked = 0;
};

// Central differences of `loss` with respect to up to `samples` entries of
// `param` (chosen by a fixed RNG), compared against `analytic`. Entries where
// both gradients are below `floor` are compared absolutely against it.
inline GradCheck check_gradient(Tensor<double>& param, const Tensor<double>& analytic,
                                const std::function<double()>& loss, int samples = 20, double step = 1e-5,
                                double floor = 1e-7) {
  GradCheck out;
  std::mt19937_64 rng(1234);
  const int64_t n = param.numel();
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  if (static_cast<int64_t>(samples) < n) idx.resize(static_cast<size_t>(samples));
  for (int64_t i : idx) {
    const double saved = param[i];
    param[i] = saved + step;
    const double up = loss();
    param[i] = saved - step;
    const double down = loss();
    param[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.empty() ? 0.0 : analytic[i];
    const double scale = std::max({std::abs(a), std::abs(numeric), floor});
    out.max_rel = std::max(out.max_rel, std::abs(a - numeric) / scale);
    ++out.checked;
  }
  return out;
}

// Largest absolute deviation of any entry from `target`.
inline double max_abs_dev(const std::vector<double>& v, double target) {
  double m = 0.0;
  for (double e : v) m = std::max(m, std::abs(e - target));
  return m;
}

}  // namespace invmih::testing
