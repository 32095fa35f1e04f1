#include "invmih/metrics.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace invmih {

template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "psnr: shape " + a.shape().str() + " vs " + b.shape().str());
  long double acc = 0.0L;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const long double d = static_cast<long double>(a[i]) - b[i];
    acc += d * d;
  }
  const double mse = static_cast<double>(acc / a.numel());
  if (mse == 0.0) return kPsnrInfinity;
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> w{};
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

// Valid separable Gaussian filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int64_t h, int64_t w) {
  static const auto win = gaussian_window();
  const int64_t oh = h - kWindow + 1;
  const int64_t ow = w - kWindow + 1;
  std::vector<double> rows(static_cast<size_t>(h * ow));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += win[k] * plane[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<size_t>(oh * ow));
  for (int64_t y = 0; y < oh; ++y) {
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += win[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

// Mean over all planes of the SSIM map (full index or contrast-structure only).
template <typename T>
double ssim_impl(const Tensor<T>& a, const Tensor<T>& b, bool luminance) {
  require(a.shape() == b.shape(), "ssim: shape " + a.shape().str() + " vs " + b.shape().str());
  const Shape s = a.shape();
  require(s.h >= kWindow && s.w >= kWindow, "ssim: image " + s.str() + " smaller than the 11x11 window");
  const int64_t hw = s.plane();
  double total = 0.0;
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    std::vector<double> pa(hw), pb(hw), aa(hw), bb(hw), ab(hw);
    for (int64_t i = 0; i < hw; ++i) {
      pa[i] = a[p * hw + i];
      pb[i] = b[p * hw + i];
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, s.h, s.w);
    const auto mu_b = filter_valid(pb, s.h, s.w);
    const auto e_aa = filter_valid(aa, s.h, s.w);
    const auto e_bb = filter_valid(bb, s.h, s.w);
    const auto e_ab = filter_valid(ab, s.h, s.w);
    double plane_sum = 0.0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      double v = (2.0 * cov + kC2) / (var_a + var_b + kC2);
      if (luminance) {
        v *= (2.0 * mu_a[i] * mu_b[i] + kC1) / (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1);
      }
      plane_sum += v;
    }
    total += plane_sum / static_cast<double>(mu_a.size());
  }
  return total / static_cast<double>(s.n * s.c);
}

}  // namespace

template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
  return ssim_impl(a, b, true);
}

template <typename T>
double ssim_contrast_structure(const Tensor<T>& a, const Tensor<T>& b) {
  return ssim_impl(a, b, false);
}

template double psnr(const Tensor<float>&, const Tensor<float>&);
template double psnr(const Tensor<double>&, const Tensor<double>&);
template double ssim(const Tensor<float>&, const Tensor<float>&);
template double ssim(const Tensor<double>&, const Tensor<double>&);
template double ssim_contrast_structure(const Tensor<float>&, const Tensor<float>&);
template double ssim_contrast_structure(const Tensor<double>&, const Tensor<double>&);

}  // namespace invmih
