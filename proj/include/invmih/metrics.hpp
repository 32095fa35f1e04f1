#pragma once

#include <limits>

#include "invmih/tensor.hpp"

namespace invmih {

// Returned by psnr() for identical images.
inline constexpr double kPsnrInfinity = std::numeric_limits<double>::infinity();

// 10 log10(1 / MSE) for images in [0, 1].
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b);

// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// dynamic range 1, valid filtering; computed per (batch, channel) plane and averaged.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b);

// Mean of the contrast-structure factor (2 cov + C2) / (var_a + var_b + C2)
// under the same window; the part of SSIM that ignores local means.
template <typename T>
double ssim_contrast_structure(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace invmih
