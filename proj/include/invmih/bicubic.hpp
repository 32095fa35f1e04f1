#pragma once

#include <Eigen/Core>

#include "invmih/autograd.hpp"
#include "invmih/transforms.hpp"

namespace invmih {

// Keys cubic kernel with a = -0.5.
double cubic_kernel(double t, double a = -0.5);

// (out x in) resampling matrix. When shrinking, the kernel is stretched by the
// scale factor (anti-aliasing); taps outside the image are dropped and each row
// renormalized to sum to one.
Eigen::MatrixXd bicubic_weights(int64_t in_size, int64_t out_size);

template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& x, int64_t out_h, int64_t out_w);

// Shrinks by the grid factors: (B, C, H*m, W*n) -> (B, C, H, W).
template <typename T>
Tensor<T> bicubic_downscale(const Tensor<T>& x, const MosaicLayout& layout);

namespace ad {
template <typename T>
Var<T> bicubic_resize(const Var<T>& x, int64_t out_h, int64_t out_w);
}  // namespace ad

}  // namespace invmih
