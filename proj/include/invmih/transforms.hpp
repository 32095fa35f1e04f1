#pragma once

// Parameter-free invertible transforms: the Haar DWT, the generalized m x n
// decomposition and its inverse, mosaic splicing, and stego quantization.

#include <Eigen/Core>
#include <span>
#include <utility>
#include <vector>

#include "invmih/autograd.hpp"
#include "invmih/tensor.hpp"

namespace invmih {

// Geometry of the mosaic: an m x n grid (rows x cols) of tiles in row-major order.
// Tile extents are zero when not yet bound to an image size.
struct MosaicLayout {
  int m = 2;
  int n = 2;
  int64_t tile_h = 0;
  int64_t tile_w = 0;

  int count() const { return m * n; }
  int64_t mosaic_h() const { return m * tile_h; }
  int64_t mosaic_w() const { return n * tile_w; }

  // Layout whose mosaic (and full-size secret) is h x w.
  static MosaicLayout for_image(int m, int n, int64_t h, int64_t w);

  friend bool operator==(const MosaicLayout&, const MosaicLayout&) = default;
};

// Grid for N secrets when only the count is known: the most square factorization
// with rows <= cols (6 -> 2x3, 8 -> 2x4, 16 -> 4x4).
std::pair<int, int> grid_for_count(int count);

// Orthonormal mn x mn matrix. Row 0 is the uniform averaging row; the rest is a
// Gram-Schmidt completion over the standard basis. For 2x2 this is the Haar basis
// with rows (ll, lh, hl, hh).
Eigen::MatrixXd mixing_matrix(int m, int n);

template <typename T>
struct SubbandPair {
  Tensor<T> low;   // C channels
  Tensor<T> high;  // (mn - 1) * C channels, band-major
};

// Polyphase split into mn phases per channel followed by the mixing matrix.
// (B, C, H*m, W*n) -> (B, mn*C, H, W), channel index band * C + c.
template <typename T>
Tensor<T> polyphase_mix(const Tensor<T>& x, int m, int n);

// Exact inverse (and adjoint) of polyphase_mix.
template <typename T>
Tensor<T> polyphase_unmix(const Tensor<T>& y, int m, int n);

// Orthonormal 2D Haar: (B, C, H, W) -> (B, 4C, H/2, W/2), bands (ll, lh, hl, hh),
// with lh = (a - b + c - d)/2, hl = (a + b - c - d)/2, hh = (a - b - c + d)/2 for
// the 2x2 block [[a, b], [c, d]].
template <typename T>
Tensor<T> haar_dwt(const Tensor<T>& x);

template <typename T>
Tensor<T> haar_idwt(const Tensor<T>& y);

template <typename T>
SubbandPair<T> decompose_D(const Tensor<T>& x, const MosaicLayout& layout);

template <typename T>
Tensor<T> compose_Dinv(const SubbandPair<T>& sub, const MosaicLayout& layout);

template <typename T>
Tensor<T> splice_mosaic(std::span<const Tensor<T>> tiles, const MosaicLayout& layout);

template <typename T>
std::vector<Tensor<T>> unsplice_mosaic(const Tensor<T>& msi, const MosaicLayout& layout);

// round(clip(x, 0, 1) * 255) / 255, rounding half away from zero.
template <typename T>
Tensor<T> quantize(const Tensor<T>& x);

namespace ad {

template <typename T>
Var<T> polyphase_mix(const Var<T>& x, int m, int n);
template <typename T>
Var<T> polyphase_unmix(const Var<T>& y, int m, int n);
template <typename T>
Var<T> haar_dwt(const Var<T>& x);
template <typename T>
Var<T> haar_idwt(const Var<T>& y);
template <typename T>
Var<T> splice_mosaic(std::span<const Var<T>> tiles, const MosaicLayout& layout);
template <typename T>
std::vector<Var<T>> unsplice_mosaic(const Var<T>& msi, const MosaicLayout& layout);

}  // namespace ad

}  // namespace invmih
