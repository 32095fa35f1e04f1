#pragma once

// Invertible rescaling: each secret image is decomposed into m x n subbands and
// pushed through R coupling blocks. The low branch becomes the mosaic tile and
// the high branch the image-agnostic residual r_high.

#include <span>
#include <vector>

#include "invmih/latent.hpp"
#include "invmih/nn.hpp"
#include "invmih/transforms.hpp"

namespace invmih {

template <typename T>
struct IIRForwardOutput {
  Var<T> tile;    // (B, C, H, W)
  Var<T> r_high;  // (B, (mn - 1) C, H, W); null for a 1x1 grid
};

template <typename T>
struct MosaicOutput {
  Var<T> msi;
  std::vector<Var<T>> r_list;  // one residual per secret, in input order
};

template <typename T>
class IIRModel {
 public:
  IIRModel(int m, int n, int channels, int num_blocks, const SubnetConfig& cfg, uint64_t seed);

  IIRForwardOutput<T> downscale(const Var<T>& x_s) const;
  Var<T> upscale(const Var<T>& tile, const Var<T>& z) const;

  // Shared-weight downscale of all N secrets (one batched pass), spliced row-major.
  MosaicOutput<T> downscale_all(std::span<const Var<T>> secrets) const;
  // Unsplice and upscale with residuals drawn from `seed`.
  std::vector<Var<T>> upscale_all(const Var<T>& msi, uint64_t seed,
                                  LatentMode mode = LatentMode::kNormal) const;
  // Unsplice and upscale with caller-supplied residuals (one per tile).
  std::vector<Var<T>> upscale_all(const Var<T>& msi, std::span<const Var<T>> latents) const;

  int rows() const { return m_; }
  int cols() const { return n_; }
  int channels() const { return channels_; }
  int64_t high_channels() const { return static_cast<int64_t>(m_ * n_ - 1) * channels_; }
  size_t num_blocks() const { return blocks_.size(); }
  InvStack<T>& blocks() { return blocks_; }
  // Residual shape for a tile of the given shape.
  Shape latent_shape(const Shape& tile) const;

  std::vector<NamedParam<T>> parameters() const;
  int64_t num_params() const { return blocks_.num_params(); }

 private:
  void check_secret(const Shape& s) const;

  int m_;
  int n_;
  int channels_;
  InvStack<T> blocks_;
};

}  // namespace invmih
