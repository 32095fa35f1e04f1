#pragma once

// Invertible hiding in the Haar domain: the cover occupies the additive branch,
// the mosaic the affine branch. The stego is the inverse DWT of the cover branch
// after G coupling blocks; the mosaic branch output is the latent r_hide.

#include "invmih/latent.hpp"
#include "invmih/nn.hpp"
#include "invmih/transforms.hpp"

namespace invmih {

template <typename T>
struct ConcealOutput {
  Var<T> stego;            // quantized; gradient passes straight through the rounding
  Var<T> stego_pre_quant;
  Var<T> r_hide;           // (B, 4C, H/2, W/2), wavelet domain
};

template <typename T>
struct RevealOutput {
  Var<T> msi;    // recovered mosaic, x_ds_hat
  Var<T> cover;  // recovered cover, diagnostic only
};

template <typename T>
class IIHModel {
 public:
  IIHModel(int channels, int num_blocks, const SubnetConfig& cfg, uint64_t seed);

  ConcealOutput<T> conceal(const Var<T>& cover, const Var<T>& msi) const;
  RevealOutput<T> reveal(const Var<T>& stego, const Var<T>& z) const;

  Shape latent_shape(const Shape& stego) const;
  int channels() const { return channels_; }
  size_t num_blocks() const { return blocks_.size(); }
  InvStack<T>& blocks() { return blocks_; }

  std::vector<NamedParam<T>> parameters() const;
  int64_t num_params() const { return blocks_.num_params(); }

 private:
  int channels_;
  InvStack<T> blocks_;
};

}  // namespace invmih
