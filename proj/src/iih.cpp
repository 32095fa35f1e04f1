#include "invmih/iih.hpp"

namespace invmih {

template <typename T>
IIHModel<T>::IIHModel(int channels, int num_blocks, const SubnetConfig& cfg, uint64_t seed)
    : channels_(channels) {
  require(channels >= 1, "IIH channel count must be positive");
  std::mt19937_64 rng(seed);
  blocks_ = InvStack<T>(num_blocks, 4 * channels, 4 * channels, cfg, rng);
}

template <typename T>
Shape IIHModel<T>::latent_shape(const Shape& stego) const {
  return Shape{stego.n, 4 * stego.c, stego.h / 2, stego.w / 2};
}

template <typename T>
ConcealOutput<T> IIHModel<T>::conceal(const Var<T>& cover, const Var<T>& msi) const {
  require(cover.shape() == msi.shape(),
          "conceal: cover " + cover.shape().str() + " and mosaic " + msi.shape().str() + " differ");
  require(cover.shape().c == channels_, "conceal: expected " + std::to_string(channels_) + " channels");
  Var<T> cover_w = ad::haar_dwt(cover);
  auto [low, high] = blocks_.forward(cover_w, ad::haar_dwt(msi));
  // cover + IDWT(low - DWT(cover)) equals IDWT(low) in exact arithmetic; this
  // form also reproduces the cover bit-exactly when the blocks are the identity.
  Var<T> pre = ad::add(cover, ad::haar_idwt(ad::sub(low, cover_w)));
  return {ad::quantize_ste(pre), pre, high};
}

template <typename T>
RevealOutput<T> IIHModel<T>::reveal(const Var<T>& stego, const Var<T>& z) const {
  require(stego.shape().c == channels_, "reveal: expected " + std::to_string(channels_) + " channels");
  Var<T> low = ad::haar_dwt(stego);
  require(z.shape() == low.shape(),
          "reveal: latent " + z.shape().str() + " does not match " + low.shape().str());
  auto [cover_w, msi_w] = blocks_.reverse(low, z);
  return {ad::haar_idwt(msi_w), ad::add(stego, ad::haar_idwt(ad::sub(cover_w, low)))};
}

template <typename T>
std::vector<NamedParam<T>> IIHModel<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  blocks_.collect("iih", out);
  return out;
}

template class IIHModel<float>;
template class IIHModel<double>;

}  // namespace invmih
