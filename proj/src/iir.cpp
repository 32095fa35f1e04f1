#include "invmih/iir.hpp"

namespace invmih {

template <typename T>
IIRModel<T>::IIRModel(int m, int n, int channels, int num_blocks, const SubnetConfig& cfg, uint64_t seed)
    : m_(m), n_(n), channels_(channels) {
  require(m >= 1 && n >= 1, "IIR grid must be at least 1x1");
  require(channels >= 1, "IIR channel count must be positive");
  std::mt19937_64 rng(seed);
  // A 1x1 grid has no high branch, so there is nothing to couple.
  if (m * n > 1) blocks_ = InvStack<T>(num_blocks, channels, high_channels(), cfg, rng);
}

template <typename T>
void IIRModel<T>::check_secret(const Shape& s) const {
  require(s.c == channels_, "IIR expects " + std::to_string(channels_) + " channels, got " + s.str());
  require(s.h % m_ == 0 && s.w % n_ == 0, "IIR: secret " + s.str() + " not divisible by grid " +
                                              std::to_string(m_) + "x" + std::to_string(n_));
}

template <typename T>
Shape IIRModel<T>::latent_shape(const Shape& tile) const {
  return Shape{tile.n, high_channels(), tile.h, tile.w};
}

template <typename T>
IIRForwardOutput<T> IIRModel<T>::downscale(const Var<T>& x_s) const {
  check_secret(x_s.shape());
  Var<T> full = ad::polyphase_mix(x_s, m_, n_);
  if (m_ * n_ == 1) return {full, Var<T>()};
  Var<T> low = ad::slice_channels(full, 0, channels_);
  Var<T> high = ad::slice_channels(full, channels_, high_channels());
  auto [tile, r_high] = blocks_.forward(low, high);
  return {tile, r_high};
}

template <typename T>
Var<T> IIRModel<T>::upscale(const Var<T>& tile, const Var<T>& z) const {
  require(tile.shape().c == channels_, "IIR upscale: tile " + tile.shape().str() + " has wrong channels");
  if (m_ * n_ == 1) return ad::polyphase_unmix(tile, 1, 1);
  require(z.shape() == latent_shape(tile.shape()),
          "IIR upscale: latent " + z.shape().str() + " does not match " + latent_shape(tile.shape()).str());
  auto [low, high] = blocks_.reverse(tile, z);
  const Var<T> parts[] = {low, high};
  return ad::polyphase_unmix(ad::concat_channels<T>(parts), m_, n_);
}

template <typename T>
MosaicOutput<T> IIRModel<T>::downscale_all(std::span<const Var<T>> secrets) const {
  require(static_cast<int>(secrets.size()) == m_ * n_,
          "downscale_all: expected " + std::to_string(m_ * n_) + " secrets, got " +
              std::to_string(secrets.size()));
  for (const auto& s : secrets) {
    require(s.shape() == secrets.front().shape(), "downscale_all: secret shapes differ: " +
                                                      s.shape().str() + " vs " +
                                                      secrets.front().shape().str());
  }
  const int64_t batch = secrets.front().shape().n;
  auto out = downscale(ad::concat_batch<T>(secrets));
  std::vector<Var<T>> tiles;
  MosaicOutput<T> result;
  for (int k = 0; k < m_ * n_; ++k) {
    tiles.push_back(ad::slice_batch(out.tile, k * batch, batch));
    result.r_list.push_back(out.r_high ? ad::slice_batch(out.r_high, k * batch, batch) : Var<T>());
  }
  const Shape ts = tiles.front().shape();
  result.msi = ad::splice_mosaic<T>(tiles, MosaicLayout{m_, n_, ts.h, ts.w});
  return result;
}

template <typename T>
std::vector<Var<T>> IIRModel<T>::upscale_all(const Var<T>& msi, std::span<const Var<T>> latents) const {
  const MosaicLayout layout = MosaicLayout::for_image(m_, n_, msi.shape().h, msi.shape().w);
  auto tiles = ad::unsplice_mosaic(msi, layout);
  const int64_t batch = msi.shape().n;
  Var<T> z;
  if (m_ * n_ > 1) {
    require(static_cast<int>(latents.size()) == m_ * n_, "upscale_all: expected one latent per tile");
    z = ad::concat_batch<T>(latents);
  }
  Var<T> up = upscale(ad::concat_batch<T>(tiles), z);
  std::vector<Var<T>> out;
  for (int k = 0; k < m_ * n_; ++k) out.push_back(ad::slice_batch(up, k * batch, batch));
  return out;
}

template <typename T>
std::vector<Var<T>> IIRModel<T>::upscale_all(const Var<T>& msi, uint64_t seed, LatentMode mode) const {
  const MosaicLayout layout = MosaicLayout::for_image(m_, n_, msi.shape().h, msi.shape().w);
  std::vector<Var<T>> latents;
  if (m_ * n_ > 1) {
    const Shape all = latent_shape(Shape{msi.shape().n * m_ * n_, channels_, layout.tile_h, layout.tile_w});
    Var<T> z(sample_latent<T>(all, seed, mode));
    const int64_t batch = msi.shape().n;
    for (int k = 0; k < m_ * n_; ++k) latents.push_back(ad::slice_batch(z, k * batch, batch));
  }
  return upscale_all(msi, latents);
}

template <typename T>
std::vector<NamedParam<T>> IIRModel<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  blocks_.collect("iir", out);
  return out;
}

template class IIRModel<float>;
template class IIRModel<double>;

}  // namespace invmih
