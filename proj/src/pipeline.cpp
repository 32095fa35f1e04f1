#include "invmih/pipeline.hpp"

#include "invmih/bicubic.hpp"

namespace invmih {

void ModelConfig::validate() const {
  require(rows >= 1 && cols >= 1, "grid must be at least 1x1");
  require(channels >= 1, "channels must be positive");
  require(iir_blocks >= 0 && iih_blocks >= 0, "block counts must be non-negative");
  subnet.validate();
}

std::string to_string(Rescaler r) { return r == Rescaler::kBicubic ? "bicubic" : "invertible"; }

Rescaler rescaler_from_string(const std::string& s) {
  if (s == "invertible") return Rescaler::kInvertible;
  if (s == "bicubic") return Rescaler::kBicubic;
  throw std::invalid_argument("unknown rescaler '" + s + "' (expected invertible or bicubic)");
}

template <typename T>
InvMIHNet<T>::InvMIHNet(const ModelConfig& cfg)
    : config_((cfg.validate(), cfg)),
      iir_(cfg.rows, cfg.cols, cfg.channels, cfg.rescaler == Rescaler::kBicubic ? 0 : cfg.iir_blocks,
           cfg.subnet, derive_seed(cfg.init_seed, 0)),
      iih_(cfg.channels, cfg.iih_blocks, cfg.subnet, derive_seed(cfg.init_seed, 1)) {}

template <typename T>
std::vector<NamedParam<T>> InvMIHNet<T>::parameters() const {
  auto out = iir_.parameters();
  auto hide = iih_.parameters();
  out.insert(out.end(), hide.begin(), hide.end());
  return out;
}

template <typename T>
int64_t InvMIHNet<T>::num_params() const {
  return iir_.num_params() + iih_.num_params();
}

template <typename T>
MosaicOutput<T> InvMIHNet<T>::make_mosaic(std::span<const Var<T>> secrets) const {
  if (config_.rescaler == Rescaler::kInvertible) return iir_.downscale_all(secrets);
  require(static_cast<int>(secrets.size()) == config_.num_secrets(),
          "expected " + std::to_string(config_.num_secrets()) + " secrets, got " +
              std::to_string(secrets.size()));
  std::vector<Var<T>> tiles;
  for (const auto& s : secrets) {
    tiles.push_back(ad::bicubic_resize(s, s.shape().h / config_.rows, s.shape().w / config_.cols));
  }
  const Shape ts = tiles.front().shape();
  MosaicOutput<T> out;
  out.msi = ad::splice_mosaic<T>(tiles, MosaicLayout{config_.rows, config_.cols, ts.h, ts.w});
  out.r_list.resize(secrets.size());
  return out;
}

template <typename T>
std::vector<Var<T>> InvMIHNet<T>::restore_secrets(const Var<T>& msi, uint64_t seed, LatentMode mode) const {
  if (config_.rescaler == Rescaler::kInvertible) return iir_.upscale_all(msi, seed, mode);
  const MosaicLayout layout = MosaicLayout::for_image(config_.rows, config_.cols, msi.shape().h, msi.shape().w);
  std::vector<Var<T>> out;
  for (const auto& tile : ad::unsplice_mosaic(msi, layout)) {
    out.push_back(ad::bicubic_resize(tile, msi.shape().h, msi.shape().w));
  }
  return out;
}

template <typename T>
Concealed<T> InvMIHNet<T>::conceal(const Tensor<T>& cover, std::span<const Tensor<T>> secrets) const {
  std::vector<Var<T>> vars;
  for (const auto& s : secrets) vars.emplace_back(s);
  auto mosaic = make_mosaic(vars);
  auto out = iih_.conceal(Var<T>(cover), mosaic.msi);
  return {out.stego.value(), out.stego_pre_quant.value(), mosaic.msi.value()};
}

template <typename T>
Revealed<T> InvMIHNet<T>::reveal(const Tensor<T>& stego, uint64_t seed, LatentMode mode) const {
  Var<T> z(sample_latent<T>(iih_.latent_shape(stego.shape()), derive_seed(seed, 0), mode));
  auto revealed = iih_.reveal(Var<T>(stego), z);
  Revealed<T> out;
  out.msi = revealed.msi.value();
  out.cover = revealed.cover.value();
  for (const auto& v : restore_secrets(revealed.msi, derive_seed(seed, 1), mode)) out.secrets.push_back(v.value());
  return out;
}

template class InvMIHNet<float>;
template class InvMIHNet<double>;

}  // namespace invmih
