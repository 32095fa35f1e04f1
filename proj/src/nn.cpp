#include "invmih/nn.hpp"

#include <cmath>

namespace invmih {

void SubnetConfig::validate() const {
  require(n_layers >= 1, "subnet_layers must be >= 1");
  require(growth_channels >= 1, "growth_channels must be >= 1");
  require(kernel_size >= 1 && kernel_size % 2 == 1, "kernel_size must be odd and positive");
  require(clamp_constant > 0.0, "clamp_constant must be positive");
}

template <typename T>
DenseSubnet<T>::DenseSubnet(int64_t in_channels, int64_t out_channels, const SubnetConfig& cfg,
                            std::mt19937_64& rng)
    : in_channels_(in_channels), out_channels_(out_channels), slope_(static_cast<T>(cfg.leaky_slope)) {
  cfg.validate();
  require(in_channels >= 1 && out_channels >= 1, "DenseSubnet: channel counts must be positive");
  const int64_t k = cfg.kernel_size;
  for (int layer = 0; layer < cfg.n_layers; ++layer) {
    const bool last = layer + 1 == cfg.n_layers;
    const int64_t cin = in_channels + static_cast<int64_t>(layer) * cfg.growth_channels;
    const int64_t cout = last ? out_channels : cfg.growth_channels;
    Tensor<T> w(Shape{cout, cin, k, k});
    if (!last) {
      // Xavier-normal for the hidden convolutions.
      const double stddev = std::sqrt(2.0 / static_cast<double>((cin + cout) * k * k));
      std::normal_distribution<double> dist(0.0, stddev);
      for (auto& v : w.values()) v = static_cast<T>(dist(rng));
    }
    weights_.emplace_back(std::move(w), false);
    biases_.emplace_back(Tensor<T>(Shape{1, cout, 1, 1}), false);
  }
}

template <typename T>
Var<T> DenseSubnet<T>::forward(const Var<T>& x) const {
  require(x.shape().c == in_channels_, "subnet expects " + std::to_string(in_channels_) +
                                           " input channels, got " + std::to_string(x.shape().c));
  std::vector<Var<T>> features{x};
  for (size_t layer = 0; layer < weights_.size(); ++layer) {
    Var<T> input = features.size() == 1 ? features.front() : ad::concat_channels<T>(features);
    Var<T> out = ad::conv2d(input, weights_[layer], biases_[layer]);
    if (layer + 1 == weights_.size()) return out;
    features.push_back(ad::leaky_relu(out, slope_));
  }
  return features.back();  // unreachable: n_layers >= 1
}

template <typename T>
int64_t DenseSubnet<T>::num_params() const {
  int64_t total = 0;
  for (size_t i = 0; i < weights_.size(); ++i) total += weights_[i].value().numel() + biases_[i].value().numel();
  return total;
}

template <typename T>
void DenseSubnet<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  for (size_t i = 0; i < weights_.size(); ++i) {
    out.push_back({prefix + ".conv" + std::to_string(i) + ".weight", weights_[i]});
    out.push_back({prefix + ".conv" + std::to_string(i) + ".bias", biases_[i]});
  }
}

template <typename T>
InvBlock<T>::InvBlock(int64_t low_channels, int64_t high_channels, const SubnetConfig& cfg,
                      std::mt19937_64& rng, int index)
    : index_(index),
      clamp_(static_cast<T>(cfg.clamp_constant)),
      phi_(high_channels, low_channels, cfg, rng),
      rho_(low_channels, high_channels, cfg, rng),
      psi_(low_channels, high_channels, cfg, rng) {}

template <typename T>
void InvBlock<T>::check_inputs(const Var<T>& low, const Var<T>& high) const {
  const Shape& l = low.shape();
  const Shape& h = high.shape();
  require(l.n == h.n && l.h == h.h && l.w == h.w,
          "InvBlock " + std::to_string(index_) + ": branch shapes " + l.str() + " and " + h.str() +
              " disagree");
  require(l.c == low_channels() && h.c == high_channels(),
          "InvBlock " + std::to_string(index_) + ": expected (" + std::to_string(low_channels()) + ", " +
              std::to_string(high_channels()) + ") channels, got (" + std::to_string(l.c) + ", " +
              std::to_string(h.c) + ")");
}

template <typename T>
void InvBlock<T>::check_finite(const Var<T>& low, const Var<T>& high, const char* pass) const {
  if (!all_finite(low.value()) || !all_finite(high.value())) {
    throw NumericError("InvBlock " + std::to_string(index_) + ": non-finite values in " + pass + " pass");
  }
}

template <typename T>
std::pair<Var<T>, Var<T>> InvBlock<T>::forward(const Var<T>& low, const Var<T>& high) const {
  check_inputs(low, high);
  Var<T> low_out = ad::add(low, phi_.forward(high));
  Var<T> log_scale = ad::clamp_scale(rho_.forward(low_out), clamp_);
  Var<T> high_out = ad::add(ad::mul(high, ad::exp(log_scale)), psi_.forward(low_out));
  check_finite(low_out, high_out, "forward");
  return {low_out, high_out};
}

template <typename T>
std::pair<Var<T>, Var<T>> InvBlock<T>::reverse(const Var<T>& low, const Var<T>& high) const {
  check_inputs(low, high);
  Var<T> log_scale = ad::clamp_scale(rho_.forward(low), clamp_);
  Var<T> high_in = ad::mul(ad::sub(high, psi_.forward(low)), ad::exp(ad::scale(log_scale, T(-1))));
  Var<T> low_in = ad::sub(low, phi_.forward(high_in));
  check_finite(low_in, high_in, "reverse");
  return {low_in, high_in};
}

template <typename T>
int64_t InvBlock<T>::num_params() const {
  return phi_.num_params() + rho_.num_params() + psi_.num_params();
}

template <typename T>
void InvBlock<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  phi_.collect(prefix + ".phi", out);
  rho_.collect(prefix + ".rho", out);
  psi_.collect(prefix + ".psi", out);
}

template <typename T>
InvStack<T>::InvStack(int count, int64_t low_channels, int64_t high_channels, const SubnetConfig& cfg,
                      std::mt19937_64& rng) {
  require(count >= 0, "block count must be non-negative");
  blocks_.reserve(count);
  for (int i = 0; i < count; ++i) blocks_.emplace_back(low_channels, high_channels, cfg, rng, i);
}

template <typename T>
std::pair<Var<T>, Var<T>> InvStack<T>::forward(Var<T> low, Var<T> high) const {
  for (const auto& block : blocks_) std::tie(low, high) = block.forward(low, high);
  return {low, high};
}

template <typename T>
std::pair<Var<T>, Var<T>> InvStack<T>::reverse(Var<T> low, Var<T> high) const {
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) std::tie(low, high) = it->reverse(low, high);
  return {low, high};
}

template <typename T>
int64_t InvStack<T>::num_params() const {
  int64_t total = 0;
  for (const auto& b : blocks_) total += b.num_params();
  return total;
}

template <typename T>
void InvStack<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  for (size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
}

template <typename T>
Tensor<T> clamp_scale(const Tensor<T>& u, T clamp_constant) {
  return ad::clamp_scale(Var<T>(u), clamp_constant).value();
}

template <typename T>
void perturb_parameters(const std::vector<NamedParam<T>>& params, uint64_t seed, double stddev) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  for (const auto& p : params) {
    Var<T> v = p.var;
    for (auto& x : v.mutable_value().values()) x += static_cast<T>(dist(rng));
  }
}

template <typename T>
void set_requires_grad(const std::vector<NamedParam<T>>& params, bool on) {
  for (const auto& p : params) {
    Var<T> v = p.var;
    v.set_requires_grad(on);
    if (!on) v.zero_grad();
  }
}

template <typename T>
int64_t count_elements(const std::vector<NamedParam<T>>& params) {
  int64_t total = 0;
  for (const auto& p : params) total += p.var.value().numel();
  return total;
}

#define INVMIH_INSTANTIATE(T)                                                           \
  template class DenseSubnet<T>;                                                        \
  template class InvBlock<T>;                                                           \
  template class InvStack<T>;                                                           \
  template Tensor<T> clamp_scale(const Tensor<T>&, T);                                  \
  template void perturb_parameters(const std::vector<NamedParam<T>>&, uint64_t, double); \
  template void set_requires_grad(const std::vector<NamedParam<T>>&, bool);             \
  template int64_t count_elements(const std::vector<NamedParam<T>>&);

INVMIH_INSTANTIATE(float)
INVMIH_INSTANTIATE(double)
#undef INVMIH_INSTANTIATE

}  // namespace invmih
