#pragma once

// The affine coupling block and its densely connected subnetworks.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "invmih/autograd.hpp"

namespace invmih {

struct SubnetConfig {
  int n_layers = 5;
  int growth_channels = 32;
  int kernel_size = 3;
  double clamp_constant = 2.0;
  double leaky_slope = 0.2;

  void validate() const;
  friend bool operator==(const SubnetConfig&, const SubnetConfig&) = default;
};

template <typename T>
struct NamedParam {
  std::string name;
  Var<T> var;  // shares storage with the owning module
};

// Dense convolutional block: layer k sees concat(input, out_0..out_{k-1}).
// Hidden layers use growth_channels outputs and a leaky rectifier; the last
// layer is linear and starts at zero.
template <typename T>
class DenseSubnet {
 public:
  DenseSubnet(int64_t in_channels, int64_t out_channels, const SubnetConfig& cfg, std::mt19937_64& rng);

  Var<T> forward(const Var<T>& x) const;

  int64_t in_channels() const { return in_channels_; }
  int64_t out_channels() const { return out_channels_; }
  int64_t num_params() const;
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;

  std::vector<Var<T>>& weights() { return weights_; }
  std::vector<Var<T>>& biases() { return biases_; }

 private:
  int64_t in_channels_;
  int64_t out_channels_;
  T slope_;
  std::vector<Var<T>> weights_;
  std::vector<Var<T>> biases_;
};

// One coupling block over a (low, high) branch pair:
//   low'  = low + phi(high)
//   high' = high * exp(s(rho(low'))) + psi(low')
// with s the bounded scale from clamp_scale.
template <typename T>
class InvBlock {
 public:
  InvBlock(int64_t low_channels, int64_t high_channels, const SubnetConfig& cfg, std::mt19937_64& rng,
           int index = 0);

  std::pair<Var<T>, Var<T>> forward(const Var<T>& low, const Var<T>& high) const;
  std::pair<Var<T>, Var<T>> reverse(const Var<T>& low, const Var<T>& high) const;

  int index() const { return index_; }
  int64_t low_channels() const { return phi_.out_channels(); }
  int64_t high_channels() const { return phi_.in_channels(); }
  int64_t num_params() const;
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;

  DenseSubnet<T>& phi() { return phi_; }
  DenseSubnet<T>& rho() { return rho_; }
  DenseSubnet<T>& psi() { return psi_; }

 private:
  void check_inputs(const Var<T>& low, const Var<T>& high) const;
  void check_finite(const Var<T>& low, const Var<T>& high, const char* pass) const;

  int index_;
  T clamp_;
  DenseSubnet<T> phi_;
  DenseSubnet<T> rho_;
  DenseSubnet<T> psi_;
};

// Sequence of coupling blocks sharing branch widths; reverse runs them backwards.
template <typename T>
class InvStack {
 public:
  InvStack() = default;
  InvStack(int count, int64_t low_channels, int64_t high_channels, const SubnetConfig& cfg,
           std::mt19937_64& rng);

  std::pair<Var<T>, Var<T>> forward(Var<T> low, Var<T> high) const;
  std::pair<Var<T>, Var<T>> reverse(Var<T> low, Var<T> high) const;

  size_t size() const { return blocks_.size(); }
  InvBlock<T>& block(size_t i) { return blocks_[i]; }
  int64_t num_params() const;
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;

 private:
  std::vector<InvBlock<T>> blocks_;
};

// Bounded log-scale c * (2 * sigmoid(u) - 1) on plain tensors.
template <typename T>
Tensor<T> clamp_scale(const Tensor<T>& u, T clamp_constant);

// Adds N(0, stddev^2) noise to every parameter; used to leave the identity initialization.
template <typename T>
void perturb_parameters(const std::vector<NamedParam<T>>& params, uint64_t seed, double stddev);

template <typename T>
void set_requires_grad(const std::vector<NamedParam<T>>& params, bool on);

template <typename T>
int64_t count_elements(const std::vector<NamedParam<T>>& params);

}  // namespace invmih
