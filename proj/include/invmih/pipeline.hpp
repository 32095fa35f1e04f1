#pragma once

// End-to-end concealment and revealment: IIR downscaling into a mosaic, IIH
// hiding of the mosaic in the cover, and the reverse path.

#include <span>
#include <string>
#include <vector>

#include "invmih/iih.hpp"
#include "invmih/iir.hpp"

namespace invmih {

enum class Rescaler { kInvertible, kBicubic };

struct ModelConfig {
  int rows = 2;
  int cols = 2;
  int channels = 3;
  int iir_blocks = 8;
  int iih_blocks = 16;
  SubnetConfig subnet;
  Rescaler rescaler = Rescaler::kInvertible;
  uint64_t init_seed = 0;

  int num_secrets() const { return rows * cols; }
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string to_string(Rescaler r);
Rescaler rescaler_from_string(const std::string& s);

template <typename T>
struct Concealed {
  Tensor<T> stego;            // on the 1/255 grid
  Tensor<T> stego_pre_quant;
  Tensor<T> msi;
};

template <typename T>
struct Revealed {
  std::vector<Tensor<T>> secrets;  // row-major tile order
  Tensor<T> msi;
  Tensor<T> cover;
};

template <typename T>
class InvMIHNet {
 public:
  explicit InvMIHNet(const ModelConfig& cfg);

  const ModelConfig& config() const { return config_; }
  IIRModel<T>& iir() { return iir_; }
  const IIRModel<T>& iir() const { return iir_; }
  IIHModel<T>& iih() { return iih_; }
  const IIHModel<T>& iih() const { return iih_; }

  std::vector<NamedParam<T>> parameters() const;
  int64_t num_params() const;

  // Differentiable pieces used by training.
  MosaicOutput<T> make_mosaic(std::span<const Var<T>> secrets) const;
  std::vector<Var<T>> restore_secrets(const Var<T>& msi, uint64_t seed, LatentMode mode) const;

  // Frozen-parameter paths on plain tensors.
  Concealed<T> conceal(const Tensor<T>& cover, std::span<const Tensor<T>> secrets) const;
  Revealed<T> reveal(const Tensor<T>& stego, uint64_t seed, LatentMode mode = LatentMode::kNormal) const;

 private:
  ModelConfig config_;
  IIRModel<T> iir_;
  IIHModel<T> iih_;
};

}  // namespace invmih
