#include "invmih/latent.hpp"

namespace invmih {

uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <typename T>
Tensor<T> sample_latent(Shape shape, uint64_t seed, LatentMode mode) {
  if (mode == LatentMode::kZeros) return Tensor<T>(shape);
  return randn<T>(shape, seed);
}

template Tensor<float> sample_latent(Shape, uint64_t, LatentMode);
template Tensor<double> sample_latent(Shape, uint64_t, LatentMode);

}  // namespace invmih
