#pragma once

#include <cstdint>

#include "invmih/tensor.hpp"

namespace invmih {

enum class LatentMode { kNormal, kZeros };

// Reveal-time stand-in for a discarded latent: i.i.d. N(0, 1) draws fixed by
// `seed`, or all zeros.
template <typename T>
Tensor<T> sample_latent(Shape shape, uint64_t seed, LatentMode mode = LatentMode::kNormal);

// Derives independent sub-seeds from one user seed (splitmix64 finalizer).
uint64_t derive_seed(uint64_t seed, uint64_t stream);

}  // namespace invmih
