#pragma once

// The training objective: a Jensen-Shannon term on intensity distributions,
// L1 recovery, bicubic guidance of the mosaic, mosaic consistency, and two
// concealment terms (full image and Haar low band).

#include <span>
#include <vector>

#include "invmih/autograd.hpp"

namespace invmih {

struct LossWeights {
  double lambda1 = 1.0;  // recovery L1
  double lambda2 = 4.0;  // mosaic vs bicubic reference
  double lambda3 = 5.0;  // mosaic vs revealed mosaic

  void validate() const;
};

struct LossBreakdown {
  double js_term = 0.0;
  double rec_l1_term = 0.0;
  double guide_term = 0.0;
  double msi_consistency_term = 0.0;
  double conceal_term = 0.0;
  double low_freq_term = 0.0;
  double total = 0.0;

  // js + l1*rec + l2*guide + l3*msi + conceal + low_freq, in that order.
  double weighted_sum(const LossWeights& w) const;
};

// Any pair left null drops its terms (they report 0). All images share the
// secret/cover extents except the mosaic group.
template <typename T>
struct LossInputs {
  Var<T> secrets;    // x_s, all secrets stacked on the batch axis
  Var<T> recovered;  // x_rs, same layout
  Var<T> msi;        // x_ds
  Var<T> msi_hat;    // revealed mosaic
  Var<T> msi_ref;    // bicubic-downscaled secrets spliced into a mosaic
  Var<T> cover;      // x_c
  Var<T> stego;      // stego image (quantized with the straight-through rounding)
};

template <typename T>
struct LossResult {
  Var<T> total;
  LossBreakdown breakdown;
};

// Hat-kernel histogram over `bins` uniform centers on [0, 1], one per channel,
// pooled over batch and space. Values are clipped to [0, 1] first.
template <typename T>
std::vector<std::vector<double>> soft_histogram(const Tensor<T>& x, int bins);

// JS(p, q) with natural log; 0 log 0 := 0. Throws std::invalid_argument on
// length mismatch, negative entries, or vectors not summing to 1 (1e-6).
double js_divergence(std::span<const double> p, std::span<const double> q);

template <typename T>
LossResult<T> total_loss(const LossInputs<T>& in, const LossWeights& weights, int bins = 64);

namespace ad {

// (B, C, H, W) -> (1, C, 1, bins)
template <typename T>
Var<T> soft_histogram(const Var<T>& x, int bins);

// Channel-averaged JS divergence between two (1, C, 1, bins) histograms.
template <typename T>
Var<T> js_divergence(const Var<T>& p, const Var<T>& q);

}  // namespace ad

}  // namespace invmih
