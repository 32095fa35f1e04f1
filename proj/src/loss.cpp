#include "invmih/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "invmih/transforms.hpp"

namespace invmih {

void LossWeights::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

double LossBreakdown::weighted_sum(const LossWeights& w) const {
  return js_term + w.lambda1 * rec_l1_term + w.lambda2 * guide_term + w.lambda3 * msi_consistency_term +
         conceal_term + low_freq_term;
}

namespace ad {

template <typename T>
Var<T> soft_histogram(const Var<T>& x, int bins) {
  require(bins >= 2, "soft_histogram: need at least 2 bins");
  const Shape s = x.shape();
  require(s.numel() > 0, "soft_histogram: empty input");
  const T span = static_cast<T>(bins - 1);
  const T norm = T(1) / static_cast<T>(s.n * s.plane());
  Tensor<T> hist(Shape{1, s.c, 1, bins});
  for (int64_t b = 0; b < s.n; ++b) {
    for (int64_t c = 0; c < s.c; ++c) {
      T* row = hist.data() + c * bins;
      const T* px = x.value().data() + (b * s.c + c) * s.plane();
      for (int64_t i = 0; i < s.plane(); ++i) {
        const T pos = std::clamp(px[i], T(0), T(1)) * span;
        const int64_t k = std::min<int64_t>(static_cast<int64_t>(pos), bins - 2);
        const T frac = pos - static_cast<T>(k);
        row[k] += (T(1) - frac) * norm;
        row[k + 1] += frac * norm;
      }
    }
  }
  return make_result<T>(std::move(hist), {x.node()}, [bins, span, norm](Node<T>& self) {
    const Tensor<T>& in = self.parents[0]->value;
    const Shape s = in.shape();
    Tensor<T> g(s);
    for (int64_t b = 0; b < s.n; ++b) {
      for (int64_t c = 0; c < s.c; ++c) {
        const T* grow = self.grad.data() + c * bins;
        const int64_t base = (b * s.c + c) * s.plane();
        for (int64_t i = 0; i < s.plane(); ++i) {
          const T v = in[base + i];
          if (v < T(0) || v > T(1)) continue;
          const int64_t k = std::min<int64_t>(static_cast<int64_t>(v * span), bins - 2);
          // d(row[k])/dv = -span * norm, d(row[k+1])/dv = +span * norm
          g[base + i] = (grow[k + 1] - grow[k]) * span * norm;
        }
      }
    }
    self.parents[0]->accumulate(std::move(g));
  });
}

template <typename T>
Var<T> js_divergence(const Var<T>& p, const Var<T>& q) {
  require(p.shape() == q.shape(), "js_divergence: shape " + p.shape().str() + " vs " + q.shape().str());
  const int64_t channels = p.shape().c;
  const int64_t bins = p.shape().w;
  long double acc = 0.0L;
  for (int64_t i = 0; i < channels * bins; ++i) {
    const long double a = p.value()[i];
    const long double b = q.value()[i];
    const long double m = 0.5L * (a + b);
    if (a > 0.0L) acc += 0.5L * a * std::log(a / m);
    if (b > 0.0L) acc += 0.5L * b * std::log(b / m);
  }
  Tensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(acc / channels));
  return make_result<T>(std::move(out), {p.node(), q.node()}, [channels](Node<T>& self) {
    // dJS/dp_k = 0.5 * log(p_k / m_k); zero where p_k = 0 (one-sided limit excluded).
    const T g0 = self.grad[0] / static_cast<T>(channels);
    const Tensor<T>& pv = self.parents[0]->value;
    const Tensor<T>& qv = self.parents[1]->value;
    for (int side = 0; side < 2; ++side) {
      auto& parent = self.parents[side];
      if (!parent->requires_grad) continue;
      const Tensor<T>& own = side == 0 ? pv : qv;
      Tensor<T> g(own.shape());
      for (int64_t i = 0; i < g.numel(); ++i) {
        const T m = T(0.5) * (pv[i] + qv[i]);
        g[i] = own[i] > T(0) ? g0 * T(0.5) * std::log(own[i] / m) : T(0);
      }
      parent->accumulate(std::move(g));
    }
  });
}

}  // namespace ad

template <typename T>
std::vector<std::vector<double>> soft_histogram(const Tensor<T>& x, int bins) {
  require(x.numel() > 0, "soft_histogram: empty input");
  const Tensor<T> h = ad::soft_histogram(Var<T>(x), bins).value();
  std::vector<std::vector<double>> out(h.shape().c);
  for (int64_t c = 0; c < h.shape().c; ++c) {
    out[c].assign(h.data() + c * bins, h.data() + (c + 1) * bins);
  }
  return out;
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("js_divergence: length mismatch");
  double sp = 0.0;
  double sq = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw std::invalid_argument("js_divergence: negative probability");
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-6 || std::abs(sq - 1.0) > 1e-6) {
    throw std::invalid_argument("js_divergence: inputs must each sum to 1");
  }
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) acc += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) acc += 0.5 * q[i] * std::log(q[i] / m);
  }
  return acc;
}

template <typename T>
LossResult<T> total_loss(const LossInputs<T>& in, const LossWeights& weights, int bins) {
  weights.validate();
  LossResult<T> result;
  LossBreakdown& br = result.breakdown;
  std::vector<Var<T>> addends;
  auto push = [&](const Var<T>& term, double weight, double& slot) {
    slot = static_cast<double>(term.value()[0]);
    addends.push_back(weight == 1.0 ? term : ad::scale(term, static_cast<T>(weight)));
  };

  if (in.secrets && in.recovered) {
    Var<T> js = ad::js_divergence(ad::soft_histogram(in.secrets, bins), ad::soft_histogram(in.recovered, bins));
    push(js, 1.0, br.js_term);
    push(ad::mean_abs_error(in.secrets, in.recovered), weights.lambda1, br.rec_l1_term);
  }
  if (in.msi && in.msi_ref) push(ad::mean_squared_error(in.msi, in.msi_ref), weights.lambda2, br.guide_term);
  if (in.msi && in.msi_hat) {
    push(ad::mean_squared_error(in.msi, in.msi_hat), weights.lambda3, br.msi_consistency_term);
  }
  if (in.cover && in.stego) {
    push(ad::mean_squared_error(in.cover, in.stego), 1.0, br.conceal_term);
    const int64_t c = in.cover.shape().c;
    Var<T> cover_ll = ad::slice_channels(ad::haar_dwt(in.cover), 0, c);
    Var<T> stego_ll = ad::slice_channels(ad::haar_dwt(in.stego), 0, c);
    push(ad::mean_squared_error(cover_ll, stego_ll), 1.0, br.low_freq_term);
  }
  require(!addends.empty(), "total_loss: no loss terms could be formed from the inputs");

  Var<T> total = addends.front();
  for (size_t i = 1; i < addends.size(); ++i) total = ad::add(total, addends[i]);
  result.total = total;
  br.total = br.weighted_sum(weights);
  if (!std::isfinite(br.total)) {
    throw NumericError("non-finite loss: js=" + std::to_string(br.js_term) + " rec=" +
                       std::to_string(br.rec_l1_term) + " guide=" + std::to_string(br.guide_term) +
                       " msi=" + std::to_string(br.msi_consistency_term) + " conceal=" +
                       std::to_string(br.conceal_term) + " low=" + std::to_string(br.low_freq_term));
  }
  return result;
}

template std::vector<std::vector<double>> soft_histogram(const Tensor<float>&, int);
template std::vector<std::vector<double>> soft_histogram(const Tensor<double>&, int);
template LossResult<float> total_loss(const LossInputs<float>&, const LossWeights&, int);
template LossResult<double> total_loss(const LossInputs<double>&, const LossWeights&, int);
namespace ad {
template Var<float> soft_histogram(const Var<float>&, int);
template Var<double> soft_histogram(const Var<double>&, int);
template Var<float> js_divergence(const Var<float>&, const Var<float>&);
template Var<double> js_divergence(const Var<double>&, const Var<double>&);
}  // namespace ad

}  // namespace invmih
