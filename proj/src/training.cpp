#include "invmih/training.hpp"

#include <Eigen/Core>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "invmih/bicubic.hpp"
#include "invmih/metrics.hpp"

namespace invmih {

std::string to_string(Stage s) {
  switch (s) {
    case Stage::kIIRWarmup:
      return "iir_warmup";
    case Stage::kIIHWarmup:
      return "iih_warmup";
    case Stage::kJoint:
      return "joint";
  }
  return "joint";
}

Stage stage_from_string(const std::string& s) {
  if (s == "iir_warmup") return Stage::kIIRWarmup;
  if (s == "iih_warmup") return Stage::kIIHWarmup;
  if (s == "joint") return Stage::kJoint;
  throw std::invalid_argument("unknown stage '" + s + "' (expected iir_warmup, iih_warmup or joint)");
}

void TrainConfig::validate(int rows, int cols) const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (iterations < 0) fail("iterations must be non-negative");
  if (batch_size < 1) fail("batch_size must be positive");
  if (patch_size < 1) fail("patch_size must be positive");
  if (patch_size % (2 * rows) != 0 || patch_size % (2 * cols) != 0) {
    fail("patch_size " + std::to_string(patch_size) + " must be divisible by 2*rows and 2*cols (" +
         std::to_string(2 * rows) + ", " + std::to_string(2 * cols) + ")");
  }
  if (!(base_lr > 0.0)) fail("base_lr must be positive");
  if (lr_halving_period < 1) fail("lr_halving_period must be positive");
  if (histogram_bins < 2) fail("histogram_bins must be at least 2");
  if (checkpoint_interval < 1) fail("checkpoint_interval must be positive");
  loss_weights.validate();
}

double lr_at(int64_t iteration, const TrainConfig& cfg) {
  return cfg.base_lr * std::pow(0.5, static_cast<double>(iteration / cfg.lr_halving_period));
}

template <typename T>
Adam<T>::Adam(std::vector<NamedParam<T>> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
}

template <typename T>
double Adam<T>::step(double lr, double clip) {
  long double sq = 0.0L;
  for (const auto& p : params_) {
    if (!p.var.has_grad()) continue;
    for (T g : p.var.grad().values()) sq += static_cast<long double>(g) * g;
  }
  const double norm = std::sqrt(static_cast<double>(sq));
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  const double factor = (clip > 0.0 && norm > clip) ? clip / norm : 1.0;
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Var<T> v = params_[i].var;
    if (!v.has_grad()) continue;
    const Tensor<T>& g = v.grad();
    Tensor<T>& w = v.mutable_value();
    T* m = m_[i].data();
    T* s = v_[i].data();
    for (int64_t k = 0; k < w.numel(); ++k) {
      const double gk = static_cast<double>(g[k]) * factor;
      m[k] = static_cast<T>(beta1_ * m[k] + (1.0 - beta1_) * gk);
      s[k] = static_cast<T>(beta2_ * s[k] + (1.0 - beta2_) * gk * gk);
      const double mhat = m[k] / c1;
      const double vhat = s[k] / c2;
      w[k] = static_cast<T>(w[k] - lr * mhat / (std::sqrt(vhat) + eps_));
    }
  }
  return norm;
}

template <typename T>
void Adam<T>::zero_grad() {
  for (const auto& p : params_) {
    Var<T> v = p.var;
    v.zero_grad();
  }
}

std::string to_json_line(const IterationRecord& r) {
  nlohmann::ordered_json j;
  j["stage"] = to_string(r.stage);
  j["iteration"] = r.iteration;
  j["lr"] = r.lr;
  j["js"] = r.loss.js_term;
  j["rec_l1"] = r.loss.rec_l1_term;
  j["guide"] = r.loss.guide_term;
  j["msi"] = r.loss.msi_consistency_term;
  j["conceal"] = r.loss.conceal_term;
  j["low_freq"] = r.loss.low_freq_term;
  j["total"] = r.loss.total;
  j["grad_norm"] = r.grad_norm;
  if (std::isinf(r.psnr_cover_stego)) {
    j["psnr_cover_stego"] = "inf";
  } else if (std::isnan(r.psnr_cover_stego)) {
    j["psnr_cover_stego"] = nullptr;
  } else {
    j["psnr_cover_stego"] = r.psnr_cover_stego;
  }
  return j.dump();
}

template <typename T>
std::vector<NamedParam<T>> stage_parameters(const InvMIHNet<T>& net, Stage stage) {
  switch (stage) {
    case Stage::kIIRWarmup:
      return net.iir().parameters();
    case Stage::kIIHWarmup:
      return net.iih().parameters();
    case Stage::kJoint:
      return net.parameters();
  }
  return {};
}

template <typename T>
Trainer<T>::Trainer(InvMIHNet<T>& net, const TrainConfig& cfg, const ImageDataset& data)
    : net_(net),
      cfg_(cfg),
      data_(data),
      trained_(stage_parameters(net, cfg.stage)),
      adam_(trained_, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
      stream_(derive_seed(cfg.seed, 100 + static_cast<uint64_t>(cfg.stage))) {
  cfg_.validate(net.config().rows, net.config().cols);
  if (cfg.stage == Stage::kIIRWarmup && net.config().rescaler == Rescaler::kBicubic) {
    throw std::invalid_argument("iir_warmup has nothing to train with the bicubic rescaler");
  }
  if (cfg_.deterministic) Eigen::setNbThreads(1);
  set_requires_grad(net_.parameters(), false);
  set_requires_grad(trained_, true);
}

template <typename T>
Trainer<T>::~Trainer() {
  set_requires_grad(net_.parameters(), false);
}

template <typename T>
LossResult<T> Trainer<T>::forward(int64_t iteration, uint64_t latent_seed, double* psnr_out) {
  const ModelConfig& mc = net_.config();
  const uint64_t batch_seed = derive_seed(cfg_.seed, static_cast<uint64_t>(cfg_.stage));
  PatchBatch<T> batch =
      load_patch_batch<T>(data_, mc.num_secrets(), cfg_.batch_size, cfg_.patch_size, batch_seed, iteration);

  std::vector<Var<T>> secrets;
  std::vector<Tensor<T>> ref_tiles;
  const MosaicLayout layout = MosaicLayout::for_image(mc.rows, mc.cols, cfg_.patch_size, cfg_.patch_size);
  for (auto& s : batch.secrets) {
    ref_tiles.push_back(bicubic_downscale(s, layout));
    secrets.emplace_back(std::move(s));
  }
  Var<T> msi_ref(splice_mosaic<T>(ref_tiles, layout));
  Var<T> cover(std::move(batch.cover));
  const uint64_t hide_seed = derive_seed(latent_seed, 0);
  const uint64_t rescale_seed = derive_seed(latent_seed, 1);

  LossInputs<T> in;
  if (psnr_out) *psnr_out = std::nan("");
  if (cfg_.stage == Stage::kIIRWarmup || cfg_.stage == Stage::kJoint) {
    in.secrets = ad::concat_batch<T>(secrets);
    in.msi = net_.make_mosaic(secrets).msi;
    in.msi_ref = msi_ref;
  } else {
    in.msi = msi_ref;  // bicubic mosaic stands in for the IIR output
  }
  Var<T> restore_from = in.msi;
  if (cfg_.stage != Stage::kIIRWarmup) {
    auto hidden = net_.iih().conceal(cover, in.msi);
    Var<T> z(sample_latent<T>(net_.iih().latent_shape(cover.shape()), hide_seed, cfg_.latent_mode));
    auto revealed = net_.iih().reveal(hidden.stego, z);
    in.cover = cover;
    in.stego = hidden.stego;
    in.msi_hat = revealed.msi;
    restore_from = revealed.msi;
    if (psnr_out) *psnr_out = psnr(cover.value(), hidden.stego.value());
  }
  if (cfg_.stage != Stage::kIIHWarmup) {
    in.recovered = ad::concat_batch<T>(net_.restore_secrets(restore_from, rescale_seed, cfg_.latent_mode));
  }
  return total_loss(in, cfg_.loss_weights, cfg_.histogram_bins);
}

template <typename T>
LossResult<T> Trainer<T>::evaluate_loss(int64_t iteration, double* psnr_out) {
  set_requires_grad(trained_, false);
  LossResult<T> out;
  try {
    out = forward(iteration, derive_seed(cfg_.seed, 0xE7A1ULL + static_cast<uint64_t>(iteration)), psnr_out);
  } catch (...) {
    set_requires_grad(trained_, true);
    throw;
  }
  set_requires_grad(trained_, true);
  return out;
}

template <typename T>
IterationRecord Trainer<T>::step() {
  IterationRecord rec;
  rec.stage = cfg_.stage;
  rec.iteration = iteration_;
  rec.lr = lr_at(iteration_, cfg_);
  const uint64_t latent_seed = stream_();
  LossResult<T> loss = forward(iteration_, latent_seed, &rec.psnr_cover_stego);
  rec.loss = loss.breakdown;
  if (rec.loss.total != rec.loss.weighted_sum(cfg_.loss_weights)) {
    throw NumericError("loss total does not equal the weighted sum of its terms");
  }
  adam_.zero_grad();
  loss.total.backward();
  rec.grad_norm = adam_.step(rec.lr, cfg_.grad_clip);
  ++iteration_;
  return rec;
}

template <typename T>
void Trainer<T>::run(const std::function<void(const IterationRecord&)>& on_record,
                     const std::function<void(Trainer&)>& on_checkpoint) {
  while (iteration_ < cfg_.iterations) {
    IterationRecord rec = step();
    if (on_record) on_record(rec);
    if (on_checkpoint && (iteration_ % cfg_.checkpoint_interval == 0 || iteration_ == cfg_.iterations)) {
      on_checkpoint(*this);
    }
  }
}

template class Adam<float>;
template class Adam<double>;
template class Trainer<float>;
template class Trainer<double>;
template std::vector<NamedParam<float>> stage_parameters(const InvMIHNet<float>&, Stage);
template std::vector<NamedParam<double>> stage_parameters(const InvMIHNet<double>&, Stage);

}  // namespace invmih
