#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "invmih/dataset.hpp"
#include "invmih/loss.hpp"
#include "invmih/pipeline.hpp"

namespace invmih {

enum class Stage { kIIRWarmup, kIIHWarmup, kJoint };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct TrainConfig {
  Stage stage = Stage::kJoint;
  int64_t iterations = 0;
  int batch_size = 4;
  int64_t patch_size = 144;
  double base_lr = 2e-4;
  int64_t lr_halving_period = 10000;
  uint64_t seed = 0;
  LossWeights loss_weights;
  int histogram_bins = 64;
  double grad_clip = 10.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  LatentMode latent_mode = LatentMode::kNormal;
  int64_t checkpoint_interval = 1000;
  bool deterministic = false;

  // Throws std::invalid_argument; the patch must fit both the grid and the Haar step.
  void validate(int rows, int cols) const;
};

// base_lr * 0.5^floor(iteration / lr_halving_period)
double lr_at(int64_t iteration, const TrainConfig& cfg);

// Adam with bias correction over a fixed parameter list; moments are kept in
// the parameter precision so they can be checkpointed verbatim.
template <typename T>
class Adam {
 public:
  Adam(std::vector<NamedParam<T>> params, double beta1, double beta2, double eps);

  // Clips the global gradient norm to `clip` (if positive), applies one update,
  // and returns the pre-clip norm. Parameters without a gradient are skipped.
  double step(double lr, double clip);
  void zero_grad();

  const std::vector<NamedParam<T>>& params() const { return params_; }
  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  int64_t steps() const { return t_; }
  void set_steps(int64_t t) { t_ = t; }

 private:
  std::vector<NamedParam<T>> params_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  double beta1_;
  double beta2_;
  double eps_;
  int64_t t_ = 0;
};

struct IterationRecord {
  Stage stage = Stage::kJoint;
  int64_t iteration = 0;
  double lr = 0.0;
  LossBreakdown loss;
  double grad_norm = 0.0;
  // Cover/stego PSNR of the quantized stego on this batch; NaN for iir_warmup.
  double psnr_cover_stego = 0.0;
};

// One JSON object per line: {"stage", "iteration", "lr", "js", "rec_l1",
// "guide", "msi", "conceal", "low_freq", "total", "grad_norm", "psnr_cover_stego"}.
// Infinite PSNR is written as the string "inf".
std::string to_json_line(const IterationRecord& r);

// Stage-aware optimization loop for one stage. Only the parameters of the
// module(s) the stage trains receive gradients.
template <typename T>
class Trainer {
 public:
  Trainer(InvMIHNet<T>& net, const TrainConfig& cfg, const ImageDataset& data);
  ~Trainer();

  // Runs the forward/backward pass and update for the current iteration.
  IterationRecord step();
  // Steps until cfg.iterations; `on_record` sees every iteration, `on_checkpoint`
  // fires after every checkpoint_interval-th update and at the end.
  void run(const std::function<void(const IterationRecord&)>& on_record,
           const std::function<void(Trainer&)>& on_checkpoint = {});

  // Loss of the current parameters on iteration `iteration`'s batch, no update.
  LossResult<T> evaluate_loss(int64_t iteration, double* psnr_out = nullptr);

  int64_t iteration() const { return iteration_; }
  void set_iteration(int64_t it) { iteration_ = it; }
  const TrainConfig& config() const { return cfg_; }
  Adam<T>& optimizer() { return adam_; }
  std::mt19937_64& stream() { return stream_; }
  InvMIHNet<T>& net() { return net_; }

 private:
  LossResult<T> forward(int64_t iteration, uint64_t latent_seed, double* psnr_out);

  InvMIHNet<T>& net_;
  TrainConfig cfg_;
  const ImageDataset& data_;
  std::vector<NamedParam<T>> trained_;
  Adam<T> adam_;
  std::mt19937_64 stream_;
  int64_t iteration_ = 0;
};

// Parameters a stage optimizes.
template <typename T>
std::vector<NamedParam<T>> stage_parameters(const InvMIHNet<T>& net, Stage stage);

}  // namespace invmih
