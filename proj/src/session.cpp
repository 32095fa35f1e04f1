#include "invmih/session.hpp"

#include <sstream>

namespace invmih {

namespace {
const std::string kMomentM = "adam.m.";
const std::string kMomentV = "adam.v.";
}  // namespace

template <typename T>
Checkpoint make_checkpoint(const RunConfig& cfg, const InvMIHNet<T>& net) {
  Checkpoint ckpt;
  ckpt.config = render_run_config(cfg);
  store_params(ckpt, net.parameters());
  return ckpt;
}

template <typename T>
Checkpoint make_checkpoint(const RunConfig& cfg, Trainer<T>& trainer) {
  Checkpoint ckpt = make_checkpoint(cfg, trainer.net());
  ckpt.stage = to_string(trainer.config().stage);
  ckpt.iteration = trainer.iteration();
  std::ostringstream rng;
  rng << trainer.stream();
  ckpt.rng_state = rng.str();
  Adam<T>& adam = trainer.optimizer();
  ckpt.optimizer_steps = adam.steps();
  store_tensors(ckpt, adam.params(), adam.first_moments(), kMomentM);
  store_tensors(ckpt, adam.params(), adam.second_moments(), kMomentV);
  return ckpt;
}

RunConfig checkpoint_config(const Checkpoint& ckpt) {
  try {
    return parse_run_config(ckpt.config);
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointErrc::kFormat, std::string("checkpoint: stored config is invalid: ") + e.what());
  }
}

template <typename T>
InvMIHNet<T> model_from_checkpoint(const Checkpoint& ckpt, int expected_secrets) {
  const RunConfig cfg = checkpoint_config(ckpt);
  const ModelConfig& mc = cfg.model;
  if (expected_secrets > 0 && expected_secrets != mc.num_secrets()) {
    throw CheckpointError(CheckpointErrc::kLayout,
                          "checkpoint layout " + std::to_string(mc.rows) + "x" + std::to_string(mc.cols) + " holds " +
                              std::to_string(mc.num_secrets()) + " secrets, request has " +
                              std::to_string(expected_secrets));
  }
  InvMIHNet<T> net(mc);
  restore_params(ckpt, net.parameters());
  return net;
}

template <typename T>
void resume_trainer(Trainer<T>& trainer, const Checkpoint& ckpt) {
  const std::string stage = to_string(trainer.config().stage);
  if (ckpt.stage != stage) {
    throw CheckpointError(CheckpointErrc::kLayout,
                          "checkpoint holds stage '" + ckpt.stage + "', trainer runs '" + stage + "'");
  }
  restore_params(ckpt, trainer.net().parameters());
  Adam<T>& adam = trainer.optimizer();
  restore_tensors(ckpt, adam.params(), adam.first_moments(), kMomentM);
  restore_tensors(ckpt, adam.params(), adam.second_moments(), kMomentV);
  adam.set_steps(ckpt.optimizer_steps);
  std::istringstream rng(ckpt.rng_state);
  rng >> trainer.stream();
  if (!rng) throw CheckpointError(CheckpointErrc::kFormat, "checkpoint: unreadable random-stream state");
  trainer.set_iteration(ckpt.iteration);
}

template Checkpoint make_checkpoint<float>(const RunConfig&, const InvMIHNet<float>&);
template Checkpoint make_checkpoint<double>(const RunConfig&, const InvMIHNet<double>&);
template Checkpoint make_checkpoint<float>(const RunConfig&, Trainer<float>&);
template Checkpoint make_checkpoint<double>(const RunConfig&, Trainer<double>&);
template InvMIHNet<float> model_from_checkpoint<float>(const Checkpoint&, int);
template InvMIHNet<double> model_from_checkpoint<double>(const Checkpoint&, int);
template void resume_trainer<float>(Trainer<float>&, const Checkpoint&);
template void resume_trainer<double>(Trainer<double>&, const Checkpoint&);

}  // namespace invmih
