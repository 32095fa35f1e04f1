#pragma once

// Glue between run configurations, models, trainers and checkpoints.

#include "invmih/checkpoint.hpp"
#include "invmih/config.hpp"
#include "invmih/training.hpp"

namespace invmih {

// Parameters only (no stage or optimizer state).
template <typename T>
Checkpoint make_checkpoint(const RunConfig& cfg, const InvMIHNet<T>& net);

// Parameters plus the trainer's stage, iteration, random stream and Adam moments.
template <typename T>
Checkpoint make_checkpoint(const RunConfig& cfg, Trainer<T>& trainer);

// Throws CheckpointError(kFormat) if the stored config does not parse.
RunConfig checkpoint_config(const Checkpoint& ckpt);

// Rebuilds the model the checkpoint describes and loads its parameters. A
// positive `expected_secrets` that differs from the stored grid raises kLayout.
template <typename T>
InvMIHNet<T> model_from_checkpoint(const Checkpoint& ckpt, int expected_secrets = 0);

// Restores iteration, random stream and optimizer moments. The trainer's stage
// must match the checkpoint's.
template <typename T>
void resume_trainer(Trainer<T>& trainer, const Checkpoint& ckpt);

}  // namespace invmih
