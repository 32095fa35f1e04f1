#pragma once

// Versioned binary container for named float32 parameter blocks plus the run
// configuration and training state that produced them.
//
// Layout (all integers little-endian):
//   "INVMIHCK" | u32 version | str config | i64 iteration | str stage |
//   str rng_state | i64 optimizer_steps | u32 block_count |
//   block* | u32 crc32 of every preceding byte
// where str = u32 length + bytes and
//   block = str name | u32 rank | i64 dim[rank] | f32 data[prod(dim)].

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "invmih/nn.hpp"

namespace invmih {

inline constexpr uint32_t kCheckpointVersion = 1;

enum class CheckpointErrc {
  kIo = 1,
  kFormat,
  kVersion,
  kChecksum,
  kShape,
  kMissing,
  kLayout,
};

std::string to_string(CheckpointErrc code);

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrc code, const std::string& what);
  CheckpointErrc code() const { return code_; }

 private:
  CheckpointErrc code_;
};

struct ParamBlock {
  std::string name;
  std::vector<int64_t> shape;
  std::vector<float> data;
};

struct Checkpoint {
  uint32_t format_version = kCheckpointVersion;
  std::string config;     // rendered RunConfig, kept verbatim
  int64_t iteration = 0;  // completed iterations of `stage`
  std::string stage;      // empty for a model-only checkpoint
  std::string rng_state;  // textual mt19937_64 state of the training stream
  int64_t optimizer_steps = 0;
  std::vector<ParamBlock> blocks;

  const ParamBlock* find(const std::string& name) const;
};

// Writes to a sibling temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Appends one block per parameter, named prefix + param.name.
template <typename T>
void store_params(Checkpoint& ckpt, const std::vector<NamedParam<T>>& params, const std::string& prefix = "");

// Copies blocks into the given parameters; throws kMissing or kShape.
template <typename T>
void restore_params(const Checkpoint& ckpt, const std::vector<NamedParam<T>>& params,
                    const std::string& prefix = "");

template <typename T>
void store_tensors(Checkpoint& ckpt, const std::vector<NamedParam<T>>& names, const std::vector<Tensor<T>>& values,
                   const std::string& prefix);
template <typename T>
void restore_tensors(const Checkpoint& ckpt, const std::vector<NamedParam<T>>& names, std::vector<Tensor<T>>& values,
                     const std::string& prefix);

}  // namespace invmih
