#pragma once

// Flat `key = value` run configuration covering the model, grid and training
// settings. Lines may carry `#` comments; blank lines are ignored.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "invmih/training.hpp"

namespace invmih {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& what);
  // 1-based; 0 when the error is not tied to a line.
  int line() const { return line_; }

 private:
  int line_;
};

struct RunConfig {
  ModelConfig model;
  // Shared training settings; stage and iterations are filled per stage.
  TrainConfig train;
  // "all" runs iir_warmup, iih_warmup, joint in order.
  std::string stage = "all";
  int64_t iir_warmup_iterations = 30000;
  int64_t iih_warmup_iterations = 30000;
  int64_t joint_iterations = 20000;

  std::vector<Stage> stages() const;
  int64_t iterations_for(Stage s) const;
  TrainConfig train_config(Stage s) const;
  // Throws ConfigError (line 0).
  void validate() const;
};

RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
// Every key with its effective value; parse_run_config(render_run_config(c)) == c.
std::string render_run_config(const RunConfig& cfg);
// Names of all accepted keys, in rendering order.
std::vector<std::string> run_config_keys();

// Applies one `key = value` assignment (used for command-line and environment
// overrides). Throws ConfigError with line 0.
void apply_run_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace invmih
