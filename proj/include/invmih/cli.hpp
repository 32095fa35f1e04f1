#pragma once

// Command implementations behind the `invmih` executable. Each returns the
// process exit code and writes human-readable output to the given streams.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace invmih::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,    // bad config, arguments, layout or image geometry
  kData = 2,     // unreadable or missing inputs (images, datasets, checkpoints)
  kNumeric = 3,  // non-finite training values; last good checkpoint kept
  kBusy = 4,     // another invocation holds the output directory lock
};

struct TrainArgs {
  std::filesystem::path config;      // empty: built-in defaults
  std::filesystem::path dataset;
  std::filesystem::path out_dir;
  std::optional<uint64_t> seed;
  std::filesystem::path resume;      // checkpoint to continue from
  std::vector<std::string> overrides;  // "key=value"
  int log_every = 10;
};

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_conceal(const std::filesystem::path& checkpoint, const std::filesystem::path& cover,
                const std::vector<std::filesystem::path>& secrets, const std::filesystem::path& stego_out,
                uint64_t seed, std::ostream& out, std::ostream& err);
// `references`, when given, are the original secrets for reporting recovery fidelity.
int cmd_reveal(const std::filesystem::path& checkpoint, const std::filesystem::path& stego,
               const std::filesystem::path& out_dir, uint64_t seed,
               const std::vector<std::filesystem::path>& references, std::ostream& out, std::ostream& err);
int cmd_evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                 const std::filesystem::path& report_out, uint64_t seed, int64_t max_sets, std::ostream& out,
                 std::ostream& err);
// Writes `figure_out` (SVG) and a merged table next to it with a .tsv extension.
int cmd_plot(const std::vector<std::filesystem::path>& reports, const std::filesystem::path& figure_out,
             std::ostream& out, std::ostream& err);

// Argument parsing and dispatch for the executable.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace invmih::cli
