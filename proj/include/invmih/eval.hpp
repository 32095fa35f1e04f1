#pragma once

// Dataset-level evaluation: cover/stego and secret/recovery fidelity over
// disjoint (cover, N secrets) tuples of a test directory.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "invmih/pipeline.hpp"

namespace invmih {

struct EvalReport {
  std::string dataset;
  int num_secrets = 0;
  int rows = 0;
  int cols = 0;
  double cover_psnr_mean = 0.0;
  double cover_psnr_std = 0.0;
  double cover_ssim_mean = 0.0;
  double cover_ssim_std = 0.0;
  // Averaged over all N secrets of every set.
  double secret_psnr_mean = 0.0;
  double secret_psnr_std = 0.0;
  double secret_ssim_mean = 0.0;
  double secret_ssim_std = 0.0;
  int64_t image_sets = 0;
  int64_t num_params = 0;
  int64_t width = 0;
  int64_t height = 0;
  double seconds_per_set = 0.0;  // not serialized
  std::vector<std::string> warnings;
};

struct EvalOptions {
  // 0 evaluates every complete tuple.
  int64_t max_sets = 0;
  LatentMode latent_mode = LatentMode::kNormal;
};

template <typename T>
int64_t count_params(const InvMIHNet<T>& net) {
  return net.num_params();
}

// Tuples are consecutive groups of N+1 images (cover first) after a seeded
// shuffle of the sorted file list. Each tuple is center-cropped to the largest
// common size whose sides are multiples of 2m and 2n. Throws DataError when
// fewer than N+1 images are usable.
template <typename T>
EvalReport evaluate(const InvMIHNet<T>& net, const std::filesystem::path& dataset_dir, uint64_t seed,
                    const EvalOptions& options = {});

// Mean and population standard deviation. A set containing the infinity
// sentinel has an infinite mean; its deviation is 0 when every value is
// infinite and infinite otherwise.
std::pair<double, double> mean_std(const std::vector<double>& v);

// Deterministic structured form (no timing). Infinite values are "inf".
nlohmann::ordered_json report_to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);
std::string render_report_table(const EvalReport& r);

}  // namespace invmih
