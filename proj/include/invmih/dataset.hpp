#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "invmih/image_io.hpp"
#include "invmih/tensor.hpp"

namespace invmih {

// Raised for unusable datasets (missing directory, too few usable images).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sorted collection of decodable PNG images from one directory. Files that do
// not decode, or that are smaller than `min_size` on either side, are skipped
// and reported in warnings().
class ImageDataset {
 public:
  explicit ImageDataset(const std::filesystem::path& dir, int64_t min_size = 1,
                        size_t cache_limit_bytes = size_t{1} << 30);

  size_t size() const { return files_.size(); }
  const std::filesystem::path& path(size_t i) const { return files_[i]; }
  Image8 image(size_t i) const;
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::vector<std::filesystem::path> files_;
  std::vector<std::optional<Image8>> cache_;
  std::vector<std::string> warnings_;
};

template <typename T>
struct PatchBatch {
  Tensor<T> cover;                // (B, 3, P, P)
  std::vector<Tensor<T>> secrets; // N tensors of (B, 3, P, P)
};

// One training batch: for each element, num_secrets + 1 distinct images drawn
// without replacement, randomly cropped to patch x patch and randomly flipped.
// The draw depends only on (seed, step).
template <typename T>
PatchBatch<T> load_patch_batch(const ImageDataset& data, int num_secrets, int batch_size, int64_t patch,
                               uint64_t seed, int64_t step);

}  // namespace invmih
