#include "invmih/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "invmih/latent.hpp"

namespace invmih {

namespace {

bool is_png(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

Image8 flip(const Image8& img, bool horizontal, bool vertical) {
  if (!horizontal && !vertical) return img;
  Image8 out = img;
  for (int64_t y = 0; y < img.height; ++y) {
    const int64_t sy = vertical ? img.height - 1 - y : y;
    for (int64_t x = 0; x < img.width; ++x) {
      const int64_t sx = horizontal ? img.width - 1 - x : x;
      std::copy_n(img.rgb.data() + (sy * img.width + sx) * 3, 3, out.rgb.data() + (y * img.width + x) * 3);
    }
  }
  return out;
}

}  // namespace

ImageDataset::ImageDataset(const std::filesystem::path& dir, int64_t min_size, size_t cache_limit_bytes) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw DataError("dataset directory '" + dir.string() + "' not found");
  std::vector<std::filesystem::path> candidates;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_png(entry.path())) candidates.push_back(entry.path());
  }
  std::sort(candidates.begin(), candidates.end());
  size_t cached = 0;
  for (const auto& p : candidates) {
    Image8 img;
    try {
      img = read_png(p);
    } catch (const ImageError& e) {
      warnings_.push_back("skipping " + p.filename().string() + ": " + e.what());
      continue;
    }
    if (img.width < min_size || img.height < min_size) {
      warnings_.push_back("skipping " + p.filename().string() + ": " + std::to_string(img.width) + "x" +
                          std::to_string(img.height) + " is smaller than " + std::to_string(min_size));
      continue;
    }
    files_.push_back(p);
    if (cached + img.rgb.size() <= cache_limit_bytes) {
      cached += img.rgb.size();
      cache_.emplace_back(std::move(img));
    } else {
      cache_.emplace_back(std::nullopt);
    }
  }
  if (files_.empty()) throw DataError("no usable PNG images in '" + dir.string() + "'");
}

Image8 ImageDataset::image(size_t i) const {
  if (cache_[i]) return *cache_[i];
  return read_png(files_[i]);
}

template <typename T>
PatchBatch<T> load_patch_batch(const ImageDataset& data, int num_secrets, int batch_size, int64_t patch,
                               uint64_t seed, int64_t step) {
  const size_t needed = static_cast<size_t>(num_secrets) + 1;
  if (data.size() < needed) {
    throw DataError("dataset has " + std::to_string(data.size()) + " usable images, need at least " +
                    std::to_string(needed));
  }
  std::mt19937_64 rng(derive_seed(seed, static_cast<uint64_t>(step)));
  std::vector<std::vector<Tensor<T>>> slots(needed);
  std::vector<size_t> order(data.size());
  for (int b = 0; b < batch_size; ++b) {
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t k = 0; k < needed; ++k) {
      std::uniform_int_distribution<size_t> pick(k, order.size() - 1);
      std::swap(order[k], order[pick(rng)]);
      const Image8 img = data.image(order[k]);
      std::uniform_int_distribution<int64_t> ox(0, img.width - patch);
      std::uniform_int_distribution<int64_t> oy(0, img.height - patch);
      const int64_t x0 = ox(rng);
      const int64_t y0 = oy(rng);
      const bool fh = (rng() & 1U) != 0;
      const bool fv = (rng() & 1U) != 0;
      slots[k].push_back(image_to_tensor<T>(flip(crop(img, x0, y0, patch, patch), fh, fv)));
    }
  }
  PatchBatch<T> out;
  out.cover = concat_batch<T>(slots[0]);
  for (size_t k = 1; k < needed; ++k) out.secrets.push_back(concat_batch<T>(slots[k]));
  return out;
}

template PatchBatch<float> load_patch_batch(const ImageDataset&, int, int, int64_t, uint64_t, int64_t);
template PatchBatch<double> load_patch_batch(const ImageDataset&, int, int, int64_t, uint64_t, int64_t);

}  // namespace invmih
