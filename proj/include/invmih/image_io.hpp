#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "invmih/tensor.hpp"

namespace invmih {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Interleaved 8-bit RGB, row-major.
struct Image8 {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> rgb;
};

// Decodes an 8-bit RGB PNG. Gray and palette images are expanded to RGB,
// 16-bit samples are reduced to 8 bits; images with alpha are rejected.
Image8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image8& image);

// (1, 3, H, W) in [0, 1].
template <typename T>
Tensor<T> image_to_tensor(const Image8& image);

// Quantizes one batch element to 8 bits (round(clip(x) * 255)).
template <typename T>
Image8 tensor_to_image(const Tensor<T>& t, int64_t batch_index = 0);

Image8 crop(const Image8& image, int64_t x0, int64_t y0, int64_t width, int64_t height);

}  // namespace invmih
