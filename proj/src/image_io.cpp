#include "invmih/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>

namespace invmih {

Image8 read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw ImageError("cannot decode '" + path.string() + "': " + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_ALPHA) {
    png_image_free(&image);
    throw ImageError("'" + path.string() + "' has an alpha channel; only RGB images are supported");
  }
  image.format = PNG_FORMAT_RGB;
  Image8 out;
  out.width = image.width;
  out.height = image.height;
  out.rgb.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.rgb.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ImageError("cannot decode '" + path.string() + "': " + msg);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Image8& img) {
  if (img.width <= 0 || img.height <= 0 ||
      img.rgb.size() != static_cast<size_t>(img.width * img.height * 3)) {
    throw ImageError("write_png: inconsistent image buffer for '" + path.string() + "'");
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.rgb.data(), 0, nullptr)) {
    throw ImageError("cannot write '" + path.string() + "': " + image.message);
  }
}

template <typename T>
Tensor<T> image_to_tensor(const Image8& image) {
  Tensor<T> out(Shape{1, 3, image.height, image.width});
  for (int64_t y = 0; y < image.height; ++y) {
    for (int64_t x = 0; x < image.width; ++x) {
      for (int64_t c = 0; c < 3; ++c) {
        out.at(0, c, y, x) = static_cast<T>(image.rgb[(y * image.width + x) * 3 + c]) / T(255);
      }
    }
  }
  return out;
}

template <typename T>
Image8 tensor_to_image(const Tensor<T>& t, int64_t batch_index) {
  const Shape& s = t.shape();
  require(s.c == 3, "tensor_to_image: expected 3 channels, got " + s.str());
  require(batch_index >= 0 && batch_index < s.n, "tensor_to_image: batch index out of range");
  Image8 out;
  out.width = s.w;
  out.height = s.h;
  out.rgb.resize(static_cast<size_t>(s.w * s.h * 3));
  for (int64_t y = 0; y < s.h; ++y) {
    for (int64_t x = 0; x < s.w; ++x) {
      for (int64_t c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(t.at(batch_index, c, y, x)), 0.0, 1.0);
        out.rgb[(y * s.w + x) * 3 + c] = static_cast<uint8_t>(std::round(v * 255.0));
      }
    }
  }
  return out;
}

Image8 crop(const Image8& image, int64_t x0, int64_t y0, int64_t width, int64_t height) {
  require(x0 >= 0 && y0 >= 0 && x0 + width <= image.width && y0 + height <= image.height,
          "crop window outside image");
  Image8 out;
  out.width = width;
  out.height = height;
  out.rgb.resize(static_cast<size_t>(width * height * 3));
  for (int64_t y = 0; y < height; ++y) {
    const uint8_t* src = image.rgb.data() + ((y0 + y) * image.width + x0) * 3;
    std::copy_n(src, width * 3, out.rgb.data() + y * width * 3);
  }
  return out;
}

template Tensor<float> image_to_tensor(const Image8&);
template Tensor<double> image_to_tensor(const Image8&);
template Image8 tensor_to_image(const Tensor<float>&, int64_t);
template Image8 tensor_to_image(const Tensor<double>&, int64_t);

}  // namespace invmih
