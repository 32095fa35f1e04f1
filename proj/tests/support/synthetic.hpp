#pragma once

// Procedural test images: smooth gradients, soft-edged shapes and mild texture.
// Deterministic in the seed.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "invmih/image_io.hpp"

namespace invmih::testing {

inline Image8 synthetic_image(int64_t width, int64_t height, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image8 img;
  img.width = width;
  img.height = height;
  img.rgb.resize(static_cast<size_t>(width * height * 3));

  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = u(rng);
    c1[c] = u(rng);
  }
  const double angle = u(rng) * 6.283185307179586;
  const double dx = std::cos(angle), dy = std::sin(angle);

  struct Blob {
    double cx, cy, rx, ry, color[3];
    bool box;
  };
  std::vector<Blob> blobs(4 + rng() % 5);
  for (auto& b : blobs) {
    b.cx = u(rng) * width;
    b.cy = u(rng) * height;
    b.rx = (0.08 + 0.25 * u(rng)) * width;
    b.ry = (0.08 + 0.25 * u(rng)) * height;
    for (double& c : b.color) c = u(rng);
    b.box = u(rng) < 0.4;
  }
  const double fx = 0.05 + 0.3 * u(rng), fy = 0.05 + 0.3 * u(rng), amp = 0.03 + 0.05 * u(rng);
  std::normal_distribution<double> noise(0.0, 0.015);

  for (int64_t y = 0; y < height; ++y) {
    for (int64_t x = 0; x < width; ++x) {
      const double t = std::clamp(0.5 + ((x - width / 2.0) * dx + (y - height / 2.0) * dy) /
                                            static_cast<double>(width + height),
                                  0.0, 1.0);
      double px[3];
      for (int c = 0; c < 3; ++c) px[c] = c0[c] * (1.0 - t) + c1[c] * t;
      for (const auto& b : blobs) {
        const double nx = (x - b.cx) / b.rx, ny = (y - b.cy) / b.ry;
        const double d = b.box ? std::max(std::abs(nx), std::abs(ny)) : std::sqrt(nx * nx + ny * ny);
        const double alpha = std::clamp((1.0 - d) * 6.0, 0.0, 1.0);
        for (int c = 0; c < 3; ++c) px[c] = px[c] * (1.0 - alpha) + b.color[c] * alpha;
      }
      const double tex = amp * std::sin(fx * x) * std::cos(fy * y);
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(px[c] + tex + noise(rng), 0.0, 1.0);
        img.rgb[(y * width + x) * 3 + c] = static_cast<uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return img;
}

// Writes `count` images named img_000.png ... into `dir` (created if needed).
inline void write_synthetic_dataset(const std::filesystem::path& dir, int count, int64_t size, uint64_t seed) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%03d.png", i);
    write_png(dir / name, synthetic_image(size, size, seed * 1000 + static_cast<uint64_t>(i)));
  }
}

// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("invmih_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace invmih::testing
