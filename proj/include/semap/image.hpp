#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "semap/error.hpp"

namespace semap {

/// Dense row-major image.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {
    if (width < 0 || height < 0) throw InvalidInput("image dimensions must be non-negative");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }
  const T& operator()(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Gray8 = Image<std::uint8_t>;
using Rgb8 = Image<std::array<std::uint8_t, 3>>;

// Binary portable graymap (P5, maxval 255) and pixmap (P6).
void write_pgm(const std::filesystem::path& path, const Gray8& img);
Gray8 read_pgm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Rgb8& img);
Rgb8 read_ppm(const std::filesystem::path& path);

}  // namespace semap
