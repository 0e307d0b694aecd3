#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace vokit {

/// Grayscale image with real intensities in [0, 1], stored row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0);
  Image(int width, int height, std::vector<double> data);

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

  [[nodiscard]] double operator()(int x, int y) const { return data_[index(x, y)]; }
  double& operator()(int x, int y) { return data_[index(x, y)]; }

  [[nodiscard]] bool contains(double x, double y) const noexcept {
    return x >= 0.0 && y >= 0.0 && x <= width_ - 1 && y <= height_ - 1;
  }

  /// Bilinear sample at (ix + fx, iy + fy) with integer base and fractional
  /// offsets in [0, 1). Sampling an integer grid offset from the same
  /// fractional parts therefore reads bit-identical weights.
  [[nodiscard]] double sample_split(int ix, double fx, int iy, double fy) const;
  /// Bilinear sample; throws OutOfBounds outside [0, w-1] x [0, h-1].
  [[nodiscard]] double sample(double x, double y) const;

  [[nodiscard]] double mean() const;

 private:
  [[nodiscard]] std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Reads a binary PGM (P5) with 8- or 16-bit samples; intensities are scaled
/// to [0, 1] by the file's maxval.
Image read_pgm(const std::filesystem::path& path);
/// Writes a binary PGM, clamping intensities to [0, 1].
void write_pgm(const std::filesystem::path& path, const Image& img, int bit_depth = 8);

}  // namespace vokit
