#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tanger {

// RGB image with values in [0, 1], row-major, channels interleaved.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;  // height * width * 3

  double at(std::size_t row, std::size_t col, std::size_t channel) const {
    return pixels[(row * width + col) * 3 + channel];
  }
  double& at(std::size_t row, std::size_t col, std::size_t channel) {
    return pixels[(row * width + col) * 3 + channel];
  }

  static Image blank(std::size_t height, std::size_t width, double value = 0.0);
  void validate() const;  // size consistency and value range
};

// Binary PPM (P6, maxval 255).  Written bytes are round(255 * value); images
// produced by the synthesizer hold exact k/255 values, so write/read is
// lossless for them.
void write_ppm(const std::string& path, const Image& image);
Image read_ppm(const std::string& path);

}  // namespace tanger
