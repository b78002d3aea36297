#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slidr/common.hpp"

namespace slidr {

/// RGB image, channels in [0,1], row-major storage.
struct Image {
  int width = 0, height = 0;
  std::vector<double> rgb;  // size H*W*3, pixel (x,y) at (y*W+x)*3

  double& at(int x, int y, int c) {
    return rgb[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
  double at(int x, int y, int c) const {
    return rgb[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
  int pixel_count() const { return width * height; }
  void validate() const;

  static Image filled(int w, int h, double r, double g, double b);
};

void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

/// Internal float format: magic "SLIF0001", u32 width, u32 height,
/// H*W*3 little-endian float64.
void write_float_image(const std::string& path, const Image& img);
Image read_float_image(const std::string& path);

/// 16-bit P5 PGM (big-endian samples, per the netpbm spec).
void write_pgm16(const std::string& path, const std::vector<std::uint16_t>& v,
                 int width, int height);
std::vector<std::uint16_t> read_pgm16(const std::string& path, int& width,
                                      int& height);

}  // namespace slidr
