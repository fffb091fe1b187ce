#pragma once

// Images with values in [0,1], row-major (y, x) with interleaved channels.

#include <cstdint>
#include <string>
#include <vector>

#include "tilted/train.hpp"

namespace tilted {

struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c) : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, 0.0) {}

  double& at(int x, int y, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  double at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// 8-bit grayscale, gray+alpha, RGB or RGBA PNG; alpha is dropped. Throws
// UsageError when the file cannot be read or decoded.
Image load_png(const std::string& path);
// Values are clamped to [0,1] and quantized to 8 bits.
void save_png(const std::string& path, const Image& image);

// Procedural test textures (grayscale).
Image brick_texture(int size);
Image stripe_texture(int size, int period = 16);
Image checker_texture(int size, int period = 16);

// Named source: "brick", "stripe", "checker" or a PNG path.
bool is_procedural(const std::string& source);
Image procedural_texture(const std::string& name, int size);

// Counterclockwise rotation of the content about the center by `degrees`,
// bilinear, zero outside, then a centered out_size x out_size crop.
// Procedural sources are rendered at least sqrt(2) larger than out_size so
// the crop never sees the zero fill.
Image rotate_crop(const Image& image, double degrees, int out_size);
Image load_rotated(const std::string& source, double degrees, int out_size);

// Center crop to the largest square.
Image square_crop(const Image& image);

// Pixel samples: points in [-extent, extent]^2 (x, y), targets = channels.
SampleSet image_samples(const Image& image, double extent = 1.0);
Image samples_to_image(const std::vector<double>& values, int width, int height, int channels);

}  // namespace tilted
