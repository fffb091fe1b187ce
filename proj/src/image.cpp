#include "tilted/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>

#include <png.h>

#include "tilted/errors.hpp"
#include "tilted/rng.hpp"
#include "tilted/theory.hpp"

namespace tilted {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image load_png(const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw UsageError("cannot read image '" + path + "': " + img.message);
  }
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int c = gray ? 1 : 3;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw UsageError("cannot decode image '" + path + "': " + img.message);
  }
  Image out(static_cast<int>(img.width), static_cast<int>(img.height), c);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = buf[i] / 255.0;
  return out;
}

void save_png(const std::string& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw StructuralError("save_png: 1 or 3 channels required");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<png_byte> buf(image.data.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = static_cast<png_byte>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
  }
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw UsageError("cannot write '" + path + "'");
  if (!png_image_write_to_stdio(&img, f.get(), 0, buf.data(), 0, nullptr)) {
    throw UsageError("cannot encode '" + path + "': " + img.message);
  }
}

Image brick_texture(int size) {
  if (size < 2) throw UsageError("texture size must be >= 2");
  constexpr int bw = 32, bh = 16, mortar = 2;
  Image out(size, size, 1);
  // Pattern is anchored at the center so crops of different sizes agree.
  const int off = size / 2;
  for (int y = 0; y < size; ++y) {
    const int yy = y - off + 1024 * bh;
    const int row = yy / bh;
    for (int x = 0; x < size; ++x) {
      const int xx = x - off + 1024 * bw + (row % 2) * (bw / 2);
      const int col = xx / bw;
      const bool joint = (yy % bh) < mortar || (xx % bw) < mortar;
      if (joint) {
        out.at(x, y) = 0.15;
      } else {
        // per-brick shade from a hash of its cell
        const std::uint64_t h = mix64(static_cast<std::uint64_t>(row) * 7919u + static_cast<std::uint64_t>(col));
        out.at(x, y) = 0.55 + 0.3 * static_cast<double>(h >> 11) * 0x1.0p-53;
      }
    }
  }
  return out;
}

Image stripe_texture(int size, int period) {
  if (size < 2 || period < 2) throw UsageError("stripe texture: size and period must be >= 2");
  Image out(size, size, 1);
  const int off = size / 2;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) out.at(x, y) = ((x - off + 1024 * period) % period) < period / 2 ? 0.9 : 0.1;
  return out;
}

Image checker_texture(int size, int period) {
  if (size < 2 || period < 2) throw UsageError("checker texture: size and period must be >= 2");
  Image out(size, size, 1);
  const int off = size / 2;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const int a = (x - off + 1024 * period) / (period / 2), b = (y - off + 1024 * period) / (period / 2);
      out.at(x, y) = (a + b) % 2 ? 0.9 : 0.1;
    }
  return out;
}

bool is_procedural(const std::string& source) {
  return source == "brick" || source == "stripe" || source == "checker";
}

Image procedural_texture(const std::string& name, int size) {
  if (name == "brick") return brick_texture(size);
  if (name == "stripe") return stripe_texture(size);
  if (name == "checker") return checker_texture(size);
  throw UsageError("unknown procedural texture '" + name + "'");
}

Image square_crop(const Image& image) {
  const int s = std::min(image.width, image.height);
  const int x0 = (image.width - s) / 2, y0 = (image.height - s) / 2;
  Image out(s, s, image.channels);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x)
      for (int c = 0; c < image.channels; ++c) out.at(x, y, c) = image.at(x + x0, y + y0, c);
  return out;
}

Image rotate_crop(const Image& image, double degrees, int out_size) {
  const Image sq = square_crop(image);
  const int n = sq.width;
  if (out_size < 1 || out_size > n) throw UsageError("rotate_crop: output size must be in [1, image size]");
  if ((n - out_size) % 2) throw UsageError("rotate_crop: image and output sizes must have equal parity");
  const double nu = degrees * std::numbers::pi / 180.0;
  Image out(out_size, out_size, sq.channels);
  const int off = (n - out_size) / 2;
  for (int c = 0; c < sq.channels; ++c) {
    // matrix index i is x, j is y
    Eigen::MatrixXd m(n, n);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) m(x, y) = sq.at(x, y, c);
    const Eigen::MatrixXd r = theory::resample_rotate(m, nu);
    for (int y = 0; y < out_size; ++y)
      for (int x = 0; x < out_size; ++x) out.at(x, y, c) = r(x + off, y + off);
  }
  return out;
}

Image load_rotated(const std::string& source, double degrees, int out_size) {
  if (is_procedural(source)) {
    int big = static_cast<int>(std::ceil(out_size * std::numbers::sqrt2)) + 4;
    if ((big - out_size) % 2) ++big;
    return rotate_crop(procedural_texture(source, big), degrees, out_size);
  }
  const Image img = square_crop(load_png(source));
  if (img.width < out_size) throw UsageError("image '" + source + "' is smaller than the requested size");
  Image base = img;
  if ((img.width - out_size) % 2) {
    // trim one pixel so the crop stays centered
    Image t(img.width - 1, img.width - 1, img.channels);
    for (int y = 0; y < t.height; ++y)
      for (int x = 0; x < t.width; ++x)
        for (int c = 0; c < t.channels; ++c) t.at(x, y, c) = img.at(x, y, c);
    base = std::move(t);
  }
  return rotate_crop(base, degrees, out_size);
}

SampleSet image_samples(const Image& image, double extent) {
  SampleSet s;
  s.input_dim = 2;
  s.output_dim = image.channels;
  s.points.reserve(static_cast<std::size_t>(image.width) * image.height * 2);
  s.targets = image.data;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      s.points.push_back(extent * (-1.0 + 2.0 * x / std::max(1, image.width - 1)));
      s.points.push_back(extent * (-1.0 + 2.0 * y / std::max(1, image.height - 1)));
    }
  return s;
}

Image samples_to_image(const std::vector<double>& values, int width, int height, int channels) {
  Image out(width, height, channels);
  if (values.size() != out.data.size()) throw StructuralError("samples_to_image: size mismatch");
  out.data = values;
  return out;
}

}  // namespace tilted
