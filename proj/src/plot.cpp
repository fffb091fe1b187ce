#include "tilted/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "tilted/errors.hpp"

namespace tilted {

namespace {

constexpr std::array<std::array<double, 3>, 6> kPalette{{
    {0.12, 0.47, 0.71}, {0.84, 0.15, 0.16}, {0.17, 0.63, 0.17}, {1.0, 0.5, 0.05}, {0.58, 0.40, 0.74}, {0.55, 0.34, 0.29},
}};

void put(Image& img, int x, int y, const std::array<double, 3>& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  for (int k = 0; k < 3; ++k) img.at(x, y, k) = c[k];
}

void line(Image& img, double x0, double y0, double x1, double y1, const std::array<double, 3>& c) {
  const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    put(img, x, y, c);
    put(img, x, y + 1, c);
  }
}

}  // namespace

Image line_chart(const std::vector<Series>& series, int width, int height) {
  if (width < 32 || height < 32) throw UsageError("line_chart: image too small");
  Image img(width, height, 3);
  std::fill(img.data.begin(), img.data.end(), 1.0);
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw StructuralError("line_chart: x and y lengths differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!(xmax >= xmin)) return img;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  const int m = 24;
  const double pw = width - 2 * m, ph = height - 2 * m;
  auto px = [&](double x) { return m + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return height - m - (y - ymin) / (ymax - ymin) * ph; };
  const std::array<double, 3> grey{0.7, 0.7, 0.7};
  line(img, m, m, width - m, m, grey);
  line(img, m, height - m, width - m, height - m, grey);
  line(img, m, m, m, height - m, grey);
  line(img, width - m, m, width - m, height - m, grey);
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const auto& c = kPalette[si % kPalette.size()];
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      const double x = px(s.x[i]), y = py(s.y[i]);
      for (int dx = -2; dx <= 2; ++dx)
        for (int dy = -2; dy <= 2; ++dy) put(img, static_cast<int>(x) + dx, static_cast<int>(y) + dy, c);
      if (i + 1 < s.x.size() && std::isfinite(s.x[i + 1]) && std::isfinite(s.y[i + 1])) {
        line(img, x, y, px(s.x[i + 1]), py(s.y[i + 1]), c);
      }
    }
  }
  return img;
}

void save_line_chart(const std::string& path, const std::vector<Series>& series) {
  save_png(path, line_chart(series));
}

}  // namespace tilted
