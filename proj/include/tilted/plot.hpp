#pragma once

// Bare line charts rendered straight to RGB images: white background, light
// axes box, one colored polyline with point markers per series. No text.

#include <string>
#include <vector>

#include "tilted/image.hpp"

namespace tilted {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

Image line_chart(const std::vector<Series>& series, int width = 640, int height = 400);
void save_line_chart(const std::string& path, const std::vector<Series>& series);

}  // namespace tilted
