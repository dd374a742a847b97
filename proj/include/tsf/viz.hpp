#pragma once

#include <string>
#include <vector>

#include "tsf/evaluation.hpp"

namespace tsf {

struct CurveSeries {
  std::string name;
  MetricCurve curve;
};

// Simple line plot (axes, grid, legend) written as a PNG.
void plot_curves(const std::vector<CurveSeries>& series, const std::string& title,
                 const std::string& x_label, const std::string& path);

struct OverlayBox {
  Box box;
  // BGR color
  unsigned char b = 0, g = 0, r = 255;
};

// Draws boxes on a frame image and writes a PNG.
void draw_overlay(const Image& frame, const std::vector<OverlayBox>& boxes,
                  const std::string& path);

}  // namespace tsf
