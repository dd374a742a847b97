#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "tsf/tensor.hpp"

namespace tsf {

// Axis-aligned box, center form. Corner form (x1,y1,x2,y2) and the
// corner-plus-size form used by the benchmark files are conversions.
struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;

  bool valid() const { return w > 0 && h > 0; }
  double x1() const { return cx - w / 2; }
  double y1() const { return cy - h / 2; }
  double x2() const { return cx + w / 2; }
  double y2() const { return cy + h / 2; }
  double area() const { return w * h; }

  static Box from_corner(double x1, double y1, double x2, double y2) {
    return Box{(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1};
  }
  static Box from_xywh(double x, double y, double w, double h) {
    return Box{x + w / 2, y + h / 2, w, h};
  }
};

// Raster frame, planar channel layout, intensities on the 0..255 scale.
struct Image {
  int height = 0, width = 0, channels = 0;
  std::vector<double> data;  // [c][y][x]

  Image() = default;
  Image(int h, int w, int c) : height(h), width(w), channels(c) {
    data.assign(static_cast<size_t>(h) * w * c, 0.0);
  }
  double& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  const double* plane(int c) const { return data.data() + static_cast<size_t>(c) * height * width; }
  bool valid() const {
    return height > 0 && width > 0 && (channels == 1 || channels == 3) &&
           data.size() == static_cast<size_t>(height) * width * channels;
  }
};

// Square crop: side x side pixels around (center.cx, center.cy), resampled to
// out_size x out_size.
struct CropSpec {
  Box center;
  double side = 0;
  int out_size = 0;

  bool valid() const { return side > 0 && out_size > 0; }
  // Affine map between patch pixel coordinates and frame pixel coordinates.
  double scale() const { return side / out_size; }
  double origin_x() const { return center.cx - side / 2; }
  double origin_y() const { return center.cy - side / 2; }
  double patch_to_frame_x(double px) const { return origin_x() + px * scale(); }
  double patch_to_frame_y(double py) const { return origin_y() + py * scale(); }
  double frame_to_patch_x(double fx) const { return (fx - origin_x()) / scale(); }
  double frame_to_patch_y(double fy) const { return (fy - origin_y()) / scale(); }
  Box patch_to_frame(const Box& b) const {
    return Box{patch_to_frame_x(b.cx), patch_to_frame_y(b.cy), b.w * scale(), b.h * scale()};
  }
  Box frame_to_patch(const Box& b) const {
    return Box{frame_to_patch_x(b.cx), frame_to_patch_y(b.cy), b.w / scale(), b.h / scale()};
  }
};

double iou(const Box& a, const Box& b);
double center_error(const Box& a, const Box& b);

// Side of the exemplar crop: sqrt((w+p)(h+p)) with context margin p=(w+h)/2.
double exemplar_side(const Box& box);

std::array<double, 3> channel_means(const Image& img);

// Bilinear square crop with out-of-frame taps filled from pad_value
// (per-channel; pass channel_means(img) for the usual mean padding).
Image crop_patch(const Image& img, const CropSpec& spec, const std::array<double, 3>& pad_value);

}  // namespace tsf
