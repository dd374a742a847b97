#include "tsf/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "tsf/kernels.hpp"

namespace tsf {

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1()));
  const double iy = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1()));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double center_error(const Box& a, const Box& b) {
  return std::hypot(a.cx - b.cx, a.cy - b.cy);
}

double exemplar_side(const Box& box) {
  const double p = (box.w + box.h) / 2.0;
  return std::sqrt((box.w + p) * (box.h + p));
}

std::array<double, 3> channel_means(const Image& img) {
  std::array<double, 3> m{0, 0, 0};
  const long plane = static_cast<long>(img.height) * img.width;
  for (int c = 0; c < img.channels; ++c) {
    double s = 0.0;
    const double* p = img.plane(c);
    for (long i = 0; i < plane; ++i) s += p[i];
    m[static_cast<size_t>(c)] = s / static_cast<double>(plane);
  }
  return m;
}

Image crop_patch(const Image& img, const CropSpec& spec, const std::array<double, 3>& pad_value) {
  if (!spec.valid()) throw std::invalid_argument("crop_patch: non-positive side or out_size");
  if (!img.valid()) throw std::invalid_argument("crop_patch: malformed image");
  const int out = spec.out_size;
  Image patch(out, out, img.channels);
  const double sc = spec.scale();
  const double ox = spec.origin_x(), oy = spec.origin_y();
  for (int c = 0; c < img.channels; ++c) {
    const double* src = img.plane(c);
    const double pad = pad_value[static_cast<size_t>(c)];
    double* dst = &patch.at(c, 0, 0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < out; ++i) {
      const double fy = oy + (i + 0.5) * sc;
      for (int j = 0; j < out; ++j) {
        const double fx = ox + (j + 0.5) * sc;
        dst[static_cast<long>(i) * out + j] =
            kernels::bilinear_at(src, img.height, img.width, fy, fx, pad);
      }
    }
  }
  return patch;
}

}  // namespace tsf
