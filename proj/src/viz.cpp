#include "tsf/viz.hpp"

#include <algorithm>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace tsf {

namespace {

const cv::Scalar kPalette[] = {
    {180, 0, 0}, {0, 0, 200}, {0, 140, 0}, {0, 140, 200}, {160, 0, 160}, {0, 90, 90},
};

}  // namespace

void plot_curves(const std::vector<CurveSeries>& series, const std::string& title,
                 const std::string& x_label, const std::string& path) {
  if (series.empty()) throw DataError("plot_curves: nothing to plot");
  const int W = 640, H = 480, ml = 60, mr = 20, mt = 40, mb = 50;
  cv::Mat canvas(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
  const double x_min = series[0].curve.thresholds.front();
  const double x_max = series[0].curve.thresholds.back();
  auto px = [&](double x) {
    return ml + static_cast<int>((x - x_min) / (x_max - x_min) * (W - ml - mr));
  };
  auto py = [&](double y) { return H - mb - static_cast<int>(y * (H - mt - mb)); };

  cv::rectangle(canvas, {ml, mt}, {W - mr, H - mb}, cv::Scalar(0, 0, 0));
  for (int g = 0; g <= 10; g += 2) {
    const double y = g / 10.0;
    cv::line(canvas, {ml, py(y)}, {W - mr, py(y)}, cv::Scalar(225, 225, 225));
    cv::putText(canvas, cv::format("%.1f", y), {8, py(y) + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(0, 0, 0));
  }
  for (int g = 0; g <= 4; ++g) {
    const double x = x_min + (x_max - x_min) * g / 4.0;
    cv::putText(canvas, cv::format(x_max > 2 ? "%.0f" : "%.2f", x), {px(x) - 12, H - mb + 20},
                cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0));
  }
  cv::putText(canvas, title, {ml, 25}, cv::FONT_HERSHEY_SIMPLEX, 0.6, cv::Scalar(0, 0, 0), 1);
  cv::putText(canvas, x_label, {W / 2 - 40, H - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
              cv::Scalar(0, 0, 0));

  for (size_t s = 0; s < series.size(); ++s) {
    const auto& c = series[s].curve;
    const cv::Scalar color = kPalette[s % std::size(kPalette)];
    for (size_t i = 1; i < c.thresholds.size(); ++i)
      cv::line(canvas, {px(c.thresholds[i - 1]), py(c.values[i - 1])},
               {px(c.thresholds[i]), py(c.values[i])}, color, 2);
    cv::putText(canvas, cv::format("%s (%.3f)", series[s].name.c_str(), c.auc),
                {ml + 10, mt + 20 + 18 * static_cast<int>(s)}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
                color, 1);
  }
  if (!cv::imwrite(path, canvas)) throw DataError("plot_curves: cannot write " + path);
}

void draw_overlay(const Image& frame, const std::vector<OverlayBox>& boxes,
                  const std::string& path) {
  cv::Mat canvas(frame.height, frame.width, CV_8UC3);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) {
      auto clamp8 = [](double v) {
        return static_cast<unsigned char>(std::min(255.0, std::max(0.0, v)));
      };
      const int c0 = 0, c1 = frame.channels == 3 ? 1 : 0, c2 = frame.channels == 3 ? 2 : 0;
      canvas.at<cv::Vec3b>(y, x) =
          cv::Vec3b(clamp8(frame.at(c0, y, x)), clamp8(frame.at(c1, y, x)), clamp8(frame.at(c2, y, x)));
    }
  for (const auto& ob : boxes) {
    const cv::Rect r(static_cast<int>(std::lround(ob.box.x1())),
                     static_cast<int>(std::lround(ob.box.y1())),
                     static_cast<int>(std::lround(ob.box.w)),
                     static_cast<int>(std::lround(ob.box.h)));
    cv::rectangle(canvas, r, cv::Scalar(ob.b, ob.g, ob.r), 1);
  }
  if (!cv::imwrite(path, canvas)) throw DataError("draw_overlay: cannot write " + path);
}

}  // namespace tsf
