#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "tsf/geometry.hpp"

using namespace tsf;

namespace {

Box random_box(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> pos(-50.0, 50.0), size(0.5, 40.0);
  return Box{pos(gen), pos(gen), size(gen), size(gen)};
}

}  // namespace

TEST_CASE("iou hand cases") {
  const Box a{10, 10, 4, 4};
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, Box{100, 100, 4, 4}) == 0.0);
  // corner (0,0,4,4) vs (2,0,4,4): intersection 8, union 24
  const Box c = Box::from_corner(0, 0, 4, 4);
  const Box d = Box::from_corner(2, 0, 6, 4);
  CHECK(iou(c, d) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("iou properties over random boxes") {
  std::mt19937_64 gen(11);
  for (int k = 0; k < 500; ++k) {
    const Box a = random_box(gen), b = random_box(gen);
    const double ab = iou(a, b);
    CHECK(ab == iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(iou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("center_error hand cases and triangle inequality") {
  CHECK(center_error(Box{5, 5, 2, 2}, Box{5, 5, 9, 1}) == 0.0);
  CHECK(center_error(Box{0, 0, 1, 1}, Box{3, 4, 1, 1}) == doctest::Approx(5.0));
  CHECK(center_error(Box{1, 1, 1, 1}, Box{1, 9, 1, 1}) == doctest::Approx(8.0));
  std::mt19937_64 gen(13);
  for (int k = 0; k < 500; ++k) {
    const Box a = random_box(gen), b = random_box(gen), c = random_box(gen);
    CHECK(center_error(a, c) <= center_error(a, b) + center_error(b, c) + 1e-9);
  }
}

TEST_CASE("exemplar_side closed forms") {
  CHECK(exemplar_side(Box{0, 0, 64, 64}) == doctest::Approx(128.0).epsilon(1e-12));
  CHECK(exemplar_side(Box{0, 0, 10, 30}) == doctest::Approx(std::sqrt(30.0 * 50.0)).epsilon(1e-12));
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> size(0.5, 100.0);
  for (int k = 0; k < 100; ++k) {
    const double w = size(gen);
    CHECK(exemplar_side(Box{0, 0, w, w}) == doctest::Approx(2.0 * w).epsilon(1e-12));
  }
}

TEST_CASE("box corner round trip stays within an ulp of the coordinate scale") {
  std::mt19937_64 gen(19);
  auto ulp_at = [](double m) { return std::nextafter(std::abs(m) + 1e-300, 1e300) - std::abs(m); };
  for (int k = 0; k < 200; ++k) {
    const Box b = random_box(gen);
    const double tol = ulp_at(std::max({std::abs(b.cx) + b.w, std::abs(b.cy) + b.h, 1.0}));
    const Box r = Box::from_corner(b.x1(), b.y1(), b.x2(), b.y2());
    CHECK(std::abs(r.cx - b.cx) <= tol);
    CHECK(std::abs(r.cy - b.cy) <= tol);
    CHECK(std::abs(r.w - b.w) <= tol);
    CHECK(std::abs(r.h - b.h) <= tol);
    // corner -> center -> corner likewise
    const Box c = Box::from_corner(10.25, -3.5, 17.75, 9.25);
    CHECK(c.x1() == 10.25);
    CHECK(c.y2() == 9.25);
  }
}

TEST_CASE("crop_patch identity") {
  const Image img = tsft::ramp_image(8, 8);
  CropSpec spec{Box{4, 4, 1, 1}, 8.0, 8};
  const Image patch = crop_patch(img, spec, {0, 0, 0});
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) CHECK(patch.at(0, y, x) == doctest::Approx(img.at(0, y, x)).epsilon(1e-12));
}

TEST_CASE("crop_patch fully outside gives uniform padding") {
  const Image img = tsft::ramp_image(8, 8);
  CropSpec spec{Box{1000, 1000, 1, 1}, 8.0, 8};
  const Image patch = crop_patch(img, spec, {42.5, 0, 0});
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) CHECK(patch.at(0, y, x) == 42.5);
}

TEST_CASE("crop_patch central subgrid oracle") {
  // 8x8 ramp, side 4 centered, out 4 -> rows/cols 2..5 by direct indexing.
  const Image img = tsft::ramp_image(8, 8);
  CropSpec spec{Box{4, 4, 1, 1}, 4.0, 4};
  const Image patch = crop_patch(img, spec, {0, 0, 0});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      CHECK(patch.at(0, y, x) == doctest::Approx(img.at(0, y + 2, x + 2)).epsilon(1e-12));
}

TEST_CASE("crop_patch rejects bad specs") {
  const Image img = tsft::ramp_image(8, 8);
  CHECK_THROWS(crop_patch(img, CropSpec{Box{4, 4, 1, 1}, -1.0, 8}, {0, 0, 0}));
  CHECK_THROWS(crop_patch(img, CropSpec{Box{4, 4, 1, 1}, 4.0, 0}, {0, 0, 0}));
}

TEST_CASE("crop coordinate maps round trip within half a pixel") {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    CropSpec spec{Box{20 + 10 * u(gen), 20 + 10 * u(gen), 1, 1}, 10 + 30 * u(gen),
                  16 + static_cast<int>(u(gen) * 64)};
    for (int p = 0; p < 10; ++p) {
      const double fx = 40 * u(gen), fy = 40 * u(gen);
      CHECK(std::abs(spec.patch_to_frame_x(spec.frame_to_patch_x(fx)) - fx) < 0.5);
      CHECK(std::abs(spec.patch_to_frame_y(spec.frame_to_patch_y(fy)) - fy) < 0.5);
    }
  }
}

TEST_CASE("crop values match frame values through the inverse map") {
  // On a linear ramp bilinear interpolation is exact, so a patch sample must
  // equal the frame value at the inverse-mapped coordinate.
  const Image img = tsft::ramp_image(32, 32);
  CropSpec spec{Box{16.5, 15.0, 1, 1}, 13.0, 9};
  const Image patch = crop_patch(img, spec, channel_means(img));
  for (int i = 1; i < 8; ++i)
    for (int j = 1; j < 8; ++j) {
      const double fx = spec.patch_to_frame_x(j + 0.5);
      const double fy = spec.patch_to_frame_y(i + 0.5);
      if (fx < 1 || fy < 1 || fx > 31 || fy > 31) continue;
      const double expect = (fy - 0.5) * 32 + (fx - 0.5);
      CHECK(patch.at(0, i, j) == doctest::Approx(expect).epsilon(1e-9));
    }
}
