#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "doctest.h"
#include "lightleak/colorlab.hpp"
#include "lightleak/error.hpp"
#include "oracles.hpp"

using namespace lightleak;
using namespace lightleak::colorlab;
namespace fs = std::filesystem;

namespace {

// Table of observed white-light responses (brightness 0.2 .. 1.0).
const std::vector<double> kBrightness = {0.2, 0.4, 0.6, 0.8, 1.0};
const std::vector<double> kRed = {0.04052, 0.149747, 0.355869, 0.66887, 0.741883};
const std::vector<double> kGreen = {0.013536, 0.050023, 0.115935, 0.218776, 0.242022};
const std::vector<double> kBlue = {0.058512, 0.209917, 0.485289, 0.906446, 1.0};

std::vector<Knot> knots(const std::vector<double>& xs) {
  std::vector<Knot> out;
  for (std::size_t i = 0; i < xs.size(); ++i) out.push_back({xs[i], kBrightness[i]});
  return out;
}

}  // namespace

TEST_CASE("rgb_to_hsb anchors") {
  auto white = rgb_to_hsb({1, 1, 1});
  CHECK(white.saturation == 0);
  CHECK(white.brightness == 1);
  auto red = rgb_to_hsb({1, 0, 0});
  CHECK(red.hue == doctest::Approx(0));
  CHECK(red.saturation == doctest::Approx(1));
  auto magenta = rgb_to_hsb({1, 0, 1});
  CHECK(magenta.hue == doctest::Approx(300));
  CHECK(magenta.saturation == doctest::Approx(1));
  CHECK(magenta.brightness == 1);
}

TEST_CASE("rgb_to_hsb agrees with the atan2 oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 20000; ++k) {
    const double r = u(rng), g = u(rng), b = u(rng);
    const auto got = rgb_to_hsb({r, g, b});
    const auto want = oracle::rgb_to_hsb(r, g, b);
    if (want.s < 1e-9) continue;
    CHECK(oracle::angular_gap(got.hue, want.h) < 1e-6);
    CHECK(std::fabs(got.saturation - want.s) < 1e-6);
    CHECK(std::fabs(got.brightness - want.b) < 1e-6);
  }
}

TEST_CASE("hsb_to_rgb anchors and inverse") {
  auto blue = hsb_to_rgb({240, 1, 1});
  CHECK(blue.r == doctest::Approx(0).epsilon(1e-12));
  CHECK(blue.g == doctest::Approx(0).epsilon(1e-12));
  CHECK(blue.b == doctest::Approx(1));
  auto gray = hsb_to_rgb({123, 0, 0.5});
  CHECK(gray.r == doctest::Approx(0.5));
  CHECK(gray.g == doctest::Approx(0.5));
  CHECK(gray.b == doctest::Approx(0.5));
  auto yellow = hsb_to_rgb({60, 1, 1});
  CHECK(yellow.r == doctest::Approx(1));
  CHECK(yellow.g == doctest::Approx(1));
  CHECK(yellow.b == doctest::Approx(0).epsilon(1e-12));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> h(0, 360), s(0.01, 1), b(0.01, 1);
  for (int k = 0; k < 5000; ++k) {
    const HsbColor c{h(rng), s(rng), b(rng)};
    const auto back = rgb_to_hsb(hsb_to_rgb(c));
    CHECK(oracle::angular_gap(back.hue, c.hue) < 1e-9);
    CHECK(std::fabs(back.saturation - c.saturation) < 1e-9);
    CHECK(std::fabs(back.brightness - c.brightness) < 1e-9);
  }
}

TEST_CASE("fit_lagrange passes through its knots") {
  const std::vector<Knot> line = {{0, 0}, {1, 1}};
  auto p = fit_lagrange(line);
  CHECK(p(0.37) == doctest::Approx(0.37));
  const std::vector<Knot> flat = {{0, 1}, {1, 1}, {2, 1}};
  auto c = fit_lagrange(flat);
  CHECK(c(5.0) == doctest::Approx(1.0));
  CHECK(c(-3.0) == doctest::Approx(1.0));

  for (const auto* xs : {&kRed, &kGreen, &kBlue}) {
    const auto k = knots(*xs);
    const auto poly = fit_lagrange(k);
    CHECK(poly.degree() == 4);
    for (const auto& kn : k) CHECK(std::fabs(poly(kn.x) - kn.y) < 1e-9);
  }
}

TEST_CASE("fit_lagrange matches the direct Lagrange form off the knots") {
  const auto poly = fit_lagrange(knots(kGreen));
  for (double x = 0; x <= 0.3; x += 0.01) {
    CHECK(poly(x) == doctest::Approx(oracle::lagrange_eval(kGreen, kBrightness, x)).epsilon(1e-9));
  }
}

TEST_CASE("published red quartic coefficients are reproduced") {
  const auto poly = fit_lagrange(knots(kRed));
  const auto& c = poly.coefficients();
  REQUIRE(c.size() == 5);
  CHECK(c[0] == doctest::Approx(0.1163).epsilon(1e-3));
  CHECK(c[1] == doctest::Approx(2.0864).epsilon(1e-3));
  CHECK(c[2] == doctest::Approx(-0.2037).epsilon(5e-3));
  CHECK(c[3] == doctest::Approx(-8.6910).epsilon(1e-3));
  CHECK(c[4] == doctest::Approx(9.8923).epsilon(1e-3));
  CHECK(std::fabs(poly(0.741883) - 1.0) < 1e-3);
  CHECK(std::fabs(poly(0.04052) - 0.2) < 1e-3);
}

TEST_CASE("duplicate knots are rejected") {
  const std::vector<Knot> dup = {{0.1, 0}, {0.1, 1}};
  try {
    fit_lagrange(dup);
    FAIL("expected DuplicateKnot");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::duplicate_knot);
  }
}

TEST_CASE("forward sensor model reproduces the white-light table") {
  const auto& cal = ResponseCalibration::lifx_a19();
  for (std::size_t i = 0; i < kBrightness.size(); ++i) {
    const double v = kBrightness[i];
    const auto d = sensor_response({v, v, v}, cal);
    CHECK(std::fabs(d.dr - kRed[i]) < 1e-6);
    CHECK(std::fabs(d.dg - kGreen[i]) < 1e-6);
    CHECK(std::fabs(d.db - kBlue[i]) < 1e-6);
  }
  const auto dark = sensor_response({0, 0, 0}, cal);
  CHECK(dark.dr == 0);
  CHECK(dark.dg == 0);
  CHECK(dark.db == 0);
}

TEST_CASE("correct_response maps table rows back to brightness") {
  const auto& cal = ResponseCalibration::lifx_a19();
  auto full = correct_response({0.741883, 0.242022, 1.0}, cal);
  CHECK(std::fabs(full.gr - 1.0) < 1e-3);
  CHECK(std::fabs(full.gg - 1.0) < 1e-3);
  CHECK(std::fabs(full.gb - 1.0) < 1e-3);
  auto low = correct_response({0.04052, 0.013536, 0.058512}, cal);
  CHECK(std::fabs(low.gr - 0.2) < 1e-3);
  CHECK(std::fabs(low.gg - 0.2) < 1e-3);
  CHECK(std::fabs(low.gb - 0.2) < 1e-3);
  // below the lowest knot the correction tapers to zero
  auto dark = correct_response({0, 0, 0}, cal);
  CHECK(dark.gr == 0);
  CHECK(dark.gg == 0);
  CHECK(dark.gb == 0);
  // the raw polynomials keep their published offsets at zero
  CHECK(cal.correction_polynomial(0)(0.0) == doctest::Approx(0.1163).epsilon(2e-3));
  CHECK(cal.correction_polynomial(1)(0.0) == doctest::Approx(0.1198).epsilon(2e-3));
  CHECK(cal.correction_polynomial(2)(0.0) == doctest::Approx(0.1174).epsilon(2e-3));
}

TEST_CASE("correction inverts the forward model") {
  const auto& cal = ResponseCalibration::lifx_a19();
  const double grid[] = {0.2, 0.4, 0.6, 0.8, 1.0};
  for (double r : grid) {
    for (double g : grid) {
      for (double b : grid) {
        const auto c = correct_response(sensor_response({r, g, b}, cal), cal);
        CHECK(std::fabs(c.gr - r) < 2e-3);
        CHECK(std::fabs(c.gg - g) < 2e-3);
        CHECK(std::fabs(c.gb - b) < 2e-3);
      }
    }
  }
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const RgbColor in{u(rng), u(rng), u(rng)};
    const auto c = correct_response(sensor_response(in, cal), cal);
    CHECK(std::fabs(c.gr - in.r) < 0.05);
    CHECK(std::fabs(c.gg - in.g) < 0.05);
    CHECK(std::fabs(c.gb - in.b) < 0.05);
    for (int ch = 0; ch < 3; ++ch) {
      CHECK(c[ch] >= -0.01);
      CHECK(c[ch] <= 1.02);
    }
  }
}

TEST_CASE("hue identification is brightness invariant for every degree") {
  const auto& cal = ResponseCalibration::lifx_a19();
  for (int h = 0; h < 360; ++h) {
    CAPTURE(h);
    const int at_full = identify_hue(sensor_response(hsb_to_rgb({double(h), 1, 1.0}), cal), cal);
    CHECK(identify_hue(sensor_response(hsb_to_rgb({double(h), 1, 0.6}), cal), cal) == at_full);
    CHECK(identify_hue(sensor_response(hsb_to_rgb({double(h), 1, 0.3}), cal), cal) == at_full);
  }
  CHECK(identify_hue(sensor_response(hsb_to_rgb({120, 1, 0.3}), cal), cal) == 120);
  CHECK(identify_hue(sensor_response(hsb_to_rgb({120, 1, 1.0}), cal), cal) == 120);
}

TEST_CASE("blue-only response lands near 240 degrees") {
  const auto& cal = ResponseCalibration::lifx_a19();
  const int bin = identify_hue({0, 0, 0.5}, cal);
  CHECK(oracle::angular_gap(bin, 240) <= 30);
}

TEST_CASE("dark response is rejected") {
  const auto& cal = ResponseCalibration::lifx_a19();
  try {
    identify_hue({0, 0, 0}, cal);
    FAIL("expected DarkSample");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::dark_sample);
  }
}

TEST_CASE("calibration tables are well formed") {
  const auto& cal = ResponseCalibration::lifx_a19();
  REQUIRE(cal.hue_factors().size() == 360);
  REQUIRE(cal.hue_sensitivity().size() == 360);
  double best = 0;
  int argmax = 0;
  for (int h = 0; h < 360; ++h) {
    const auto& f = cal.hue_factors()[h];
    CHECK(f[0] + f[1] + f[2] == doctest::Approx(1.0).epsilon(1e-12));
    const double s = luminance_sensitivity(h, cal);
    CHECK(s > 0);
    CHECK(s <= 1.0);
    if (s > best) {
      best = s;
      argmax = h;
    }
  }
  CHECK(luminance_sensitivity(argmax, cal) == 1.0);
  CHECK(luminance_sensitivity(77, cal) == luminance_sensitivity(77, cal));
  CHECK(luminance_sensitivity(0, cal) != luminance_sensitivity(120, cal));
}

TEST_CASE("calibration file roundtrip and shipped default") {
  const auto& cal = ResponseCalibration::lifx_a19();
  const auto text = calibration_to_json(cal);
  const auto back = calibration_from_json(text);
  CHECK(calibration_to_json(back) == text);

  const fs::path shipped = fs::path(LL_SOURCE_DIR) / "calibrations" / "lifx-a19.cal";
  REQUIRE(fs::exists(shipped));
  const auto loaded = load_calibration(shipped);
  CHECK(calibration_to_json(loaded) == text);
}

TEST_CASE("non-monotone knots are rejected") {
  ResponseCalibration::ChannelKnots k;
  for (int c = 0; c < 3; ++c) k[c] = knots(kBlue);
  k[0][2].x = 0.01;
  try {
    ResponseCalibration::from_knots(k, {0.3, 0.6, 0.1}, "bad");
    FAIL("expected CalibrationInvalid");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::calibration_invalid);
  }
}
