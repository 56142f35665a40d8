#include "lightleak/colorlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "lightleak/error.hpp"

namespace lightleak::colorlab {
namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;
constexpr double kRad = std::numbers::pi / 180.0;
constexpr double kOvershootCap = 1.02;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

HsbColor rgb_to_hsb(const RgbColor& c) {
  const double r = clamp01(c.r), g = clamp01(c.g), b = clamp01(c.b);
  HsbColor out;
  out.brightness = std::max({r, g, b});
  const double sum = r + g + b;
  if (sum <= 0.0) return out;

  out.saturation = std::clamp(1.0 - 3.0 * std::min({r, g, b}) / sum, 0.0, 1.0);

  const double num = 0.5 * ((r - g) + (r - b));
  const double den = std::sqrt((r - g) * (r - g) + (r - b) * (g - b));
  if (!(den > 0.0) || out.saturation == 0.0) {
    out.saturation = 0.0;
    return out;
  }
  double h = std::acos(std::clamp(num / den, -1.0, 1.0)) * kDeg;
  if (b > g) h = 360.0 - h;
  if (h >= 360.0) h -= 360.0;
  out.hue = h;
  return out;
}

RgbColor hsb_to_rgb(const HsbColor& c) {
  const double s = clamp01(c.saturation);
  const double v = clamp01(c.brightness);
  if (v == 0.0) return {};
  if (s == 0.0) return {v, v, v};

  double h = std::fmod(c.hue, 360.0);
  if (h < 0) h += 360.0;

  // Unit-intensity composition in the sector containing h; the rotated
  // channel order is (dominant-leading, trailing, minimum).
  const int sector = static_cast<int>(h / 120.0) % 3;
  const double local = (h - 120.0 * sector) * kRad;
  const double lead = 1.0 + s * std::cos(local) / std::cos(std::numbers::pi / 3.0 - local);
  const double low = 1.0 - s;
  const double trail = 3.0 - lead - low;

  std::array<double, 3> rgb{};
  rgb[sector] = lead;
  rgb[(sector + 1) % 3] = trail;
  rgb[(sector + 2) % 3] = low;

  const double peak = std::max({rgb[0], rgb[1], rgb[2]});
  const double scale = v / peak;
  return {clamp01(rgb[0] * scale), clamp01(rgb[1] * scale), clamp01(rgb[2] * scale)};
}

double Polynomial::operator()(double x) const {
  double acc = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double Polynomial::derivative(double x) const {
  double acc = 0.0;
  for (std::size_t i = coeffs_.size(); i-- > 1;) acc = acc * x + static_cast<double>(i) * coeffs_[i];
  return acc;
}

Polynomial fit_lagrange(std::span<const Knot> knots) {
  const std::size_t n = knots.size();
  if (n < 2) throw Error(Errc::invalid_argument, "Lagrange fit needs at least 2 knots");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (knots[i].x == knots[j].x) {
        throw Error(Errc::duplicate_knot, "duplicate knot at x=" + std::to_string(knots[i].x));
      }
    }
  }

  std::vector<double> coeffs(n, 0.0);
  std::vector<double> basis;
  for (std::size_t j = 0; j < n; ++j) {
    // basis_j(x) = prod_{k != j} (x - x_k) / (x_j - x_k), built up one factor at a time
    basis.assign(1, 1.0);
    double denom = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == j) continue;
      std::vector<double> next(basis.size() + 1, 0.0);
      for (std::size_t p = 0; p < basis.size(); ++p) {
        next[p + 1] += basis[p];
        next[p] -= basis[p] * knots[k].x;
      }
      basis = std::move(next);
      denom *= knots[j].x - knots[k].x;
    }
    const double w = knots[j].y / denom;
    for (std::size_t p = 0; p < n; ++p) coeffs[p] += w * basis[p];
  }
  return Polynomial(std::move(coeffs));
}

ResponseCalibration ResponseCalibration::from_knots(ChannelKnots knots, Factors luminance_weights,
                                                    std::string name) {
  ResponseCalibration cal;
  cal.name_ = std::move(name);
  cal.knots_ = std::move(knots);
  cal.weights_ = luminance_weights;
  cal.prepare();
  cal.derive_tables();
  cal.validate_tables();
  return cal;
}

ResponseCalibration ResponseCalibration::from_tables(ChannelKnots knots, Factors luminance_weights,
                                                     std::vector<Factors> hue_factors,
                                                     std::vector<double> hue_sensitivity,
                                                     std::string name) {
  ResponseCalibration cal;
  cal.name_ = std::move(name);
  cal.knots_ = std::move(knots);
  cal.weights_ = luminance_weights;
  cal.prepare();
  cal.factors_ = std::move(hue_factors);
  cal.sensitivity_ = std::move(hue_sensitivity);
  cal.validate_tables();
  return cal;
}

const ResponseCalibration& ResponseCalibration::lifx_a19() {
  // White light at brightness 0.2 .. 1.0, responses normalized to the blue peak.
  static const ResponseCalibration cal = from_knots(
      {{
          {{{0.04052, 0.2}, {0.149747, 0.4}, {0.355869, 0.6}, {0.66887, 0.8}, {0.741883, 1.0}}},
          {{{0.013536, 0.2}, {0.050023, 0.4}, {0.115935, 0.6}, {0.218776, 0.8}, {0.242022, 1.0}}},
          {{{0.058512, 0.2}, {0.209917, 0.4}, {0.485289, 0.6}, {0.906446, 0.8}, {1.0, 1.0}}},
      }},
      {0.2126, 0.7152, 0.0722}, "lifx-a19");
  return cal;
}

void ResponseCalibration::prepare() {
  for (int c = 0; c < 3; ++c) {
    const auto& k = knots_[c];
    if (k.size() < 2) {
      throw Error(Errc::calibration_invalid, "channel " + std::to_string(c) + " has < 2 knots");
    }
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (!(k[i].x > 0.0) || !(k[i].y > 0.0) || k[i].y > 1.0) {
        throw Error(Errc::calibration_invalid,
                    "knot out of range on channel " + std::to_string(c));
      }
      if (i > 0 && (k[i].x <= k[i - 1].x || k[i].y <= k[i - 1].y)) {
        throw Error(Errc::calibration_invalid,
                    "knots not strictly increasing on channel " + std::to_string(c));
      }
    }
    poly_[c] = fit_lagrange(k);

    // The correction has to be invertible across the knot range.
    const double lo = k.front().x, hi = k.back().x;
    constexpr int kProbe = 2000;
    for (int i = 0; i <= kProbe; ++i) {
      const double x = lo + (hi - lo) * i / kProbe;
      if (!(poly_[c].derivative(x) > 0.0)) {
        throw Error(Errc::calibration_invalid,
                    "correction polynomial not monotone on channel " + std::to_string(c));
      }
    }
  }
  for (int c = 0; c < 3; ++c) peaks_[c] = forward_channel(c, 1.0);
  global_peak_ = 1.0;
}

double ResponseCalibration::correct_channel(int channel, double x) const {
  const auto& k = knots_[channel];
  if (!(x > 0.0)) return 0.0;
  if (x < k.front().x) return x * k.front().y / k.front().x;
  return std::clamp(poly_[channel](x), 0.0, kOvershootCap);
}

double ResponseCalibration::forward_channel(int channel, double brightness) const {
  const auto& k = knots_[channel];
  const Polynomial& p = poly_[channel];
  const double v = clamp01(brightness);
  if (v <= 0.0) return 0.0;
  if (v < k.front().y) return v * k.front().x / k.front().y;

  double lo = k.front().x;
  double hi = k.back().x;
  // brightness above the top knot: walk the bracket outward while P keeps rising
  while (p(hi) < v && p.derivative(hi) > 0.0 && hi < 4.0 * k.back().x) hi *= 1.01;
  if (p(hi) <= v) return hi;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (p(mid) < v ? lo : hi) = mid;
  }
  return std::abs(p(lo) - v) <= std::abs(p(hi) - v) ? lo : hi;
}

void ResponseCalibration::derive_tables() {
  factors_.assign(kHueBins, Factors{});
  sensitivity_.assign(kHueBins, 0.0);
  for (int h = 0; h < kHueBins; ++h) {
    const RgbColor rgb = hsb_to_rgb({static_cast<double>(h), 1.0, 1.0});
    const RgbResponse d = sensor_response(rgb, *this);
    const CorrectedComposition g = correct_response(d, *this);
    const double sum = g.gr + g.gg + g.gb;
    factors_[h] = {g.gr / sum, g.gg / sum, g.gb / sum};
    sensitivity_[h] = weights_[0] * d.dr + weights_[1] * d.dg + weights_[2] * d.db;
  }
  const double top = *std::max_element(sensitivity_.begin(), sensitivity_.end());
  for (double& s : sensitivity_) s /= top;
}

void ResponseCalibration::validate_tables() const {
  if (factors_.size() != static_cast<std::size_t>(kHueBins) ||
      sensitivity_.size() != static_cast<std::size_t>(kHueBins)) {
    throw Error(Errc::calibration_invalid, "hue tables must have 360 rows");
  }
  double top = 0.0;
  for (int h = 0; h < kHueBins; ++h) {
    const auto& f = factors_[h];
    if (f[0] < 0 || f[1] < 0 || f[2] < 0 || std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
      throw Error(Errc::calibration_invalid,
                  "response factors of bin " + std::to_string(h) + " do not sum to 1");
    }
    if (!(sensitivity_[h] > 0.0) || sensitivity_[h] > 1.0 + 1e-12) {
      throw Error(Errc::calibration_invalid,
                  "sensitivity of bin " + std::to_string(h) + " outside (0, 1]");
    }
    top = std::max(top, sensitivity_[h]);
  }
  if (std::abs(top - 1.0) > 1e-12) {
    throw Error(Errc::calibration_invalid, "sensitivity table must peak at 1");
  }
}

RgbResponse sensor_response(const RgbColor& c, const ResponseCalibration& cal) {
  const double k = cal.global_peak();
  return {k * cal.forward_channel(0, c.r), k * cal.forward_channel(1, c.g),
          k * cal.forward_channel(2, c.b)};
}

CorrectedComposition correct_response(const RgbResponse& d, const ResponseCalibration& cal) {
  const double k = cal.global_peak();
  return {cal.correct_channel(0, d.dr / k), cal.correct_channel(1, d.dg / k),
          cal.correct_channel(2, d.db / k)};
}

int identify_hue(const RgbResponse& d, const ResponseCalibration& cal, double noise_floor) {
  const RgbResponse clamped{std::max(d.dr, 0.0), std::max(d.dg, 0.0), std::max(d.db, 0.0)};
  if (clamped.dr + clamped.dg + clamped.db <= noise_floor) {
    throw Error(Errc::dark_sample, "response at or below the noise floor");
  }
  const CorrectedComposition g = correct_response(clamped, cal);
  const double sum = g.gr + g.gg + g.gb;
  if (!(sum > 0.0)) throw Error(Errc::dark_sample, "response corrects to darkness");
  const std::array<double, 3> f{g.gr / sum, g.gg / sum, g.gb / sum};

  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  const auto table = cal.hue_factors();
  for (int h = 0; h < kHueBins; ++h) {
    const double dist = std::abs(f[0] - table[h][0]) + std::abs(f[1] - table[h][1]) +
                        std::abs(f[2] - table[h][2]);
    if (dist < best_dist) {
      best_dist = dist;
      best = h;
    }
  }
  return best;
}

double luminance_sensitivity(int hue_bin, const ResponseCalibration& cal) {
  if (hue_bin < 0 || hue_bin >= kHueBins) {
    throw Error(Errc::invalid_argument, "hue bin " + std::to_string(hue_bin) + " out of range");
  }
  return cal.hue_sensitivity()[hue_bin];
}

}  // namespace lightleak::colorlab
