#pragma once

// Color mathematics: RGB <-> HSB, the RGB-sensor response model, response
// correction with Lagrange polynomials, and hue identification from
// response ratios.

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lightleak::colorlab {

inline constexpr int kHueBins = 360;

struct RgbColor {
  double r = 0, g = 0, b = 0;

  double operator[](int c) const { return c == 0 ? r : (c == 1 ? g : b); }
  friend bool operator==(const RgbColor&, const RgbColor&) = default;
};

struct HsbColor {
  double hue = 0;         // degrees, [0, 360)
  double saturation = 0;  // [0, 1]
  double brightness = 0;  // [0, 1]

  friend bool operator==(const HsbColor&, const HsbColor&) = default;
};

// Raw sensor responses, one per channel, >= 0.
struct RgbResponse {
  double dr = 0, dg = 0, db = 0;

  double operator[](int c) const { return c == 0 ? dr : (c == 1 ? dg : db); }
};

// Responses mapped back onto the brightness scale.
struct CorrectedComposition {
  double gr = 0, gg = 0, gb = 0;

  double operator[](int c) const { return c == 0 ? gr : (c == 1 ? gg : gb); }
};

// Hue follows the arccos form with H <- 360 - H when b > g; saturation is
// 1 - 3 min / (r + g + b); brightness is max(r, g, b). Achromatic input maps
// to hue 0, saturation 0.
HsbColor rgb_to_hsb(const RgbColor& c);

// Exact inverse of rgb_to_hsb for S > 0, B > 0 (sector formulas scaled so
// that the dominant component equals B).
RgbColor hsb_to_rgb(const HsbColor& c);

// Polynomial in ascending-power form: c[0] + c[1] x + c[2] x^2 + ...
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coefficients) : coeffs_(std::move(coefficients)) {}

  double operator()(double x) const;
  double derivative(double x) const;
  std::size_t degree() const { return coeffs_.empty() ? 0 : coeffs_.size() - 1; }
  const std::vector<double>& coefficients() const { return coeffs_; }

 private:
  std::vector<double> coeffs_;
};

struct Knot {
  double x = 0;  // observed (normalized) response
  double y = 0;  // true brightness
};

// Expands the Lagrange basis into monomial coefficients of degree n - 1.
// Throws Errc::duplicate_knot on repeated x, Errc::invalid_argument for < 2 knots.
Polynomial fit_lagrange(std::span<const Knot> knots);

// Per-bulb calibration. Responses are expressed relative to the global peak
// (the strongest channel at full brightness), which is how the reference
// knots are tabulated.
class ResponseCalibration {
 public:
  using ChannelKnots = std::array<std::vector<Knot>, 3>;
  using Factors = std::array<double, 3>;

  // Builds the correction polynomials from knots and derives the 360-bin
  // factor and sensitivity tables from the forward model.
  static ResponseCalibration from_knots(ChannelKnots knots, Factors luminance_weights,
                                        std::string name);

  // Same, but with externally supplied tables (e.g. measured curves).
  static ResponseCalibration from_tables(ChannelKnots knots, Factors luminance_weights,
                                         std::vector<Factors> hue_factors,
                                         std::vector<double> hue_sensitivity,
                                         std::string name);

  // Reference bulb: five white-light knots per channel.
  static const ResponseCalibration& lifx_a19();

  const std::string& name() const { return name_; }
  const ChannelKnots& knots() const { return knots_; }
  const Polynomial& correction_polynomial(int channel) const { return poly_[channel]; }
  const Factors& luminance_weights() const { return weights_; }

  // Response of a channel at full brightness, relative to the global peak.
  double peak_response(int channel) const { return peaks_[channel]; }
  double global_peak() const { return global_peak_; }

  // Normalized response -> brightness (polynomial above the lowest knot,
  // linear taper to zero below it, clamped to [0, 1.02]).
  double correct_channel(int channel, double normalized_response) const;

  // Brightness -> normalized response; exact inverse of correct_channel on [0, 1].
  double forward_channel(int channel, double brightness) const;

  std::span<const Factors> hue_factors() const { return factors_; }
  std::span<const double> hue_sensitivity() const { return sensitivity_; }

 private:
  ResponseCalibration() = default;
  void prepare();
  void derive_tables();
  void validate_tables() const;

  std::string name_;
  ChannelKnots knots_;
  Factors weights_{};
  std::array<Polynomial, 3> poly_;
  Factors peaks_{};
  double global_peak_ = 1.0;
  std::vector<Factors> factors_;
  std::vector<double> sensitivity_;
};

// Forward sensor model for an emitted color.
RgbResponse sensor_response(const RgbColor& c, const ResponseCalibration& cal);

// Normalizes by the global peak and maps each channel through its
// correction polynomial.
CorrectedComposition correct_response(const RgbResponse& d, const ResponseCalibration& cal);

// Nearest 360-bin hue by L1 distance over response factors. Responses are
// linearized with the correction polynomials first, so the result does not
// depend on brightness. Throws Errc::dark_sample when the total response is
// at or below noise_floor.
int identify_hue(const RgbResponse& d, const ResponseCalibration& cal,
                 double noise_floor = 1e-9);

// Relative luminance of a fully saturated hue as seen by a luminance meter;
// 1.0 at the brightest bin.
double luminance_sensitivity(int hue_bin, const ResponseCalibration& cal);

// Structured-text (JSON) calibration files; see docs/file-formats.md.
std::string calibration_to_json(const ResponseCalibration& cal);
ResponseCalibration calibration_from_json(const std::string& text);
ResponseCalibration load_calibration(const std::filesystem::path& path);
void save_calibration(const ResponseCalibration& cal, const std::filesystem::path& path);

}  // namespace lightleak::colorlab
