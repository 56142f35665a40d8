#pragma once

// Simulated optical path from bulb to adversary sensor: inverse-square
// attenuation, window transmittance, a lumped lens gain, sensor response,
// additive Gaussian noise, sampling jitter and dropped control packets.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lightleak/colorlab.hpp"
#include "lightleak/emission.hpp"

namespace lightleak::optics {

struct ChannelConfig {
  double distance_m = 1.0;             // > 0
  double visible_transmittance = 1.0;  // (0, 1]
  double noise_sigma = 0.0;            // >= 0, on the response scale
  double gain = 1.0;                   // > 0
  double sample_jitter_ms = 0.0;       // >= 0
  double packet_loss_prob = 0.0;       // [0, 1)
  std::uint64_t seed = 0;

  // Throws Errc::invalid_argument on an out-of-range field.
  void validate() const;
  // VT * gain / d^2
  double attenuation() const;
};

enum class SensorKind { luminance, rgb, infrared };

struct Sensor {
  SensorKind kind = SensorKind::luminance;
  double rate_hz = 10.0;

  static Sensor luminance() { return {SensorKind::luminance, 10.0}; }
  static Sensor rgb_audio() { return {SensorKind::rgb, 10.0}; }
  static Sensor rgb_video() { return {SensorKind::rgb, 1.0}; }
  static Sensor infrared() { return {SensorKind::infrared, 2000.0}; }

  int dims() const { return kind == SensorKind::rgb ? 3 : 1; }
};

// Timestamps strictly increasing; values row-major with dims() columns.
struct SampleStream {
  int dims = 1;
  std::vector<double> t;
  std::vector<double> values;

  std::size_t size() const { return t.size(); }
  double value(std::size_t i, int c = 0) const { return values[i * dims + c]; }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * dims, static_cast<std::size_t>(dims)};
  }
};

// Observation interval on the timeline clock. duration < 0 means "until the
// timeline ends".
struct Window {
  double start = 0;
  double duration = -1;
};

// Samples are taken at start + (k + 0.5) / rate, k < floor(duration * rate).
// Throws Errc::empty_input (EmptyTimeline) for a timeline without events.
SampleStream observe(const Timeline& timeline, const Sensor& sensor, const ChannelConfig& cfg,
                     const colorlab::ResponseCalibration& cal, Window window = {});

// Infinite when noise_sigma is zero.
double effective_snr(const ChannelConfig& cfg, double peak_emission);

// Linear slew from `from` towards `to` over dt seconds.
double slew(double from, double to, double dt, const SlewRates& rates);

// CSV "t,value[,value,value]" with a header row.
void write_stream_csv(const SampleStream& stream, const std::filesystem::path& path);
SampleStream read_stream_csv(const std::filesystem::path& path);

}  // namespace lightleak::optics
