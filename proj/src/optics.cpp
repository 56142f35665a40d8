#include "lightleak/optics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "lightleak/error.hpp"

namespace lightleak::optics {

void ChannelConfig::validate() const {
  auto bad = [](const char* what) { throw Error(Errc::invalid_argument, what); };
  if (!(distance_m > 0)) bad("distance_m must be > 0");
  if (!(visible_transmittance > 0) || visible_transmittance > 1) {
    bad("visible_transmittance must lie in (0, 1]");
  }
  if (!(noise_sigma >= 0)) bad("noise_sigma must be >= 0");
  if (!(gain > 0)) bad("gain must be > 0");
  if (!(sample_jitter_ms >= 0)) bad("sample_jitter_ms must be >= 0");
  if (!(packet_loss_prob >= 0) || packet_loss_prob >= 1) bad("packet_loss_prob must lie in [0, 1)");
}

double ChannelConfig::attenuation() const {
  return visible_transmittance * gain / (distance_m * distance_m);
}

double slew(double from, double to, double dt, const SlewRates& rates) {
  if (dt <= 0 || from == to) return from;
  if (to > from) {
    const double step = rates.rise_time_s > 0 ? dt / rates.rise_time_s : to - from;
    return std::min(to, from + step);
  }
  const double step = rates.fall_time_s > 0 ? dt / rates.fall_time_s : from - to;
  return std::max(to, from - step);
}

SampleStream observe(const Timeline& timeline, const Sensor& sensor, const ChannelConfig& cfg,
                     const colorlab::ResponseCalibration& cal, Window window) {
  if (timeline.events.empty()) throw Error(Errc::empty_input, "no emission events");
  cfg.validate();
  if (!(sensor.rate_hz > 0)) throw Error(Errc::invalid_argument, "sensor rate must be positive");

  std::mt19937_64 rng(cfg.seed);

  // Decide up front which updates the bulb never receives; the first state
  // always lands.
  std::vector<char> delivered(timeline.events.size(), 1);
  if (cfg.packet_loss_prob > 0) {
    std::bernoulli_distribution lost(cfg.packet_loss_prob);
    for (std::size_t i = 1; i < delivered.size(); ++i) delivered[i] = lost(rng) ? 0 : 1;
  }

  const double duration = window.duration >= 0 ? window.duration : timeline.end_time - window.start;
  const auto count = static_cast<std::size_t>(std::max(0.0, std::floor(duration * sensor.rate_hz + 1e-9)));
  const double period = 1.0 / sensor.rate_hz;
  const double jitter = std::min(cfg.sample_jitter_ms * 1e-3, 0.49 * period);

  SampleStream out;
  out.dims = sensor.dims();
  out.t.resize(count);
  out.values.resize(count * out.dims);

  const double scale = cfg.attenuation();
  std::uniform_real_distribution<double> jitter_draw(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  // The light state is walked forward once; infrared output slews between
  // targets when the timeline carries slew rates.
  const auto& events = timeline.events;
  std::size_t next = 0;
  LightState state = events.front().state;
  double ir_level = 0.0;
  double ir_target = 0.0;
  double ir_clock = events.front().t;
  if (const auto* ir = std::get_if<InfraredLevel>(&state)) ir_level = ir_target = ir->power;

  auto advance_ir = [&](double to_time) {
    if (!timeline.infrared_slew) {
      ir_level = ir_target;
    } else {
      ir_level = slew(ir_level, ir_target, to_time - ir_clock, *timeline.infrared_slew);
    }
    ir_clock = to_time;
  };

  for (std::size_t k = 0; k < count; ++k) {
    double ts = window.start + (static_cast<double>(k) + 0.5) * period;
    if (jitter > 0) ts += jitter * jitter_draw(rng);
    out.t[k] = ts;

    while (next < events.size() && events[next].t <= ts) {
      if (delivered[next]) {
        if (const auto* ir = std::get_if<InfraredLevel>(&events[next].state)) {
          advance_ir(events[next].t);
          ir_target = ir->power;
        }
        state = events[next].state;
      }
      ++next;
    }

    double* row = &out.values[k * out.dims];
    switch (sensor.kind) {
      case SensorKind::luminance: {
        double lum = 0.0;
        if (const auto* c = std::get_if<colorlab::HsbColor>(&state)) {
          int bin = static_cast<int>(std::lround(c->hue)) % colorlab::kHueBins;
          // a desaturated color drifts towards the white-point sensitivity
          const double hue_sens = colorlab::luminance_sensitivity(bin, cal);
          lum = c->brightness * (c->saturation * hue_sens + (1.0 - c->saturation));
        }
        row[0] = lum * scale;
        break;
      }
      case SensorKind::rgb: {
        colorlab::RgbResponse d{};
        if (const auto* c = std::get_if<colorlab::HsbColor>(&state)) {
          d = colorlab::sensor_response(colorlab::hsb_to_rgb(*c), cal);
        }
        row[0] = d.dr * scale;
        row[1] = d.dg * scale;
        row[2] = d.db * scale;
        break;
      }
      case SensorKind::infrared: {
        if (std::holds_alternative<InfraredLevel>(state)) {
          advance_ir(ts);
          row[0] = ir_level * scale;
        } else {
          row[0] = 0.0;
        }
        break;
      }
    }
    if (cfg.noise_sigma > 0) {
      for (int c = 0; c < out.dims; ++c) row[c] = std::max(0.0, row[c] + cfg.noise_sigma * noise(rng));
    }
  }
  return out;
}

double effective_snr(const ChannelConfig& cfg, double peak_emission) {
  if (cfg.noise_sigma == 0.0) return std::numeric_limits<double>::infinity();
  return peak_emission * cfg.attenuation() / cfg.noise_sigma;
}

void write_stream_csv(const SampleStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << (stream.dims == 1 ? "t,value\n" : "t,r,g,b\n");
  char buf[64];
  for (std::size_t i = 0; i < stream.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", stream.t[i]);
    out << buf;
    for (int c = 0; c < stream.dims; ++c) {
      std::snprintf(buf, sizeof buf, ",%.17g", stream.value(i, c));
      out << buf;
    }
    out << '\n';
  }
}

SampleStream read_stream_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  SampleStream s;
  s.dims = 0;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line[0] == 't') continue;
    }
    std::vector<double> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        cols.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(Errc::io_error, path.string() + ": bad number '" + cell + "'");
      }
    }
    if (cols.size() != 2 && cols.size() != 4) {
      throw Error(Errc::io_error, path.string() + ": expected 2 or 4 columns");
    }
    const int dims = static_cast<int>(cols.size()) - 1;
    if (s.dims == 0) s.dims = dims;
    if (dims != s.dims) throw Error(Errc::io_error, path.string() + ": ragged rows");
    s.t.push_back(cols[0]);
    s.values.insert(s.values.end(), cols.begin() + 1, cols.end());
  }
  if (s.dims == 0) s.dims = 1;
  return s;
}

}  // namespace lightleak::optics
