#include "lightleak/visualizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lightleak/error.hpp"

namespace lightleak::visualizer {
namespace {

std::size_t tick_count(double duration, double tick) {
  return static_cast<std::size_t>(std::ceil(duration / tick - 1e-9));
}

void append(PacketStream& out, protocol::Packet packet, double t) {
  out.timeline.events.push_back({t, state_from_packet(packet)});
  out.packets.push_back(std::move(packet));
}

}  // namespace

double peak_hold(std::span<const float> window) {
  float peak = 0.0f;
  for (float s : window) peak = std::max(peak, std::abs(s));
  return std::min(1.0, static_cast<double>(peak));
}

double rms(std::span<const float> window) {
  if (window.empty()) return 0.0;
  double acc = 0.0;
  for (float s : window) acc += static_cast<double>(s) * s;
  return std::min(1.0, std::sqrt(acc / static_cast<double>(window.size())));
}

std::vector<double> audio_envelope(const media::AudioTrack& track, const Envelope& envelope) {
  if (track.samples.empty()) throw Error(Errc::empty_input, "audio track has no samples");
  if (!(track.sample_rate > 0)) throw Error(Errc::invalid_argument, "sample rate must be positive");
  const std::size_t ticks = tick_count(track.duration(), kAudioTickSeconds);
  const std::size_t n = track.samples.size();
  std::vector<double> env(ticks, 0.0);
  const std::span<const float> all(track.samples);
  for (std::size_t k = 0; k < ticks; ++k) {
    const auto lo = std::min(n, static_cast<std::size_t>(std::floor(k * kAudioTickSeconds * track.sample_rate + 1e-9)));
    const auto hi = std::min(n, static_cast<std::size_t>(std::floor((k + 1) * kAudioTickSeconds * track.sample_rate + 1e-9)));
    env[k] = hi > lo ? envelope(all.subspan(lo, hi - lo)) : 0.0;
  }
  return env;
}

PacketStream audio_visualize(const media::AudioTrack& track, const HuePolicy& policy,
                             const Options& options) {
  const std::vector<double> env = audio_envelope(track, options.envelope);

  std::vector<double> hues(env.size(), 0.0);
  double saturation = 1.0;
  if (const auto* s = std::get_if<StaticHue>(&policy)) {
    if (!(s->hue >= 0.0 && s->hue < 360.0) || s->saturation < 0.0 || s->saturation > 1.0) {
      throw Error(Errc::invalid_argument, "static hue must lie in [0, 360)");
    }
    std::fill(hues.begin(), hues.end(), std::round(s->hue) >= 360.0 ? 0.0 : std::round(s->hue));
    saturation = s->saturation;
  } else {
    const auto& r = std::get<RandomHue>(policy);
    if (r.change_period_ms < 100) {
      throw Error(Errc::invalid_argument, "random hue change period must be >= 100 ms");
    }
    const auto period_ticks = static_cast<std::size_t>(std::ceil(r.change_period_ms / 100.0 - 1e-9));
    std::mt19937_64 rng(r.seed);
    std::uniform_int_distribution<int> draw(0, colorlab::kHueBins - 1);
    double current = 0.0;
    for (std::size_t k = 0; k < hues.size(); ++k) {
      if (k % period_ticks == 0) current = draw(rng);
      hues[k] = current;
    }
  }

  PacketStream out;
  out.packets.reserve(env.size());
  out.timeline.events.reserve(env.size());
  for (std::size_t k = 0; k < env.size(); ++k) {
    protocol::SetColor c;
    c.hue = protocol::hue_to_u16(hues[k]);
    c.saturation = protocol::unit_to_u16(saturation);
    c.brightness = protocol::unit_to_u16(env[k]);
    append(out,
           protocol::make_packet(c, options.source, options.target, static_cast<std::uint8_t>(k)),
           k * kAudioTickSeconds);
  }
  out.timeline.end_time = env.size() * kAudioTickSeconds;
  return out;
}

std::vector<colorlab::RgbColor> per_second_colors(const media::VideoColorTrack& track) {
  if (track.frames.empty()) throw Error(Errc::empty_input, "video track has no frames");
  if (!(track.frame_rate > 0)) throw Error(Errc::invalid_argument, "frame rate must be positive");
  const std::size_t seconds = tick_count(track.duration(), kVideoTickSeconds);
  const std::size_t n = track.frames.size();
  std::vector<colorlab::RgbColor> out(seconds);
  for (std::size_t s = 0; s < seconds; ++s) {
    const auto lo = std::min(n, static_cast<std::size_t>(std::ceil(s * track.frame_rate - 1e-9)));
    const auto hi = std::min(n, static_cast<std::size_t>(std::ceil((s + 1) * track.frame_rate - 1e-9)));
    if (hi <= lo) {
      out[s] = s > 0 ? out[s - 1] : track.frames.front();
      continue;
    }
    double r = 0, g = 0, b = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      r += track.frames[i].r;
      g += track.frames[i].g;
      b += track.frames[i].b;
    }
    const double cnt = static_cast<double>(hi - lo);
    out[s] = {r / cnt, g / cnt, b / cnt};
  }
  return out;
}

PacketStream video_visualize(const media::VideoColorTrack& track, const Options& options) {
  const auto colors = per_second_colors(track);
  PacketStream out;
  out.packets.reserve(colors.size());
  for (std::size_t s = 0; s < colors.size(); ++s) {
    const auto hsb = colorlab::rgb_to_hsb(colors[s]);
    protocol::SetColor c;
    c.hue = protocol::hue_to_u16(hsb.hue);
    c.saturation = protocol::unit_to_u16(hsb.saturation);
    c.brightness = protocol::unit_to_u16(hsb.brightness);
    append(out,
           protocol::make_packet(c, options.source, options.target, static_cast<std::uint8_t>(s)),
           s * kVideoTickSeconds);
  }
  out.timeline.end_time = colors.size() * kVideoTickSeconds;
  return out;
}

}  // namespace lightleak::visualizer
