#pragma once

// Bulb-side multimedia visualization: audio mode drives brightness from the
// amplitude envelope at 10 Hz, video mode drives color from per-second frame
// averages at 1 Hz.

#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "lightleak/emission.hpp"
#include "lightleak/media.hpp"

namespace lightleak::visualizer {

inline constexpr double kAudioTickSeconds = 0.1;
inline constexpr double kVideoTickSeconds = 1.0;

struct StaticHue {
  double hue = 0;  // [0, 360)
  double saturation = 1.0;
};

struct RandomHue {
  int change_period_ms = 500;  // >= 100
  std::uint64_t seed = 0;
};

using HuePolicy = std::variant<StaticHue, RandomHue>;

// Maps one tick's worth of samples to a brightness in [0, 1].
using Envelope = std::function<double(std::span<const float>)>;

double peak_hold(std::span<const float> window);
double rms(std::span<const float> window);

struct Options {
  std::uint32_t source = 0x4C4C4541;
  std::uint64_t target = 0x0000D073D5000001ULL;
  Envelope envelope = peak_hold;
};

// Envelope value per 100 ms tick; tick k covers samples in [k T, (k+1) T).
std::vector<double> audio_envelope(const media::AudioTrack& track,
                                   const Envelope& envelope = peak_hold);

// Throws Errc::empty_input (EmptyTrack) for a track without samples and
// Errc::invalid_argument for an out-of-range policy.
PacketStream audio_visualize(const media::AudioTrack& track, const HuePolicy& policy,
                             const Options& options = {});

// Average color of each whole second of video.
std::vector<colorlab::RgbColor> per_second_colors(const media::VideoColorTrack& track);

PacketStream video_visualize(const media::VideoColorTrack& track, const Options& options = {});

}  // namespace lightleak::visualizer
