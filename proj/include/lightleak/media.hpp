#pragma once

// Media containers consumed by the visualizers and their on-disk formats:
// RIFF/WAVE (PCM16 mono), headered raw PCM16, CSV color logs and raw RGB24
// frame files. Layouts are documented in docs/file-formats.md.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lightleak/colorlab.hpp"

namespace lightleak::media {

struct MediaInfo {
  std::string id;
  std::string title;
  std::string genre;
};

struct AudioTrack {
  std::vector<float> samples;  // [-1, 1]
  double sample_rate = 0;
  MediaInfo info;

  double duration() const { return sample_rate > 0 ? samples.size() / sample_rate : 0.0; }
};

struct VideoColorTrack {
  std::vector<colorlab::RgbColor> frames;  // per-frame average color
  double frame_rate = 0;
  MediaInfo info;

  double duration() const { return frame_rate > 0 ? frames.size() / frame_rate : 0.0; }
};

// Raw frame: row-major width x height pixels.
struct Frame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<colorlab::RgbColor> pixels;
};

// Throws Errc::empty_input on an empty frame.
colorlab::RgbColor average_frame_rgb(const Frame& frame);

// PCM16 <-> float: full scale is +/-32767, -32768 clamps to -1.
float pcm16_to_float(std::int16_t s) noexcept;
std::int16_t float_to_pcm16(float v) noexcept;

AudioTrack read_wav(const std::filesystem::path& path);
void write_wav(const AudioTrack& track, const std::filesystem::path& path);

AudioTrack read_raw_pcm(const std::filesystem::path& path);
void write_raw_pcm(const AudioTrack& track, const std::filesystem::path& path);

// CSV rows "t,r,g,b" with an optional header line; frame rate is inferred
// from the timestamps.
VideoColorTrack read_color_log(const std::filesystem::path& path);
void write_color_log(const VideoColorTrack& track, const std::filesystem::path& path);

// "RGB24 <width> <height> <fps>\n" followed by width*height*3 bytes per frame.
VideoColorTrack read_rgb24(const std::filesystem::path& path);
void write_rgb24(std::span<const Frame> frames, double fps, const std::filesystem::path& path);

}  // namespace lightleak::media
