#include "lightleak/media.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lightleak/error.hpp"

namespace lightleak::media {
namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io_error, "short write to " + path.string());
}

std::uint64_t read_le(std::span<const std::uint8_t> b, std::size_t off, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[off + i]) << (8 * i);
  return v;
}

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t off, const char* tag) {
  return std::memcmp(b.data() + off, tag, 4) == 0;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

constexpr char kRawMagic[8] = {'L', 'L', 'P', 'C', 'M', '1', '6', '\0'};
constexpr std::size_t kRawHeader = 24;

}  // namespace

colorlab::RgbColor average_frame_rgb(const Frame& frame) {
  if (frame.pixels.empty()) throw Error(Errc::empty_input, "frame has no pixels");
  double r = 0, g = 0, b = 0;
  for (const auto& p : frame.pixels) {
    r += p.r;
    g += p.g;
    b += p.b;
  }
  const double n = static_cast<double>(frame.pixels.size());
  return {r / n, g / n, b / n};
}

float pcm16_to_float(std::int16_t s) noexcept {
  return std::max(-1.0f, static_cast<float>(s) / 32767.0f);
}

std::int16_t float_to_pcm16(float v) noexcept {
  const float c = std::clamp(v, -1.0f, 1.0f);
  return static_cast<std::int16_t>(std::lround(c * 32767.0f));
}

AudioTrack read_wav(const std::filesystem::path& path) {
  const auto b = slurp(path);
  if (b.size() < 12 || !tag_is(b, 0, "RIFF") || !tag_is(b, 8, "WAVE")) {
    throw Error(Errc::io_error, path.string() + ": not a RIFF/WAVE file");
  }
  AudioTrack t;
  bool have_fmt = false;
  std::size_t off = 12;
  while (off + 8 <= b.size()) {
    const auto len = static_cast<std::size_t>(read_le(b, off + 4, 4));
    const std::size_t body = off + 8;
    if (body + len > b.size()) throw Error(Errc::io_error, path.string() + ": truncated chunk");
    if (tag_is(b, off, "fmt ")) {
      if (len < 16) throw Error(Errc::io_error, path.string() + ": short fmt chunk");
      const auto format = read_le(b, body, 2);
      const auto channels = read_le(b, body + 2, 2);
      const auto bits = read_le(b, body + 14, 2);
      if (format != 1 || channels != 1 || bits != 16) {
        throw Error(Errc::io_error, path.string() + ": only mono 16-bit PCM is supported");
      }
      t.sample_rate = static_cast<double>(read_le(b, body + 4, 4));
      have_fmt = true;
    } else if (tag_is(b, off, "data")) {
      if (!have_fmt) throw Error(Errc::io_error, path.string() + ": data before fmt");
      t.samples.reserve(len / 2);
      for (std::size_t i = 0; i + 1 < len; i += 2) {
        t.samples.push_back(pcm16_to_float(static_cast<std::int16_t>(read_le(b, body + i, 2))));
      }
      if (t.sample_rate <= 0) throw Error(Errc::io_error, path.string() + ": zero sample rate");
      t.info.id = path.stem().string();
      return t;
    }
    off = body + len + (len & 1);
  }
  throw Error(Errc::io_error, path.string() + ": no data chunk");
}

void write_wav(const AudioTrack& track, const std::filesystem::path& path) {
  const auto rate = static_cast<std::uint32_t>(std::lround(track.sample_rate));
  const std::uint32_t data_len = static_cast<std::uint32_t>(track.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_len);
  put_tag(out, "RIFF");
  put_le(out, 36 + data_len, 4);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_le(out, 16, 4);
  put_le(out, 1, 2);
  put_le(out, 1, 2);
  put_le(out, rate, 4);
  put_le(out, rate * 2, 4);
  put_le(out, 2, 2);
  put_le(out, 16, 2);
  put_tag(out, "data");
  put_le(out, data_len, 4);
  for (float s : track.samples) put_le(out, static_cast<std::uint16_t>(float_to_pcm16(s)), 2);
  dump(path, out);
}

AudioTrack read_raw_pcm(const std::filesystem::path& path) {
  const auto b = slurp(path);
  if (b.size() < kRawHeader || std::memcmp(b.data(), kRawMagic, 8) != 0) {
    throw Error(Errc::io_error, path.string() + ": missing LLPCM16 header");
  }
  AudioTrack t;
  t.sample_rate = static_cast<double>(read_le(b, 8, 4));
  const auto channels = read_le(b, 12, 4);
  const auto count = read_le(b, 16, 8);
  if (channels != 1 || t.sample_rate <= 0) {
    throw Error(Errc::io_error, path.string() + ": expected mono PCM with a positive rate");
  }
  if (b.size() != kRawHeader + count * 2) {
    throw Error(Errc::io_error, path.string() + ": sample count does not match file size");
  }
  t.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    t.samples.push_back(pcm16_to_float(static_cast<std::int16_t>(read_le(b, kRawHeader + 2 * i, 2))));
  }
  t.info.id = path.stem().string();
  return t;
}

void write_raw_pcm(const AudioTrack& track, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out(kRawMagic, kRawMagic + 8);
  put_le(out, static_cast<std::uint32_t>(std::lround(track.sample_rate)), 4);
  put_le(out, 1, 4);
  put_le(out, track.samples.size(), 8);
  for (float s : track.samples) put_le(out, static_cast<std::uint16_t>(float_to_pcm16(s)), 2);
  dump(path, out);
}

VideoColorTrack read_color_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  VideoColorTrack t;
  std::vector<double> times;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cols = split(line, ',');
    double v[4];
    bool ok = cols.size() == 4;
    for (int i = 0; ok && i < 4; ++i) ok = parse_double(cols[i], v[i]);
    if (!ok) {
      if (times.empty() && lineno == 1) continue;  // header
      throw Error(Errc::io_error, path.string() + ":" + std::to_string(lineno) + ": bad row");
    }
    for (int i = 1; i < 4; ++i) {
      if (v[i] < 0.0 || v[i] > 1.0) {
        throw Error(Errc::io_error,
                    path.string() + ":" + std::to_string(lineno) + ": color outside [0,1]");
      }
    }
    if (!times.empty() && v[0] <= times.back()) {
      throw Error(Errc::io_error,
                  path.string() + ":" + std::to_string(lineno) + ": timestamps not increasing");
    }
    times.push_back(v[0]);
    t.frames.push_back({v[1], v[2], v[3]});
  }
  if (t.frames.empty()) throw Error(Errc::io_error, path.string() + ": no color rows");
  if (times.size() >= 2) {
    const double span = times.back() - times.front();
    t.frame_rate = static_cast<double>(times.size() - 1) / span;
    // snap to a round rate when the log was written at one
    const double rounded = std::round(t.frame_rate * 1000.0) / 1000.0;
    if (std::abs(rounded - t.frame_rate) < 1e-6) t.frame_rate = rounded;
  } else {
    t.frame_rate = 1.0;
  }
  t.info.id = path.stem().string();
  return t;
}

void write_color_log(const VideoColorTrack& track, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << "t,r,g,b\n";
  char buf[128];
  for (std::size_t i = 0; i < track.frames.size(); ++i) {
    const auto& f = track.frames[i];
    std::snprintf(buf, sizeof buf, "%.6f,%.9g,%.9g,%.9g\n", i / track.frame_rate, f.r, f.g, f.b);
    out << buf;
  }
}

VideoColorTrack read_rgb24(const std::filesystem::path& path) {
  const auto b = slurp(path);
  const auto nl = std::find(b.begin(), b.end(), '\n');
  if (nl == b.end()) throw Error(Errc::io_error, path.string() + ": missing RGB24 header");
  std::istringstream header(std::string(b.begin(), nl));
  std::string magic;
  std::size_t w = 0, h = 0;
  double fps = 0;
  header >> magic >> w >> h >> fps;
  if (magic != "RGB24" || w == 0 || h == 0 || !(fps > 0)) {
    throw Error(Errc::io_error, path.string() + ": bad RGB24 header");
  }
  const std::size_t start = static_cast<std::size_t>(nl - b.begin()) + 1;
  const std::size_t frame_bytes = w * h * 3;
  const std::size_t payload = b.size() - start;
  if (payload == 0 || payload % frame_bytes != 0) {
    throw Error(Errc::io_error, path.string() + ": payload is not a whole number of frames");
  }
  VideoColorTrack t;
  t.frame_rate = fps;
  Frame f{w, h, std::vector<colorlab::RgbColor>(w * h)};
  for (std::size_t off = start; off < b.size(); off += frame_bytes) {
    for (std::size_t p = 0; p < w * h; ++p) {
      f.pixels[p] = {b[off + 3 * p] / 255.0, b[off + 3 * p + 1] / 255.0, b[off + 3 * p + 2] / 255.0};
    }
    t.frames.push_back(average_frame_rgb(f));
  }
  t.info.id = path.stem().string();
  return t;
}

void write_rgb24(std::span<const Frame> frames, double fps, const std::filesystem::path& path) {
  if (frames.empty()) throw Error(Errc::empty_input, "no frames to write");
  const auto w = frames[0].width, h = frames[0].height;
  std::string header = "RGB24 " + std::to_string(w) + " " + std::to_string(h) + " ";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g\n", fps);
  header += buf;
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (const auto& f : frames) {
    if (f.width != w || f.height != h || f.pixels.size() != w * h) {
      throw Error(Errc::invalid_argument, "frames must share one size");
    }
    for (const auto& p : f.pixels) {
      for (double c : {p.r, p.g, p.b}) {
        out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)));
      }
    }
  }
  dump(path, out);
}

}  // namespace lightleak::media
