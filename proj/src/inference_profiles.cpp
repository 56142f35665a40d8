#include <algorithm>
#include <cmath>

#include "lightleak/error.hpp"
#include "lightleak/inference.hpp"
#include "lightleak/protocol.hpp"
#include "lightleak/visualizer.hpp"

namespace lightleak::inference {

const char* to_string(MediaKind kind) { return kind == MediaKind::audio ? "audio" : "video"; }

MediaKind media_kind_from_string(const std::string& s) {
  if (s == "audio") return MediaKind::audio;
  if (s == "video") return MediaKind::video;
  throw Error(Errc::invalid_argument, "unknown media kind '" + s + "'");
}

double Series::max_value() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

Series Series::slice(std::size_t first, std::size_t count) const {
  Series s;
  s.dims = dims;
  const auto lo = values.begin() + static_cast<std::ptrdiff_t>(first * dims);
  s.values.assign(lo, lo + static_cast<std::ptrdiff_t>(count * dims));
  return s;
}

namespace {

Series scale_to_unit_max(std::vector<double> values, int dims) {
  Series s{dims, std::move(values)};
  const double top = s.max_value();
  if (!(top > 0.0)) throw Error(Errc::all_dark, "profile has no light above zero");
  for (double& v : s.values) v /= top;
  return s;
}

}  // namespace

Series normalize_static(const LuminanceProfile& profile) {
  if (profile.values.empty()) throw Error(Errc::empty_input, "empty luminance profile");
  return scale_to_unit_max(profile.values, 1);
}

std::vector<double> learn_bin_maxima(const LuminanceProfile& profile, bool peaks_only) {
  if (profile.hue_bins.size() != profile.values.size()) {
    throw Error(Errc::invalid_argument, "profile has no per-sample hue bins");
  }
  std::vector<double> maxima(colorlab::kHueBins, 0.0);
  auto take = [&](std::size_t i) {
    const int bin = profile.hue_bins[i];
    if (bin >= 0 && bin < colorlab::kHueBins) maxima[bin] = std::max(maxima[bin], profile.values[i]);
  };
  if (peaks_only) {
    for (std::size_t i : detect_peaks(profile.values)) take(i);
  } else {
    for (std::size_t i = 0; i < profile.values.size(); ++i) take(i);
  }
  return maxima;
}

Series normalize_random(const LuminanceProfile& profile, std::span<const double> bin_maxima) {
  if (profile.values.empty()) throw Error(Errc::empty_input, "empty luminance profile");
  std::vector<double> learned;
  if (bin_maxima.empty()) {
    learned = learn_bin_maxima(profile);
    bin_maxima = learned;
  } else if (profile.hue_bins.size() != profile.values.size()) {
    throw Error(Errc::invalid_argument, "profile has no per-sample hue bins");
  }
  if (bin_maxima.size() != static_cast<std::size_t>(colorlab::kHueBins)) {
    throw Error(Errc::invalid_argument, "bin maxima table must have 360 entries");
  }
  std::vector<double> out(profile.values.size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int bin = profile.hue_bins[i];
    if (bin < 0 || bin >= colorlab::kHueBins) continue;
    const double m = bin_maxima[bin];
    if (m > 0.0) out[i] = profile.values[i] / m;
  }
  return scale_to_unit_max(std::move(out), 1);
}

std::vector<double> warm_start_maxima(const colorlab::ResponseCalibration& cal) {
  const auto s = cal.hue_sensitivity();
  return {s.begin(), s.end()};
}

std::vector<std::size_t> detect_peaks(std::span<const double> values) {
  std::vector<std::size_t> peaks;
  if (values.size() < 3) return peaks;
  std::vector<double> sorted(values.begin(), values.end());
  auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double median = *mid;
  for (std::size_t i = 1; i + 1 < values.size(); ++i) {
    if (values[i] > median && values[i] > values[i - 1] && values[i] >= values[i + 1]) {
      peaks.push_back(i);
    }
  }
  return peaks;
}

LuminanceProfile capture_luminance_profile(const optics::SampleStream& luminance,
                                           const optics::SampleStream* rgb,
                                           const colorlab::ResponseCalibration& cal,
                                           double dark_floor) {
  if (luminance.dims != 1) throw Error(Errc::invalid_argument, "luminance stream must be scalar");
  LuminanceProfile p;
  p.values = luminance.values;
  p.start_offset_s = luminance.t.empty() ? 0.0 : luminance.t.front();
  if (!rgb) return p;
  if (rgb->dims != 3 || rgb->size() != luminance.size()) {
    throw Error(Errc::invalid_argument, "RGB stream must be 3-channel and aligned with luminance");
  }

  // Rescale so the strongest observation sits at its channel's full-brightness response.
  double scale = 0.0;
  for (std::size_t i = 0; i < rgb->size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      scale = std::max(scale, rgb->value(i, c) / (cal.peak_response(c) * cal.global_peak()));
    }
  }
  p.hue_bins.assign(rgb->size(), -1);
  if (!(scale > 0.0)) return p;
  const double floor_abs = dark_floor * cal.global_peak();
  for (std::size_t i = 0; i < rgb->size(); ++i) {
    const colorlab::RgbResponse d{rgb->value(i, 0) / scale, rgb->value(i, 1) / scale,
                                  rgb->value(i, 2) / scale};
    try {
      p.hue_bins[i] = colorlab::identify_hue(d, cal, floor_abs);
    } catch (const Error& e) {
      if (e.code() != Errc::dark_sample) throw;
    }
  }
  return p;
}

ColorProfile capture_color_profile(const optics::SampleStream& rgb) {
  if (rgb.dims != 3) throw Error(Errc::invalid_argument, "color profile needs a 3-channel stream");
  ColorProfile p;
  p.values.resize(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i) p.values[i] = {rgb.value(i, 0), rgb.value(i, 1), rgb.value(i, 2)};
  p.start_offset_s = rgb.t.empty() ? 0.0 : rgb.t.front();
  return p;
}

Series normalize_color(const ColorProfile& profile, const colorlab::ResponseCalibration& cal) {
  if (profile.values.empty()) throw Error(Errc::empty_input, "empty color profile");
  double scale = 0.0;
  for (const auto& v : profile.values) {
    for (int c = 0; c < 3; ++c) scale = std::max(scale, v[c] / (cal.peak_response(c) * cal.global_peak()));
  }
  if (!(scale > 0.0)) throw Error(Errc::all_dark, "color profile has no light");
  std::vector<double> out;
  out.reserve(profile.values.size() * 3);
  for (const auto& v : profile.values) {
    const auto g = colorlab::correct_response({v[0] / scale, v[1] / scale, v[2] / scale}, cal);
    out.insert(out.end(), {g.gr, g.gg, g.gb});
  }
  return scale_to_unit_max(std::move(out), 3);
}

Template build_audio_template(const media::AudioTrack& track) {
  const auto env = visualizer::audio_envelope(track, visualizer::peak_hold);
  Template t;
  t.id = track.info.id;
  t.kind = MediaKind::audio;
  t.rate_hz = kAudioRateHz;
  t.info = track.info;
  t.series.dims = 1;
  t.series.values.reserve(env.size());
  for (double e : env) t.series.values.push_back(protocol::unit_from_u16(protocol::unit_to_u16(e)));
  const double top = t.series.max_value();
  if (top > 0.0) {
    for (double& v : t.series.values) v /= top;
  } else {
    t.usable = false;
  }
  return t;
}

Template build_video_template(const media::VideoColorTrack& track) {
  const auto colors = visualizer::per_second_colors(track);
  Template t;
  t.id = track.info.id;
  t.kind = MediaKind::video;
  t.rate_hz = kVideoRateHz;
  t.info = track.info;
  t.series.dims = 3;
  t.series.values.reserve(colors.size() * 3);
  for (const auto& c : colors) t.series.values.insert(t.series.values.end(), {c.r, c.g, c.b});
  const double top = t.series.max_value();
  if (top > 0.0) {
    for (double& v : t.series.values) v /= top;
  } else {
    t.usable = false;
  }
  return t;
}

}  // namespace lightleak::inference
