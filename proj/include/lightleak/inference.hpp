#pragma once

// Adversary-side analytics: profile capture and normalization, templates and
// the reference library, elastic matching (DTW, OSB, multi-channel DTW),
// ranking, genre confusion and the random-hue coverage probabilities.

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lightleak/colorlab.hpp"
#include "lightleak/media.hpp"
#include "lightleak/optics.hpp"

namespace lightleak::inference {

enum class MediaKind : std::uint8_t { audio = 0, video = 1 };

const char* to_string(MediaKind kind);
MediaKind media_kind_from_string(const std::string& s);

inline constexpr double kAudioRateHz = 10.0;
inline constexpr double kVideoRateHz = 1.0;

// Equally sampled sequence of scalars (dims 1) or RGB triples (dims 3).
struct Series {
  int dims = 1;
  std::vector<double> values;

  std::size_t length() const { return dims > 0 ? values.size() / dims : 0; }
  double max_value() const;
  Series slice(std::size_t first, std::size_t count) const;
};

struct LuminanceProfile {
  std::vector<double> values;
  std::vector<int> hue_bins;  // empty in static mode; -1 marks a dark sample
  double start_offset_s = 0;
};

struct ColorProfile {
  std::vector<std::array<double, 3>> values;
  double start_offset_s = 0;
};

struct Template {
  std::string id;
  MediaKind kind = MediaKind::audio;
  double rate_hz = kAudioRateHz;
  Series series;
  media::MediaInfo info;
  bool usable = true;  // false for silent / black media
};

// values / max. Throws Errc::all_dark when the maximum is zero.
Series normalize_static(const LuminanceProfile& profile);

// Per-hue normalization. With empty `bin_maxima` the maxima are learned from
// the profile itself; otherwise the table (indexed by hue bin, any scale) is
// used. The result is finally scaled to a maximum of 1.
Series normalize_random(const LuminanceProfile& profile, std::span<const double> bin_maxima = {});

// Per-bin maximum luminance seen in a profile (0 where a bin never appears).
// With peaks_only, only local maxima above the median count.
std::vector<double> learn_bin_maxima(const LuminanceProfile& profile, bool peaks_only = false);

// Relative per-hue maxima implied by a calibration (usable as a warm start).
std::vector<double> warm_start_maxima(const colorlab::ResponseCalibration& cal);

// Local maxima strictly above the median of the sequence.
std::vector<std::size_t> detect_peaks(std::span<const double> values);

// Builds a luminance profile from a luminance stream and, in random-hue mode,
// a simultaneous RGB stream used to identify the hue of each sample. The RGB
// stream is rescaled by its highest observable response first.
LuminanceProfile capture_luminance_profile(const optics::SampleStream& luminance,
                                           const optics::SampleStream* rgb,
                                           const colorlab::ResponseCalibration& cal,
                                           double dark_floor = 1e-6);

ColorProfile capture_color_profile(const optics::SampleStream& rgb);

// Highest-observable normalization, per-channel correction, then scaling so
// the largest component is 1. Throws Errc::all_dark.
Series normalize_color(const ColorProfile& profile, const colorlab::ResponseCalibration& cal);

// |amplitude| envelope at 10 Hz (same peak-hold and 16-bit quantization the
// visualizer uses), normalized to max 1.
Template build_audio_template(const media::AudioTrack& track);

// Per-second average color, normalized by the largest component.
Template build_video_template(const media::VideoColorTrack& track);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct DtwOptions {
  long band = -1;        // Sakoe-Chiba half-width in samples; < 0 disables
  double cutoff = kInf;  // distances above this come back as infinity
};

// Squared-difference DTW over scalar sequences. Throws Errc::empty_input.
double dtw(std::span<const double> a, std::span<const double> b, const DtwOptions& opts = {});

// DTW with squared Euclidean pointwise cost over 3-vectors.
double mdtw(std::span<const std::array<double, 3>> a, std::span<const std::array<double, 3>> b,
            const DtwOptions& opts = {});

// DTW over Series of equal dims.
double dtw_series(const Series& a, const Series& b, const DtwOptions& opts = {});

// Optimal subsequence bijection: each query element is either matched to a
// distinct later target element (squared-difference cost) or skipped at
// skip_penalty; unmatched target elements are free.
double osb(std::span<const double> query, std::span<const double> target, double skip_penalty,
           long band = -1);
double osb_series(const Series& query, const Series& target, double skip_penalty, long band = -1);

class ReferenceLibrary {
 public:
  void add(Template t);  // throws Errc::invalid_argument on a duplicate id
  const Template* find(const std::string& id) const;
  std::size_t size() const { return templates_.size(); }
  bool empty() const { return templates_.empty(); }
  std::vector<const Template*> templates() const;  // ascending id
  std::vector<std::string> ids() const;
  ReferenceLibrary subset(std::span<const std::string> ids) const;

  // manifest.json + templates/<id>.tpl
  void save(const std::filesystem::path& dir) const;
  static ReferenceLibrary load(const std::filesystem::path& dir);

 private:
  std::map<std::string, Template> templates_;
};

void write_template(const Template& t, const std::filesystem::path& path);
Template read_template(const std::filesystem::path& path);

enum class Matcher { dtw, osb, mdtw };
enum class Alignment { sliding, whole };

const char* to_string(Matcher m);
Matcher matcher_from_string(const std::string& s);

struct MatchOptions {
  Matcher matcher = Matcher::dtw;
  Alignment alignment = Alignment::sliding;
  double band_fraction = 0.1;  // of query length; <= 0 disables the band
  double stride_s = 1.0;
  std::optional<double> osb_penalty;  // default: mean squared template amplitude
  bool renormalize_windows = true;    // scale each template window to max 1
};

struct MatchEntry {
  std::string id;
  double distance = 0;
};

struct MatchResult {
  std::vector<MatchEntry> ranked;  // ascending distance, ties by id
  std::optional<std::string> truth_id;
  std::optional<std::size_t> rank_of_truth;  // 1-based
};

// Scores the query against every template of `kind`. Throws
// Errc::empty_library and Errc::kind_mismatch.
MatchResult match_profile(const Series& query, const ReferenceLibrary& library, MediaKind kind,
                          const MatchOptions& options,
                          const std::optional<std::string>& truth_id = std::nullopt);

void write_match_csv(const MatchResult& result, const std::filesystem::path& path);

inline constexpr std::array<const char*, 4> kGenres = {"country", "dance", "jazz", "rock"};
using GenreMatrix = std::array<std::array<int, 4>, 4>;

int genre_index(const std::string& genre);  // -1 when not one of kGenres

// Rows: true genre, columns: genre of the rank-1 prediction. Throws
// Errc::missing_genre when a truth or prediction lacks a known genre.
GenreMatrix genre_confusion(std::span<const MatchResult> results, const ReferenceLibrary& library);

struct Coverage {
  double p_single = 0;  // a given bin appears within k draws
  double p_all = 0;     // every bin appears within k draws
};

Coverage hue_coverage(std::uint64_t k, int n = colorlab::kHueBins);

struct CoverageEstimate {
  std::uint64_t peaks = 0;
  double minutes = 0;
};

CoverageEstimate coverage_time_estimate(double peaks_per_minute, double target_p_all,
                                        int n = colorlab::kHueBins);

}  // namespace lightleak::inference
