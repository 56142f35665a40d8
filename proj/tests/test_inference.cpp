#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "lightleak/colorlab.hpp"
#include "lightleak/corpus.hpp"
#include "lightleak/error.hpp"
#include "lightleak/inference.hpp"
#include "lightleak/optics.hpp"
#include "lightleak/visualizer.hpp"
#include "oracles.hpp"

using namespace lightleak;
using namespace lightleak::inference;
namespace fs = std::filesystem;

namespace {

const auto& cal() { return colorlab::ResponseCalibration::lifx_a19(); }

std::vector<double> random_seq(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

std::vector<oracle::Vec3> random_seq3(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<oracle::Vec3> v(n);
  for (auto& x : v) x = {u(rng), u(rng), u(rng)};
  return v;
}

template <class E>
Errc code_of(E&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::invalid_argument;
}

media::AudioTrack song(std::uint64_t seed, double seconds, const char* genre = "rock") {
  corpus::SongSpec spec;
  spec.seed = seed;
  spec.genre = genre;
  spec.duration_s = seconds;
  auto t = corpus::synth_song(spec);
  t.info.id = "song" + std::to_string(seed);
  t.info.genre = genre;
  return t;
}

Template audio_template(std::uint64_t seed, double seconds, const char* genre = "rock") {
  return build_audio_template(song(seed, seconds, genre));
}

// Sliding-window search done the slow way: every window, renormalized,
// scored with a full DTW.
double sliding_oracle(const Series& q, const Template& t, const MatchOptions& opt) {
  const std::size_t n = q.length(), m = t.series.length();
  const long band = static_cast<long>(std::ceil(opt.band_fraction * static_cast<double>(n)));
  if (m <= n) return dtw_series(q, t.series, {band});
  const auto stride = static_cast<std::size_t>(std::max(1.0, std::round(opt.stride_s * t.rate_hz)));
  std::vector<std::size_t> offsets;
  for (std::size_t o = 0; o + n <= m; o += stride) offsets.push_back(o);
  if (offsets.back() != m - n) offsets.push_back(m - n);
  double best = kInf;
  for (auto o : offsets) {
    Series w = t.series.slice(o, n);
    const double top = w.max_value();
    if (!(top > 0)) continue;
    for (double& v : w.values) v *= 1.0 / top;
    best = std::min(best, dtw_series(q, w, {band}));
  }
  return best;
}

}  // namespace

TEST_CASE("static normalization") {
  LuminanceProfile p;
  p.values = {2, 4, 8};
  CHECK(normalize_static(p).values == std::vector<double>{0.25, 0.5, 1.0});
  LuminanceProfile scaled;
  scaled.values = {2 * 3.7, 4 * 3.7, 8 * 3.7};
  const auto a = normalize_static(p).values, b = normalize_static(scaled).values;
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15));
  LuminanceProfile dark;
  dark.values = {0, 0, 0};
  CHECK(code_of([&] { normalize_static(dark); }) == Errc::all_dark);
}

TEST_CASE("random-hue normalization divides by per-bin maxima") {
  LuminanceProfile p;
  p.values = {10, 5, 5, 2.5};
  p.hue_bins = {10, 20, 10, 20};
  const auto out = normalize_random(p).values;
  const std::vector<double> want = {1, 1, 0.5, 0.5};
  REQUIRE(out.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(want[i]));

  LuminanceProfile single;
  single.values = {3, 1, 6, 2};
  single.hue_bins = {7, 7, 7, 7};
  const auto a = normalize_random(single).values;
  const auto b = normalize_static(single).values;
  for (int i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(b[i]));
  for (double v : a) CHECK(v <= 1.0);
}

TEST_CASE("random-hue profiles do not depend on the hue seed") {
  const auto track = song(3, 40, "dance");
  optics::ChannelConfig cfg;
  std::vector<std::vector<double>> profiles;
  for (std::uint64_t seed : {1u, 2u}) {
    const auto s = visualizer::audio_visualize(track, visualizer::RandomHue{500, seed});
    const auto lum = optics::observe(s.timeline, optics::Sensor::luminance(), cfg, cal());
    const auto rgb = optics::observe(s.timeline, optics::Sensor::rgb_audio(), cfg, cal());
    const auto prof = capture_luminance_profile(lum, &rgb, cal());
    profiles.push_back(normalize_random(prof, warm_start_maxima(cal())).values);
  }
  REQUIRE(profiles[0].size() == profiles[1].size());
  for (std::size_t i = 0; i < profiles[0].size(); ++i) CHECK(std::fabs(profiles[0][i] - profiles[1][i]) < 1e-6);
}

TEST_CASE("peak detection keeps local maxima above the median") {
  const std::vector<double> v = {0, 3, 1, 1, 1, 5, 2, 1, 0.5, 1.5, 1};
  const auto peaks = detect_peaks(v);
  CHECK(peaks == std::vector<std::size_t>{1, 5, 9});
}

TEST_CASE("audio templates") {
  media::AudioTrack silence;
  silence.sample_rate = 1000;
  silence.samples.assign(5000, 0.0f);
  CHECK_FALSE(build_audio_template(silence).usable);

  media::AudioTrack square;
  square.sample_rate = 1000;
  for (int i = 0; i < 5000; ++i) square.samples.push_back((i / 5) % 2 ? 1.0f : -1.0f);
  const auto sq = build_audio_template(square);
  CHECK(sq.usable);
  for (double v : sq.series.values) CHECK(v == 1.0);

  const auto track = song(12, 45, "country");
  const auto tpl = build_audio_template(track);
  const auto s = visualizer::audio_visualize(track, visualizer::StaticHue{90});
  const auto lum = optics::observe(s.timeline, optics::Sensor::luminance(), optics::ChannelConfig{}, cal());
  const auto obs = normalize_static(capture_luminance_profile(lum, nullptr, cal()));
  REQUIRE(obs.values.size() == tpl.series.values.size());
  for (std::size_t i = 0; i < obs.values.size(); ++i) CHECK(std::fabs(obs.values[i] - tpl.series.values[i]) < 1e-6);
}

TEST_CASE("video templates") {
  media::VideoColorTrack red;
  red.frame_rate = 2;
  red.frames.assign(20, {0.6, 0, 0});
  const auto t = build_video_template(red);
  REQUIRE(t.series.length() == 10);
  for (std::size_t i = 0; i < t.series.length(); ++i) {
    CHECK(t.series.values[3 * i] == doctest::Approx(1));
    CHECK(t.series.values[3 * i + 1] == 0);
    CHECK(t.series.values[3 * i + 2] == 0);
  }
  media::VideoColorTrack black;
  black.frame_rate = 1;
  black.frames.assign(5, {0, 0, 0});
  CHECK_FALSE(build_video_template(black).usable);

  corpus::VideoSpec spec;
  spec.seed = 4;
  spec.duration_s = 120;
  const auto video = corpus::synth_video(spec);
  const auto tpl = build_video_template(video);
  const auto s = visualizer::video_visualize(video);
  const auto rgb = optics::observe(s.timeline, optics::Sensor::rgb_video(), optics::ChannelConfig{}, cal());
  const auto obs = normalize_color(capture_color_profile(rgb), cal());
  REQUIRE(obs.values.size() == tpl.series.values.size());
  for (std::size_t i = 0; i < obs.values.size(); ++i) CHECK(std::fabs(obs.values[i] - tpl.series.values[i]) < 0.05);
}

TEST_CASE("dtw examples") {
  CHECK(dtw(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 0);
  CHECK(dtw(std::vector<double>{0}, std::vector<double>{1}) == 1);
  CHECK(dtw(std::vector<double>{1, 2, 3}, std::vector<double>{1, 1, 2, 2, 3, 3}) == 0);
  CHECK(code_of([] { dtw(std::vector<double>{}, std::vector<double>{1}); }) == Errc::empty_input);
}

TEST_CASE("dtw equals the exhaustive path oracle") {
  std::mt19937_64 rng(101);
  for (int k = 0; k < 300; ++k) {
    const auto a = random_seq(rng, 1 + rng() % 8);
    const auto b = random_seq(rng, 1 + rng() % 8);
    const double got = dtw(a, b);
    CHECK(got == oracle::dtw_exhaustive(a, b));
    CHECK(got == dtw(b, a));
    CHECK(got >= 0);
    CHECK(dtw(a, a) == 0);
    if (a.size() == b.size()) CHECK(got <= oracle::lockstep(a, b));
    CHECK(dtw(a, b, {.band = 1}) >= got);
  }
}

TEST_CASE("dtw cutoff abandons only hopeless alignments") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 200; ++k) {
    const auto a = random_seq(rng, 20), b = random_seq(rng, 25);
    const double full = dtw(a, b);
    const double cut = full * (0.5 + (k % 10) / 10.0);
    const double got = dtw(a, b, {.cutoff = cut});
    if (full <= cut) {
      CHECK(got == full);
    } else {
      CHECK(got == kInf);
    }
  }
}

TEST_CASE("osb examples and oracle") {
  CHECK(osb(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}, 5.0) == 0);
  CHECK(osb(std::vector<double>{1, 9, 2}, std::vector<double>{1, 2}, 0.5) == doctest::Approx(0.5));
  std::mt19937_64 rng(202);
  for (int k = 0; k < 300; ++k) {
    const auto q = random_seq(rng, 1 + rng() % 8);
    const auto t = random_seq(rng, 1 + rng() % 8);
    const double pen = std::uniform_real_distribution<double>(0, 0.5)(rng);
    CHECK(osb(q, t, pen) == oracle::osb_exhaustive(q, t, pen));
  }
}

TEST_CASE("osb with a prohibitive penalty on equal lengths is lockstep") {
  std::mt19937_64 rng(303);
  for (int k = 0; k < 300; ++k) {
    const std::size_t n = 1 + rng() % 10;
    const auto a = random_seq(rng, n), b = random_seq(rng, n);
    const double got = osb(a, b, 1e12);
    CHECK(got == doctest::Approx(oracle::lockstep(a, b)).epsilon(1e-12));
    CHECK(got >= dtw(a, b));
  }
}

TEST_CASE("mdtw examples and oracle") {
  using V = std::vector<std::array<double, 3>>;
  CHECK(mdtw(V{{0, 0, 0}}, V{{1, 1, 1}}) == 3.0);
  std::mt19937_64 rng(404);
  for (int k = 0; k < 200; ++k) {
    const auto a = random_seq3(rng, 1 + rng() % 7);
    const auto b = random_seq3(rng, 1 + rng() % 7);
    CHECK(mdtw(a, b) == oracle::dtw_exhaustive(a, b));
    CHECK(mdtw(a, a) == 0);
  }
  for (int k = 0; k < 100; ++k) {
    const auto a = random_seq(rng, 1 + rng() % 12), b = random_seq(rng, 1 + rng() % 12);
    V a3, b3;
    for (double x : a) a3.push_back({x, 0, 0});
    for (double x : b) b3.push_back({x, 0, 0});
    CHECK(mdtw(a3, b3) == dtw(a, b));
  }
}

TEST_CASE("sliding search equals the brute-force window scan") {
  ReferenceLibrary lib;
  std::vector<Template> tpls;
  for (std::uint64_t s = 1; s <= 6; ++s) {
    auto t = audio_template(s, 50, s % 2 ? "jazz" : "rock");
    tpls.push_back(t);
    lib.add(t);
  }
  MatchOptions opt;
  for (std::size_t truth = 0; truth < 3; ++truth) {
    Series q = tpls[truth].series.slice(40 + 20 * truth, 150);
    std::mt19937_64 rng(truth);
    std::normal_distribution<double> noise(0, 0.02);
    for (double& v : q.values) v = std::max(0.0, v + noise(rng));
    const double top = q.max_value();
    for (double& v : q.values) v /= top;
    const auto result = match_profile(q, lib, MediaKind::audio, opt, tpls[truth].id);
    REQUIRE(result.ranked.size() == tpls.size());
    for (const auto& e : result.ranked) {
      const Template* t = lib.find(e.id);
      REQUIRE(t != nullptr);
      CHECK(e.distance == sliding_oracle(q, *t, opt));
    }
    CHECK(result.rank_of_truth.value() == 1);
  }
}

TEST_CASE("match ranking properties") {
  ReferenceLibrary one;
  one.add(audio_template(1, 30));
  Series q{1, std::vector<double>(100, 0.5)};
  CHECK(match_profile(q, one, MediaKind::audio, {}, one.ids()[0]).rank_of_truth.value() == 1);

  ReferenceLibrary lib;
  for (std::uint64_t s = 1; s <= 5; ++s) lib.add(audio_template(s, 30));
  const Template* t = lib.find(lib.ids()[2]);
  const auto full = match_profile(t->series, lib, MediaKind::audio, {}, t->id);
  CHECK(full.ranked.front().id == t->id);
  CHECK(full.ranked.front().distance == 0);
  for (std::size_t i = 1; i < full.ranked.size(); ++i) CHECK(full.ranked[i - 1].distance <= full.ranked[i].distance);

  // a raw profile at any gain normalizes to the same ranking
  Series q1 = t->series.slice(20, 120);
  for (double& v : q1.values) v = 0.2 + 0.5 * v;
  LuminanceProfile p1, p2;
  p1.values = q1.values;
  for (double v : q1.values) p2.values.push_back(v * 37.5);
  const auto r1 = match_profile(normalize_static(p1), lib, MediaKind::audio, {});
  const auto r2 = match_profile(normalize_static(p2), lib, MediaKind::audio, {});
  REQUIRE(r1.ranked.size() == r2.ranked.size());
  for (std::size_t i = 0; i < r1.ranked.size(); ++i) CHECK(r1.ranked[i].id == r2.ranked[i].id);

  MatchOptions osb_opt;
  osb_opt.matcher = Matcher::osb;
  CHECK(match_profile(q1, lib, MediaKind::audio, osb_opt).ranked.size() == 5);
  MatchOptions whole;
  whole.alignment = Alignment::whole;
  CHECK(match_profile(q1, lib, MediaKind::audio, whole).ranked.size() == 5);
}

TEST_CASE("ties are broken by id") {
  ReferenceLibrary lib;
  for (const char* id : {"b", "a", "c"}) {
    Template t;
    t.id = id;
    t.series = {1, std::vector<double>(50, 1.0)};
    lib.add(t);
  }
  const auto r = match_profile(Series{1, std::vector<double>(20, 1.0)}, lib, MediaKind::audio, {});
  CHECK(r.ranked[0].id == "a");
  CHECK(r.ranked[1].id == "b");
  CHECK(r.ranked[2].id == "c");
}

TEST_CASE("match errors") {
  ReferenceLibrary empty;
  Series q{1, {0.5, 1.0}};
  CHECK(code_of([&] { match_profile(q, empty, MediaKind::audio, {}); }) == Errc::empty_library);
  ReferenceLibrary lib;
  lib.add(audio_template(1, 20));
  MatchOptions multi;
  multi.matcher = Matcher::mdtw;
  CHECK(code_of([&] { match_profile(q, lib, MediaKind::video, multi); }) == Errc::kind_mismatch);
  CHECK(code_of([&] { match_profile(Series{3, {1, 1, 1}}, lib, MediaKind::audio, {}); }) == Errc::kind_mismatch);
  Template dup = audio_template(1, 20);
  CHECK_THROWS_AS(lib.add(dup), Error);
}

TEST_CASE("genre confusion") {
  ReferenceLibrary lib;
  auto add = [&](const char* id, const char* genre) {
    Template t;
    t.id = id;
    t.info.genre = genre;
    t.series = {1, {1.0}};
    lib.add(t);
  };
  add("d1", "dance");
  add("d2", "dance");
  add("r1", "rock");
  add("x", "");
  auto result = [](const char* truth, const char* top) {
    MatchResult r;
    r.truth_id = truth;
    r.ranked.push_back({top, 0});
    return r;
  };
  std::vector<MatchResult> ok = {result("d1", "d1"), result("r1", "r1")};
  auto m = genre_confusion(ok, lib);
  CHECK(m[1][1] == 1);
  CHECK(m[3][3] == 1);
  std::vector<MatchResult> near = {result("d1", "d2")};
  CHECK(genre_confusion(near, lib)[1][1] == 1);
  std::vector<MatchResult> none;
  for (const auto& row : genre_confusion(none, lib)) {
    for (int v : row) CHECK(v == 0);
  }
  std::vector<MatchResult> missing = {result("x", "d1")};
  CHECK(code_of([&] { genre_confusion(missing, lib); }) == Errc::missing_genre);
}

TEST_CASE("hue coverage") {
  const auto zero = hue_coverage(0, 360);
  CHECK(zero.p_single == 0);
  CHECK(zero.p_all == 0);
  const auto c = hue_coverage(5000, 360);
  CHECK(c.p_single > 0.99999);
  CHECK(std::fabs(c.p_all - 0.99967) < 1e-4);
  double last_single = 0, last_all = 0;
  for (std::uint64_t k : {0u, 100u, 360u, 1000u, 2000u, 3000u, 5000u}) {
    const auto v = hue_coverage(k, 360);
    CHECK(v.p_all <= v.p_single);
    CHECK(v.p_single >= last_single);
    CHECK(v.p_all >= last_all);
    CHECK(v.p_single == doctest::Approx(1 - std::pow(1 - 1.0 / 360, double(k))).epsilon(1e-12));
    CHECK(std::fabs(v.p_all - oracle::occupancy_all(k, 360)) < 1e-9);
    last_single = v.p_single;
    last_all = v.p_all;
  }
  CHECK(std::fabs(hue_coverage(12, 5).p_all - oracle::occupancy_all(12, 5)) < 1e-12);
}

TEST_CASE("coverage time estimate") {
  const auto e = coverage_time_estimate(20, 0.99967);
  CHECK(std::fabs(e.minutes - 250) <= 5);
  CHECK(e.peaks >= 4900);
  CHECK(e.peaks <= 5100);
  CHECK(coverage_time_estimate(40, 0.99967).minutes == doctest::Approx(e.minutes / 2));
  CHECK(coverage_time_estimate(1, 0.5, 1).peaks == 1);
  CHECK(hue_coverage(e.peaks, 360).p_all >= 0.99967);
  CHECK(hue_coverage(e.peaks - 1, 360).p_all < 0.99967);
}

TEST_CASE("library persistence") {
  const fs::path dir = fs::temp_directory_path() / "lightleak_lib_test";
  fs::remove_all(dir);
  ReferenceLibrary lib;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    auto t = audio_template(s, 20);
    t.info.title = "Song " + std::to_string(s);
    t.info.genre = "jazz";
    lib.add(t);
  }
  corpus::VideoSpec vs;
  vs.seed = 1;
  vs.duration_s = 30;
  auto v = build_video_template(corpus::synth_video(vs));
  v.id = "video-a";
  lib.add(v);
  lib.save(dir);
  lib.save(dir);
  const auto back = ReferenceLibrary::load(dir);
  CHECK(back.ids() == lib.ids());
  for (const auto& id : lib.ids()) {
    const auto* a = lib.find(id);
    const auto* b = back.find(id);
    CHECK(a->series.values == b->series.values);
    CHECK(a->kind == b->kind);
    CHECK(a->info.title == b->info.title);
    CHECK(a->info.genre == b->info.genre);
  }
  const std::vector<std::string> keep = {"video-a"};
  CHECK(lib.subset(keep).size() == 1);
  fs::remove_all(dir);
}
