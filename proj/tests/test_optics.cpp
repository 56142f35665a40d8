#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "lightleak/colorlab.hpp"
#include "lightleak/corpus.hpp"
#include "lightleak/emission.hpp"
#include "lightleak/error.hpp"
#include "lightleak/inference.hpp"
#include "lightleak/optics.hpp"
#include "lightleak/visualizer.hpp"

using namespace lightleak;
using namespace lightleak::optics;
namespace fs = std::filesystem;

namespace {

const auto& cal() { return colorlab::ResponseCalibration::lifx_a19(); }

Timeline constant_color(colorlab::HsbColor c, double seconds) {
  Timeline t;
  t.events.push_back({0.0, c});
  t.end_time = seconds;
  return t;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("constant full-brightness emission, noiseless") {
  ChannelConfig cfg;
  cfg.distance_m = 2.0;
  cfg.gain = 3.0;
  const auto s = observe(constant_color({0, 0, 1}, 5), Sensor::luminance(), cfg, cal());
  REQUIRE(s.size() == 50);
  for (double v : s.values) CHECK(v == doctest::Approx(3.0 / 4.0));
  for (std::size_t k = 1; k < s.size(); ++k) CHECK(s.t[k] > s.t[k - 1]);
}

TEST_CASE("transmittance scales samples multiplicatively") {
  ChannelConfig lo, hi;
  lo.visible_transmittance = 0.4;
  hi.visible_transmittance = 0.8;
  const auto tl = constant_color({120, 1, 0.7}, 3);
  const auto a = observe(tl, Sensor::rgb_audio(), lo, cal());
  const auto b = observe(tl, Sensor::rgb_audio(), hi, cal());
  CHECK(mean(a.values) / mean(b.values) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("luminance trace follows the amplitude template") {
  corpus::SongSpec spec;
  spec.seed = 5;
  spec.genre = "rock";
  spec.duration_s = 60;
  const auto track = corpus::synth_song(spec);
  const auto stream = visualizer::audio_visualize(track, visualizer::StaticHue{40});
  const auto obs = observe(stream.timeline, Sensor::luminance(), ChannelConfig{}, cal());
  const auto tpl = inference::build_audio_template(track);
  const std::size_t n = std::min(obs.values.size(), tpl.series.values.size());
  REQUIRE(n >= 590);
  std::vector<double> a(obs.values.begin(), obs.values.begin() + n);
  std::vector<double> b(tpl.series.values.begin(), tpl.series.values.begin() + n);
  CHECK(pearson(a, b) > 0.95);
}

TEST_CASE("effective snr follows the inverse-square law") {
  ChannelConfig cfg;
  cfg.noise_sigma = 0.01;
  cfg.distance_m = 5;
  const double near = effective_snr(cfg, 1.0);
  cfg.distance_m = 10;
  CHECK(near / effective_snr(cfg, 1.0) == doctest::Approx(4.0));
  cfg.distance_m = 5;
  cfg.visible_transmittance = 0.4;
  CHECK(near / effective_snr(cfg, 1.0) == doctest::Approx(2.5));
  cfg.noise_sigma = 0;
  CHECK(effective_snr(cfg, 1.0) == std::numeric_limits<double>::infinity());
}

TEST_CASE("gain cancels after normalization") {
  corpus::SongSpec spec;
  spec.seed = 8;
  spec.genre = "jazz";
  spec.duration_s = 30;
  const auto stream = visualizer::audio_visualize(corpus::synth_song(spec), visualizer::StaticHue{10});
  ChannelConfig g1, g2;
  g1.gain = 0.7;
  g2.gain = 1.4;
  const auto a = inference::normalize_static(
      inference::capture_luminance_profile(observe(stream.timeline, Sensor::luminance(), g1, cal()), nullptr, cal()));
  const auto b = inference::normalize_static(
      inference::capture_luminance_profile(observe(stream.timeline, Sensor::luminance(), g2, cal()), nullptr, cal()));
  REQUIRE(a.values.size() == b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::fabs(a.values[i] - b.values[i]) < 1e-9);
}

TEST_CASE("noise degrades the profile monotonically") {
  corpus::SongSpec spec;
  spec.seed = 2;
  spec.genre = "dance";
  spec.duration_s = 30;
  const auto stream = visualizer::audio_visualize(corpus::synth_song(spec), visualizer::StaticHue{10});
  ChannelConfig clean;
  clean.seed = 77;
  const auto ref = observe(stream.timeline, Sensor::luminance(), clean, cal()).values;
  double last = -1;
  for (double sigma : {0.0, 0.01, 0.02, 0.05, 0.1, 0.2}) {
    ChannelConfig cfg = clean;
    cfg.noise_sigma = sigma;
    const auto v = observe(stream.timeline, Sensor::luminance(), cfg, cal()).values;
    double mad = 0;
    for (std::size_t i = 0; i < v.size(); ++i) mad += std::fabs(v[i] - ref[i]);
    mad /= v.size();
    CHECK(mad >= last);
    last = mad;
    for (double x : v) CHECK(x >= 0);
  }
}

TEST_CASE("noiseless observation is a pure function") {
  const auto tl = constant_color({200, 0.5, 0.5}, 4);
  ChannelConfig a, b;
  a.seed = 1;
  b.seed = 2;
  CHECK(observe(tl, Sensor::rgb_video(), a, cal()).values == observe(tl, Sensor::rgb_video(), b, cal()).values);
}

TEST_CASE("dropped updates freeze the previous state") {
  Timeline tl;
  for (int k = 0; k < 100; ++k) tl.events.push_back({k * 0.1, colorlab::HsbColor{0, 0, (k % 10 + 1) / 10.0}});
  tl.end_time = 10;
  ChannelConfig cfg;
  cfg.packet_loss_prob = 0.5;
  cfg.seed = 3;
  const auto lossy = observe(tl, Sensor::luminance(), cfg, cal());
  const auto clean = observe(tl, Sensor::luminance(), ChannelConfig{}, cal());
  std::set<double> levels(clean.values.begin(), clean.values.end());
  int differ = 0;
  for (std::size_t i = 0; i < lossy.size(); ++i) {
    CHECK(levels.count(lossy.values[i]) == 1);
    CHECK(lossy.values[i] > 0);
    differ += lossy.values[i] != clean.values[i];
  }
  CHECK(differ > 10);
}

TEST_CASE("jittered timestamps stay ordered and near the grid") {
  ChannelConfig cfg;
  cfg.sample_jitter_ms = 30;
  cfg.seed = 4;
  const auto s = observe(constant_color({0, 1, 1}, 10), Sensor::luminance(), cfg, cal());
  REQUIRE(s.size() == 100);
  for (std::size_t k = 0; k < s.size(); ++k) {
    CHECK(std::fabs(s.t[k] - (k + 0.5) * 0.1) <= 0.030 + 1e-12);
    if (k > 0) CHECK(s.t[k] > s.t[k - 1]);
  }
}

TEST_CASE("infrared output slews between levels") {
  Timeline tl;
  tl.events.push_back({0.0, InfraredLevel{0.0}});
  tl.events.push_back({1.0, InfraredLevel{1.0}});
  tl.events.push_back({2.0, InfraredLevel{0.0}});
  tl.end_time = 3;
  tl.infrared_slew = SlewRates{};
  const auto s = observe(tl, Sensor::infrared(), ChannelConfig{}, cal());
  REQUIRE(s.size() == 6000);
  auto at = [&](double t) { return s.values[static_cast<std::size_t>(t * 2000)]; };
  CHECK(at(0.9) == 0);
  CHECK(at(1.0 + 0.2) == doctest::Approx(0.2 / 0.45).epsilon(1e-2));
  CHECK(at(1.46) == doctest::Approx(1.0));
  CHECK(at(2.1) == doctest::Approx(0.5).epsilon(2e-2));
  CHECK(at(2.25) == 0);
}

TEST_CASE("invalid channel and empty timeline are rejected") {
  ChannelConfig bad;
  bad.visible_transmittance = 0;
  CHECK_THROWS_AS(observe(constant_color({0, 1, 1}, 1), Sensor::luminance(), bad, cal()), Error);
  try {
    observe(Timeline{}, Sensor::luminance(), ChannelConfig{}, cal());
    FAIL("expected EmptyTimeline");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_input);
  }
}

TEST_CASE("sample stream csv roundtrip") {
  ChannelConfig cfg;
  cfg.noise_sigma = 0.01;
  const auto s = observe(constant_color({300, 1, 1}, 5), Sensor::rgb_video(), cfg, cal());
  const fs::path p = fs::temp_directory_path() / "lightleak_stream.csv";
  write_stream_csv(s, p);
  const auto back = read_stream_csv(p);
  CHECK(back.dims == 3);
  REQUIRE(back.size() == s.size());
  for (std::size_t i = 0; i < s.values.size(); ++i) CHECK(back.values[i] == doctest::Approx(s.values[i]).epsilon(1e-9));
  fs::remove(p);
}
