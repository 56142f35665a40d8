#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "lightleak/corpus.hpp"
#include "lightleak/error.hpp"
#include "lightleak/experiment.hpp"

using namespace lightleak;
using namespace lightleak::experiment;
namespace fs = std::filesystem;

namespace {

template <typename F>
Errc code_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::invalid_argument;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Small corpus and libraries shared by the tests in this file.
struct Fixture {
  fs::path root = fs::temp_directory_path() / "lightleak_experiment_test";

  Fixture() {
    fs::remove_all(root);
    corpus::CorpusSpec spec;
    spec.seed = 4;
    spec.songs = 6;
    spec.videos = 4;
    spec.song_duration_s = 60;
    spec.video_duration_s = 120;
    corpus::generate(spec, root / "corpus");
    build_library(root / "corpus" / "audio", inference::MediaKind::audio, root / "lib_audio");
    build_library(root / "corpus" / "video", inference::MediaKind::video, root / "lib_video");
  }
  ~Fixture() { fs::remove_all(root); }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

ExperimentConfig audio_config(const fs::path& out) {
  const auto& f = fixture();
  return ExperimentConfig::from_json(R"({"scenario":"audio_attack","seed":3,"corpus":"corpus/audio",
    "library":"lib_audio","windows_s":[20,40],"hue_modes":["static","random"],"matchers":["dtw","osb"],
    "test_items":4,"vt_sweep":[0.5],"channel":{"noise_sigma":0.01},"output_dir":")" +
                                         out.string() + "\"}",
                                     f.root);
}

ExperimentConfig exfil_config(const fs::path& out) {
  const auto& f = fixture();
  return ExperimentConfig::from_json(R"({"scenario":"exfil","seed":5,"payloads":["corpus/payloads/harvard/list01.txt"],
    "levels":[4,256],"distances_m":[1,5],"channel":{"noise_sigma":0.0002},"output_dir":")" +
                                         out.string() + "\"}",
                                     f.root);
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = ExperimentConfig::from_json(
      R"({"scenario":"video_attack","corpus":"c","library":"l","windows_s":[60],"matchers":["mdtw"]})", "/base");
  CHECK(c.scenario == Scenario::video_attack);
  CHECK(c.corpus == fs::path("/base/c"));
  CHECK(c.seed == 1);
  c.validate();
  const auto again = ExperimentConfig::from_json(c.to_json(), "/elsewhere");
  CHECK(again.corpus == c.corpus);
  CHECK(again.windows_s == c.windows_s);
}

TEST_CASE("config errors") {
  CHECK(code_of([] { ExperimentConfig::from_json("{not json"); }) == Errc::config_invalid);
  CHECK(code_of([] { ExperimentConfig::from_json(R"({"scenario":"exfil","bogus":1})"); }) == Errc::config_invalid);
  CHECK(code_of([] { ExperimentConfig::from_json(R"({"seed":1})"); }) == Errc::config_invalid);
  CHECK(code_of([] { ExperimentConfig::from_json(R"({"scenario":"teleport"})"); }) == Errc::config_invalid);
  CHECK(code_of([] {
          ExperimentConfig::from_json(R"({"scenario":"audio_attack","corpus":"c","library":"l",
            "windows_s":[60],"matchers":["mdtw"]})")
              .validate();
        }) == Errc::config_invalid);
  CHECK(code_of([] {
          ExperimentConfig::from_json(R"({"scenario":"exfil","payloads":["p"],"levels":[3],"distances_m":[1]})")
              .validate();
        }) == Errc::config_invalid);
  CHECK(code_of([] { ExperimentConfig::load("/nonexistent/config.json"); }) == Errc::io_error);
}

TEST_CASE("library building") {
  const auto& f = fixture();
  CHECK(fs::exists(f.root / "lib_audio" / "manifest.json"));
  const auto manifest = slurp(f.root / "lib_audio" / "manifest.json");
  const auto again = build_library(f.root / "corpus" / "audio", inference::MediaKind::audio, f.root / "lib_audio");
  CHECK(again.templates == 6);
  CHECK(again.errors.empty());
  CHECK(slurp(f.root / "lib_audio" / "manifest.json") == manifest);

  const fs::path empty = f.root / "empty";
  fs::create_directories(empty);
  const auto none = build_library(empty, inference::MediaKind::audio, f.root / "lib_empty");
  CHECK(none.templates == 0);
  CHECK_FALSE(none.warnings.empty());

  const fs::path mixed = f.root / "mixed";
  fs::create_directories(mixed);
  fs::copy_file(f.root / "corpus" / "audio" / "song001.wav", mixed / "good.wav");
  std::ofstream(mixed / "bad.wav") << "not a wav file";
  const auto partial = build_library(mixed, inference::MediaKind::audio, f.root / "lib_mixed");
  CHECK(partial.templates == 1);
  CHECK(partial.errors.size() == 1);
}

TEST_CASE("attack runs are reproducible") {
  const auto& f = fixture();
  const auto a = run_attack(audio_config(f.root / "run_a"));
  const auto b = run_attack(audio_config(f.root / "run_b"));
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  CHECK(a.cells.size() == 2 * 2 * 2 + 2 * 2);
  for (const char* name : {"ranks.csv", "summary.csv", "genre_confusion.csv"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(f.root / "run_a" / name));
    CHECK(slurp(f.root / "run_a" / name) == slurp(f.root / "run_b" / name));
  }
  for (const auto& c : a.cells) {
    CHECK(c.mean_rank >= 1);
    CHECK(c.mean_rank <= 6);
  }
  const auto written = report(f.root / "run_a");
  CHECK_FALSE(written.empty());
  for (const auto& p : written) CHECK(fs::exists(p));
}

TEST_CASE("video attack run") {
  const auto& f = fixture();
  auto cfg = ExperimentConfig::from_json(R"({"scenario":"video_attack","seed":2,"corpus":"corpus/video",
    "library":"lib_video","windows_s":[60],"matchers":["mdtw"],"library_fractions":[1.0,0.5]})",
                                         f.root);
  cfg.output_dir = f.root / "run_v";
  const auto s = run_attack(cfg);
  REQUIRE(s.ok());
  CHECK(s.cells.size() == 2);
  CHECK(s.cells[0].items == 4);
  CHECK(s.cells[0].top1_rate == 1.0);
}

TEST_CASE("exfil runs are reproducible") {
  const auto& f = fixture();
  const auto a = run_exfil(exfil_config(f.root / "run_x"));
  const auto b = run_exfil(exfil_config(f.root / "run_y"));
  REQUIRE(a.ok());
  REQUIRE(a.cells.size() == 4);
  CHECK(slurp(f.root / "run_x" / "ber.csv") == slurp(f.root / "run_y" / "ber.csv"));
  CHECK(slurp(f.root / "run_x" / "ber_summary.csv") == slurp(f.root / "run_y" / "ber_summary.csv"));
  for (const auto& c : a.cells) {
    if (c.levels == 4) CHECK(c.mean_ber == 0);
  }
  CHECK_FALSE(report(f.root / "run_x").empty());
}

TEST_CASE("report needs a completed run") {
  const fs::path dir = fs::temp_directory_path() / "lightleak_no_run";
  fs::create_directories(dir);
  CHECK(code_of([&] { report(dir); }) == Errc::missing_run);
  CHECK(code_of([&] { report(dir / "absent"); }) == Errc::missing_run);
  fs::remove_all(dir);
}

TEST_CASE("shipped configs parse and validate") {
  int seen = 0;
  for (const auto& e : fs::directory_iterator(fs::path(LL_SOURCE_DIR) / "configs")) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().filename().string());
    const auto cfg = ExperimentConfig::load(e.path());
    CHECK_NOTHROW(cfg.validate());
    ++seen;
  }
  CHECK(seen >= 4);
}
