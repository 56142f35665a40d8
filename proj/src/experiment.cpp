#include "lightleak/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "lightleak/colorlab.hpp"
#include "lightleak/corpus.hpp"
#include "lightleak/error.hpp"
#include "lightleak/visualizer.hpp"

namespace lightleak::experiment {
namespace fs = std::filesystem;
using json = nlohmann::json;
using inference::MediaKind;

namespace {

[[noreturn]] void bad_config(const std::string& what) {
  throw Error(Errc::config_invalid, "" + what);
}

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "audio_attack") return Scenario::audio_attack;
  if (s == "video_attack") return Scenario::video_attack;
  if (s == "exfil") return Scenario::exfil;
  bad_config("unknown scenario '" + s + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << text;
}

std::vector<std::uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs f(i) for i in [0, n) on a small pool; results are written by index so
// the outcome never depends on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) f(i);
    });
  }
  for (auto& t : pool) t.join();
}

const std::set<std::string> kKeys = {
    "scenario", "seed", "output_dir", "threads", "corpus", "library", "test_items", "test_ids",
    "windows_s", "hue_modes", "random_hue_period_ms", "warm_start", "matchers", "alignment",
    "band_fraction", "stride_s", "osb_penalty", "renormalize_windows", "vt_sweep", "library_fractions",
    "calibration", "payloads", "levels", "distances_m", "modem", "sensor_rate_hz", "sigma_calibration",
    "write_reconstructed", "channel"};

}  // namespace

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::audio_attack: return "audio_attack";
    case Scenario::video_attack: return "video_attack";
    case Scenario::exfil: return "exfil";
  }
  return "audio_attack";
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t{out[0]} << 32) | out[1];
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    bad_config(std::string("parse error: ") + e.what());
  }
  if (!j.is_object()) bad_config("top level must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!kKeys.count(k)) bad_config("unknown key '" + k + "'");
  }

  ExperimentConfig c;
  try {
    if (!j.contains("scenario")) bad_config("missing 'scenario'");
    c.scenario = scenario_from_string(j.at("scenario").get<std::string>());
    c.seed = j.value("seed", std::uint64_t{1});
    c.output_dir = resolve(j.value("output_dir", std::string("run")), base_dir);
    c.threads = j.value("threads", 0);
    if (j.contains("corpus")) c.corpus = resolve(j["corpus"].get<std::string>(), base_dir);
    if (j.contains("library")) c.library = resolve(j["library"].get<std::string>(), base_dir);
    c.test_items = j.value("test_items", 0);
    if (j.contains("test_ids")) c.test_ids = j["test_ids"].get<std::vector<std::string>>();
    if (j.contains("windows_s")) c.windows_s = j["windows_s"].get<std::vector<double>>();
    if (j.contains("hue_modes")) c.hue_modes = j["hue_modes"].get<std::vector<std::string>>();
    c.random_hue_period_ms = j.value("random_hue_period_ms", 500.0);
    c.warm_start = j.value("warm_start", true);
    if (j.contains("matchers")) {
      for (const auto& m : j["matchers"]) c.matchers.push_back(inference::matcher_from_string(m.get<std::string>()));
    }
    const std::string alignment = j.value("alignment", std::string("sliding"));
    if (alignment == "sliding") {
      c.match.alignment = inference::Alignment::sliding;
    } else if (alignment == "whole") {
      c.match.alignment = inference::Alignment::whole;
    } else {
      bad_config("alignment must be 'sliding' or 'whole'");
    }
    c.match.band_fraction = j.value("band_fraction", 0.1);
    c.match.stride_s = j.value("stride_s", 1.0);
    if (j.contains("osb_penalty")) c.match.osb_penalty = j["osb_penalty"].get<double>();
    c.match.renormalize_windows = j.value("renormalize_windows", true);
    if (j.contains("vt_sweep")) c.vt_sweep = j["vt_sweep"].get<std::vector<double>>();
    if (j.contains("library_fractions")) c.library_fractions = j["library_fractions"].get<std::vector<double>>();
    if (j.contains("calibration")) c.calibration = resolve(j["calibration"].get<std::string>(), base_dir);

    if (j.contains("payloads")) {
      for (const auto& p : j["payloads"]) c.payloads.push_back(resolve(p.get<std::string>(), base_dir));
    }
    if (j.contains("levels")) c.levels = j["levels"].get<std::vector<std::uint32_t>>();
    if (j.contains("distances_m")) c.distances_m = j["distances_m"].get<std::vector<double>>();
    if (j.contains("modem")) {
      const auto& m = j["modem"];
      for (const auto& [k, v] : m.items()) {
        if (k != "clock_period_s" && k != "rise_time_s" && k != "fall_time_s") bad_config("unknown modem key '" + k + "'");
      }
      c.modem.clock_period_s = m.value("clock_period_s", c.modem.clock_period_s);
      c.modem.rise_time_s = m.value("rise_time_s", c.modem.rise_time_s);
      c.modem.fall_time_s = m.value("fall_time_s", c.modem.fall_time_s);
    }
    c.sensor_rate_hz = j.value("sensor_rate_hz", 2000.0);
    if (j.contains("sigma_calibration")) {
      const auto& s = j["sigma_calibration"];
      SigmaCalibration sc;
      for (const auto& [k, v] : s.items()) {
        static const std::set<std::string> keys = {"distance_m", "levels", "target_ber", "lo", "hi", "iterations"};
        if (!keys.count(k)) bad_config("unknown sigma_calibration key '" + k + "'");
      }
      sc.distance_m = s.value("distance_m", sc.distance_m);
      sc.levels = s.value("levels", sc.levels);
      sc.target_ber = s.value("target_ber", sc.target_ber);
      sc.lo = s.value("lo", sc.lo);
      sc.hi = s.value("hi", sc.hi);
      sc.iterations = s.value("iterations", sc.iterations);
      c.sigma_calibration = sc;
    }
    c.write_reconstructed = j.value("write_reconstructed", true);

    if (j.contains("channel")) {
      const auto& ch = j["channel"];
      static const std::set<std::string> keys = {"distance_m", "visible_transmittance", "noise_sigma", "gain",
                                                 "sample_jitter_ms", "packet_loss_prob", "seed"};
      for (const auto& [k, v] : ch.items()) {
        if (!keys.count(k)) bad_config("unknown channel key '" + k + "'");
      }
      c.channel.distance_m = ch.value("distance_m", 1.0);
      c.channel.visible_transmittance = ch.value("visible_transmittance", 1.0);
      c.channel.noise_sigma = ch.value("noise_sigma", 0.0);
      c.channel.gain = ch.value("gain", 1.0);
      c.channel.sample_jitter_ms = ch.value("sample_jitter_ms", 0.0);
      c.channel.packet_loss_prob = ch.value("packet_loss_prob", 0.0);
      c.channel.seed = ch.value("seed", std::uint64_t{0});
    }
  } catch (const json::exception& e) {
    bad_config(std::string("wrong type: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::config_invalid) throw;
    bad_config(e.what());
  }
  if (c.matchers.empty()) {
    c.matchers = {c.scenario == Scenario::video_attack ? inference::Matcher::mdtw : inference::Matcher::dtw};
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), path.parent_path());
}

void ExperimentConfig::validate() const {
  try {
    channel.validate();
  } catch (const Error& e) {
    bad_config(e.what());
  }
  if (output_dir.empty()) bad_config("output_dir is empty");
  if (threads < 0) bad_config("threads must be >= 0");
  if (scenario == Scenario::exfil) {
    if (payloads.empty()) bad_config("exfil needs at least one payload");
    if (levels.empty() || distances_m.empty()) bad_config("exfil needs 'levels' and 'distances_m'");
    for (auto m : levels) {
      exfil::AskConfig a = modem;
      a.levels = m;
      try {
        a.validate();
      } catch (const Error& e) {
        bad_config(e.what());
      }
    }
    for (double d : distances_m) {
      if (!(d > 0)) bad_config("distances must be > 0");
    }
    if (!(sensor_rate_hz > 0)) bad_config("sensor_rate_hz must be > 0");
    if (sigma_calibration) {
      const auto& s = *sigma_calibration;
      if (!(s.lo > 0) || !(s.hi > s.lo) || s.iterations < 1 || !(s.target_ber > 0 && s.target_ber < 0.5) ||
          !(s.distance_m > 0)) {
        bad_config("sigma_calibration needs 0 < lo < hi, iterations >= 1, target in (0, 0.5)");
      }
    }
    return;
  }
  if (corpus.empty() || library.empty()) bad_config("attacks need 'corpus' and 'library'");
  if (windows_s.empty()) bad_config("attacks need 'windows_s'");
  for (double w : windows_s) {
    if (!(w > 0)) bad_config("windows must be > 0");
  }
  if (test_items < 0) bad_config("test_items must be >= 0");
  for (const auto& h : hue_modes) {
    if (h != "static" && h != "random") bad_config("hue mode must be 'static' or 'random'");
  }
  if (hue_modes.empty()) bad_config("hue_modes is empty");
  if (random_hue_period_ms < 100) bad_config("random_hue_period_ms must be >= 100");
  for (double v : vt_sweep) {
    if (!(v > 0 && v <= 1)) bad_config("vt_sweep values must lie in (0, 1]");
  }
  for (double f : library_fractions) {
    if (!(f > 0 && f <= 1)) bad_config("library_fractions must lie in (0, 1]");
  }
  for (auto m : matchers) {
    const bool video = scenario == Scenario::video_attack;
    if ((m == inference::Matcher::mdtw) != video) {
      bad_config(std::string("matcher ") + inference::to_string(m) + " does not fit " + to_string(scenario));
    }
  }
  if (!(match.stride_s > 0)) bad_config("stride_s must be > 0");
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["scenario"] = to_string(scenario);
  j["seed"] = seed;
  j["output_dir"] = output_dir.generic_string();
  j["threads"] = threads;
  j["channel"] = {{"distance_m", channel.distance_m},
                  {"visible_transmittance", channel.visible_transmittance},
                  {"noise_sigma", channel.noise_sigma},
                  {"gain", channel.gain},
                  {"sample_jitter_ms", channel.sample_jitter_ms},
                  {"packet_loss_prob", channel.packet_loss_prob},
                  {"seed", channel.seed}};
  if (scenario == Scenario::exfil) {
    std::vector<std::string> p;
    for (const auto& x : payloads) p.push_back(x.generic_string());
    j["payloads"] = p;
    j["levels"] = levels;
    j["distances_m"] = distances_m;
    j["modem"] = {{"clock_period_s", modem.clock_period_s},
                  {"rise_time_s", modem.rise_time_s},
                  {"fall_time_s", modem.fall_time_s}};
    j["sensor_rate_hz"] = sensor_rate_hz;
    j["write_reconstructed"] = write_reconstructed;
    if (sigma_calibration) {
      const auto& s = *sigma_calibration;
      j["sigma_calibration"] = {{"distance_m", s.distance_m}, {"levels", s.levels}, {"target_ber", s.target_ber},
                                {"lo", s.lo},                 {"hi", s.hi},         {"iterations", s.iterations}};
    }
    return j.dump(2) + "\n";
  }
  j["corpus"] = corpus.generic_string();
  j["library"] = library.generic_string();
  j["test_items"] = test_items;
  if (!test_ids.empty()) j["test_ids"] = test_ids;
  j["windows_s"] = windows_s;
  j["hue_modes"] = hue_modes;
  j["random_hue_period_ms"] = random_hue_period_ms;
  j["warm_start"] = warm_start;
  std::vector<std::string> ms;
  for (auto m : matchers) ms.push_back(inference::to_string(m));
  j["matchers"] = ms;
  j["alignment"] = match.alignment == inference::Alignment::sliding ? "sliding" : "whole";
  j["band_fraction"] = match.band_fraction;
  j["stride_s"] = match.stride_s;
  if (match.osb_penalty) j["osb_penalty"] = *match.osb_penalty;
  j["renormalize_windows"] = match.renormalize_windows;
  if (!vt_sweep.empty()) j["vt_sweep"] = vt_sweep;
  if (!library_fractions.empty()) j["library_fractions"] = library_fractions;
  if (!calibration.empty()) j["calibration"] = calibration.generic_string();
  return j.dump(2) + "\n";
}

std::vector<MediaEntry> list_media(const fs::path& dir, MediaKind kind) {
  if (!fs::is_directory(dir)) throw Error(Errc::io_error, "not a directory: " + dir.string());
  std::vector<MediaEntry> out;
  if (fs::exists(dir / "metadata.csv")) {
    for (const auto& row : corpus::read_metadata(dir / "metadata.csv")) {
      out.push_back({row.id, dir / row.file, {row.id, row.title, row.genre}});
    }
    return out;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    const bool audio = ext == ".wav" || ext == ".pcm";
    const bool video = ext == ".csv" || ext == ".rgb24";
    if ((kind == MediaKind::audio && audio) || (kind == MediaKind::video && video)) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const std::string id = f.stem().string();
    out.push_back({id, f, {id, id, ""}});
  }
  return out;
}

namespace {

media::AudioTrack load_audio(const MediaEntry& e) {
  auto t = e.path.extension() == ".pcm" ? media::read_raw_pcm(e.path) : media::read_wav(e.path);
  t.info = e.info;
  return t;
}

media::VideoColorTrack load_video(const MediaEntry& e) {
  auto t = e.path.extension() == ".rgb24" ? media::read_rgb24(e.path) : media::read_color_log(e.path);
  t.info = e.info;
  return t;
}

}  // namespace

BuildReport build_library(const fs::path& corpus_dir, MediaKind kind, const fs::path& out_dir) {
  BuildReport rep;
  const auto entries = list_media(corpus_dir, kind);
  if (entries.empty()) rep.warnings.push_back("no media files in " + corpus_dir.string());
  inference::ReferenceLibrary lib;
  for (const auto& e : entries) {
    try {
      auto t = kind == MediaKind::audio ? inference::build_audio_template(load_audio(e))
                                        : inference::build_video_template(load_video(e));
      t.id = e.id;
      if (!t.usable) rep.warnings.push_back(e.id + ": silent or black, kept as unusable");
      lib.add(std::move(t));
    } catch (const Error& err) {
      rep.errors.push_back(e.path.filename().string() + ": " + err.what());
    }
  }
  fs::create_directories(out_dir);
  lib.save(out_dir);
  rep.templates = lib.size();
  return rep;
}

namespace {

struct Cell {
  std::string hue_mode;
  inference::Matcher matcher;
  double window_s;
  double vt;
  double fraction;
};

std::vector<Cell> attack_cells(const ExperimentConfig& cfg) {
  const bool audio = cfg.scenario == Scenario::audio_attack;
  const std::vector<std::string> hues = audio ? cfg.hue_modes : std::vector<std::string>{"none"};
  const std::vector<double> fractions = cfg.library_fractions.empty() ? std::vector<double>{1.0} : cfg.library_fractions;
  const double max_window = *std::max_element(cfg.windows_s.begin(), cfg.windows_s.end());
  std::vector<Cell> cells;
  for (const auto& h : hues) {
    for (auto m : cfg.matchers) {
      for (double f : fractions) {
        for (double w : cfg.windows_s) cells.push_back({h, m, w, cfg.channel.visible_transmittance, f});
        for (double vt : cfg.vt_sweep) {
          if (vt == cfg.channel.visible_transmittance) continue;
          cells.push_back({h, m, max_window, vt, f});
        }
      }
    }
  }
  return cells;
}

struct ItemOutcome {
  std::size_t rank = 0;
  std::string predicted;
  std::string error;
};

}  // namespace

AttackSummary run_attack(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.scenario == Scenario::exfil) throw Error(Errc::config_invalid, "not an attack config");
  const bool audio = cfg.scenario == Scenario::audio_attack;
  const MediaKind kind = audio ? MediaKind::audio : MediaKind::video;

  const auto library = inference::ReferenceLibrary::load(cfg.library);
  const auto cal = cfg.calibration.empty() ? colorlab::ResponseCalibration::lifx_a19()
                                           : colorlab::load_calibration(cfg.calibration);
  const auto entries = list_media(cfg.corpus, kind);

  // Test items: explicit ids, else a seeded sample of usable library items.
  std::vector<MediaEntry> items;
  if (!cfg.test_ids.empty()) {
    for (const auto& id : cfg.test_ids) {
      auto it = std::find_if(entries.begin(), entries.end(), [&](const MediaEntry& e) { return e.id == id; });
      if (it == entries.end()) throw Error(Errc::config_invalid, "unknown test id '" + id + "'");
      items.push_back(*it);
    }
  } else {
    for (const auto& e : entries) {
      const auto* t = library.find(e.id);
      if (t && t->usable && t->kind == kind) items.push_back(e);
    }
    if (cfg.test_items > 0 && static_cast<std::size_t>(cfg.test_items) < items.size()) {
      std::mt19937_64 rng(derive_seed(cfg.seed, 0x7e57));
      std::shuffle(items.begin(), items.end(), rng);
      items.resize(static_cast<std::size_t>(cfg.test_items));
      std::sort(items.begin(), items.end(), [](const MediaEntry& a, const MediaEntry& b) { return a.id < b.id; });
    }
  }
  if (items.empty()) throw Error(Errc::empty_input, "no test items");

  // Library subsets keep every test item and fill up in a seeded order.
  std::vector<double> fractions = cfg.library_fractions.empty() ? std::vector<double>{1.0} : cfg.library_fractions;
  std::map<double, inference::ReferenceLibrary> subsets;
  {
    std::vector<std::string> others;
    std::set<std::string> test_ids;
    for (const auto& e : items) test_ids.insert(e.id);
    for (const auto& id : library.ids()) {
      if (!test_ids.count(id)) others.push_back(id);
    }
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x5b5e7));
    std::shuffle(others.begin(), others.end(), rng);
    for (double f : fractions) {
      const auto want = static_cast<std::size_t>(std::llround(f * static_cast<double>(library.size())));
      std::vector<std::string> ids(test_ids.begin(), test_ids.end());
      for (std::size_t k = 0; k < others.size() && ids.size() < want; ++k) ids.push_back(others[k]);
      subsets.emplace(f, library.subset(ids));
    }
  }

  const auto cells = attack_cells(cfg);
  const double max_window = *std::max_element(cfg.windows_s.begin(), cfg.windows_s.end());
  const std::vector<double> warm = inference::warm_start_maxima(cal);
  std::vector<std::vector<ItemOutcome>> outcome(items.size(), std::vector<ItemOutcome>(cells.size()));

  parallel_for(items.size(), cfg.threads, [&](std::size_t i) {
    const auto& item = items[i];
    auto fail_all = [&](const std::string& msg) {
      for (auto& o : outcome[i]) o.error = item.id + ": " + msg;
    };
    try {
      const std::uint64_t item_seed = derive_seed(cfg.seed, 1, i);
      std::mt19937_64 rng(item_seed);
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      std::uniform_int_distribution<int> hue_draw(0, colorlab::kHueBins - 1);
      const int static_hue = hue_draw(rng);
      const std::uint64_t hue_seed = rng();
      const std::uint64_t noise_seed = rng();

      media::AudioTrack track;
      media::VideoColorTrack video;
      double duration;
      if (audio) {
        track = load_audio(item);
        duration = track.duration();
      } else {
        video = load_video(item);
        duration = video.duration();
      }
      const double rate = audio ? inference::kAudioRateHz : inference::kVideoRateHz;
      // start on the sensor's sample grid so windows line up with templates
      const double room = std::max(0.0, duration - max_window);
      const double offset = std::floor(u01(rng) * room * rate) / rate;

      std::map<std::string, PacketStream> streams;
      if (audio) {
        for (const auto& h : cfg.hue_modes) {
          visualizer::HuePolicy policy = visualizer::StaticHue{static_cast<double>(static_hue), 1.0};
          if (h == "random") policy = visualizer::RandomHue{static_cast<int>(cfg.random_hue_period_ms), hue_seed};
          streams[h] = visualizer::audio_visualize(track, policy);
        }
      } else {
        streams["none"] = visualizer::video_visualize(video);
      }

      for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& cell = cells[c];
        auto& out = outcome[i][c];
        try {
          optics::ChannelConfig ch = cfg.channel;
          ch.visible_transmittance = cell.vt;
          ch.seed = noise_seed;
          const auto& timeline = streams.at(cell.hue_mode).timeline;
          const optics::Window win{offset, std::min(cell.window_s, duration - offset)};
          inference::Series query;
          if (audio) {
            const auto lum = optics::observe(timeline, optics::Sensor::luminance(), ch, cal, win);
            if (cell.hue_mode == "random") {
              optics::ChannelConfig rgb_ch = ch;
              rgb_ch.seed = noise_seed ^ 0x9E3779B97F4A7C15ULL;
              const auto rgb = optics::observe(timeline, optics::Sensor::rgb_audio(), rgb_ch, cal, win);
              const auto profile = inference::capture_luminance_profile(lum, &rgb, cal);
              query = cfg.warm_start ? inference::normalize_random(profile, warm) : inference::normalize_random(profile);
            } else {
              query = inference::normalize_static(inference::capture_luminance_profile(lum, nullptr, cal));
            }
          } else {
            const auto rgb = optics::observe(timeline, optics::Sensor::rgb_video(), ch, cal, win);
            query = inference::normalize_color(inference::capture_color_profile(rgb), cal);
          }
          inference::MatchOptions opts = cfg.match;
          opts.matcher = cell.matcher;
          const auto res = inference::match_profile(query, subsets.at(cell.fraction), kind, opts, item.id);
          out.rank = res.rank_of_truth.value_or(res.ranked.size() + 1);
          out.predicted = res.ranked.empty() ? "" : res.ranked.front().id;
        } catch (const Error& e) {
          out.error = item.id + ": " + e.what();
        }
      }
    } catch (const Error& e) {
      fail_all(e.what());
    }
  });

  fs::create_directories(cfg.output_dir);
  AttackSummary summary;
  std::ostringstream ranks, sum;
  ranks << "hue_mode,matcher,window_s,visible_transmittance,library_fraction,item,truth_genre,rank,predicted\n";
  sum << "hue_mode,matcher,window_s,visible_transmittance,library_fraction,items,failures,mean_rank,top1_rate\n";
  std::ostringstream conf;
  conf << "hue_mode,matcher,window_s,visible_transmittance,library_fraction,true_genre";
  for (const char* g : inference::kGenres) conf << ',' << g;
  conf << '\n';

  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& cell = cells[c];
    const std::string key = cell.hue_mode + "," + inference::to_string(cell.matcher) + "," + fmt(cell.window_s, "%g") +
                            "," + fmt(cell.vt, "%g") + "," + fmt(cell.fraction, "%g");
    CellSummary cs{cell.hue_mode, inference::to_string(cell.matcher), cell.window_s, cell.vt, cell.fraction};
    double rank_sum = 0;
    std::size_t top1 = 0;
    inference::GenreMatrix gm{};
    bool any_genre = false;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& o = outcome[i][c];
      if (!o.error.empty()) {
        ++cs.failures;
        summary.errors.push_back(o.error);
        continue;
      }
      ++cs.items;
      rank_sum += static_cast<double>(o.rank);
      top1 += o.rank == 1 ? 1 : 0;
      ranks << key << ',' << items[i].id << ',' << items[i].info.genre << ',' << o.rank << ',' << o.predicted << '\n';
      const int tg = inference::genre_index(items[i].info.genre);
      const auto* pt = library.find(o.predicted);
      const int pg = pt ? inference::genre_index(pt->info.genre) : -1;
      if (tg >= 0 && pg >= 0) {
        ++gm[tg][pg];
        any_genre = true;
      }
    }
    cs.mean_rank = cs.items ? rank_sum / static_cast<double>(cs.items) : 0.0;
    cs.top1_rate = cs.items ? static_cast<double>(top1) / static_cast<double>(cs.items) : 0.0;
    sum << key << ',' << cs.items << ',' << cs.failures << ',' << fmt(cs.mean_rank) << ',' << fmt(cs.top1_rate) << '\n';
    if (audio && any_genre) {
      for (int g = 0; g < 4; ++g) {
        conf << key << ',' << inference::kGenres[g];
        for (int p = 0; p < 4; ++p) conf << ',' << gm[g][p];
        conf << '\n';
      }
    }
    summary.cells.push_back(cs);
  }
  write_text(cfg.output_dir / "ranks.csv", ranks.str());
  write_text(cfg.output_dir / "summary.csv", sum.str());
  if (audio) write_text(cfg.output_dir / "genre_confusion.csv", conf.str());
  write_text(cfg.output_dir / "config.json", cfg.to_json());
  json run{{"format", "lightleak-run"}, {"version", 1}, {"scenario", to_string(cfg.scenario)},
           {"items", items.size()},     {"cells", cells.size()}, {"errors", summary.errors.size()}};
  write_text(cfg.output_dir / "run.json", run.dump(2) + "\n");
  return summary;
}

PayloadResult transmit_payload(std::span<const std::uint8_t> data, const exfil::AskConfig& modem,
                               const optics::ChannelConfig& channel, double sensor_rate_hz) {
  const auto frame = exfil::symbol_map(data, modem);
  exfil::ModulateOptions mo;
  mo.ideal_trace = false;
  const auto tx = exfil::modulate(frame, modem, mo);
  const auto trace = optics::observe(tx.stream.timeline, {optics::SensorKind::infrared, sensor_rate_hz}, channel,
                                     colorlab::ResponseCalibration::lifx_a19());
  PayloadResult r;
  try {
    exfil::DemodOptions opts;
    opts.expected_symbols = frame.meta.symbol_count;
    const auto dm = exfil::demodulate(trace, modem, opts);
    auto levels = dm.levels;
    r.truncated = dm.diagnostics.truncated;
    // a cut-short frame still decodes; the missing tail reads as zeros
    levels.resize(frame.meta.symbol_count, 0);
    r.reconstructed = exfil::decode_symbols(levels, modem, frame.meta);
  } catch (const Error& e) {
    if (e.code() != Errc::no_start_symbol) throw;
    r.locked = false;
  }
  const auto b = exfil::bit_error_rate(data, r.reconstructed);
  r.ber = b.rate;
  r.bits = b.bits;
  r.errors = b.errors;
  return r;
}

std::vector<std::vector<std::uint8_t>> load_payloads(const ExperimentConfig& cfg, std::vector<std::string>* names) {
  std::vector<fs::path> files;
  for (const auto& p : cfg.payloads) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> inner;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file()) inner.push_back(e.path());
      }
      std::sort(inner.begin(), inner.end());
      files.insert(files.end(), inner.begin(), inner.end());
    } else if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else {
      throw Error(Errc::io_error, "payload not found: " + p.string());
    }
  }
  std::vector<std::vector<std::uint8_t>> out;
  for (const auto& f : files) {
    out.push_back(slurp(f));
    if (names) names->push_back(f.filename().string());
  }
  if (out.empty()) throw Error(Errc::empty_input, "no payload files");
  return out;
}

namespace {

optics::ChannelConfig payload_channel(const ExperimentConfig& cfg, std::size_t payload, double distance,
                                      double sigma) {
  optics::ChannelConfig ch = cfg.channel;
  ch.distance_m = distance;
  ch.noise_sigma = sigma;
  // same noise stream for a payload in every cell
  ch.seed = derive_seed(cfg.seed, 2, payload);
  return ch;
}

}  // namespace

double exfil_cell_ber(const std::vector<std::vector<std::uint8_t>>& payloads, const ExperimentConfig& cfg,
                      std::uint32_t levels, double distance_m, double sigma) {
  exfil::AskConfig modem = cfg.modem;
  modem.levels = levels;
  std::vector<double> ber(payloads.size());
  parallel_for(payloads.size(), cfg.threads, [&](std::size_t p) {
    ber[p] = transmit_payload(payloads[p], modem, payload_channel(cfg, p, distance_m, sigma), cfg.sensor_rate_hz).ber;
  });
  double acc = 0;
  for (double b : ber) acc += b;
  return acc / static_cast<double>(payloads.size());
}

double calibrate_sigma(const std::vector<std::vector<std::uint8_t>>& payloads, const ExperimentConfig& cfg,
                       const SigmaCalibration& cal, double* achieved) {
  // BER grows with sigma; bisect in log space.
  double lo = std::log(cal.lo), hi = std::log(cal.hi);
  double best = std::exp(hi), best_gap = std::numeric_limits<double>::infinity();
  double best_ber = 0;
  for (int it = 0; it < cal.iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double sigma = std::exp(mid);
    const double b = exfil_cell_ber(payloads, cfg, cal.levels, cal.distance_m, sigma);
    if (std::abs(b - cal.target_ber) < best_gap) {
      best_gap = std::abs(b - cal.target_ber);
      best = sigma;
      best_ber = b;
    }
    (b < cal.target_ber ? lo : hi) = mid;
  }
  if (achieved) *achieved = best_ber;
  return best;
}

ExfilSummary run_exfil(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.scenario != Scenario::exfil) throw Error(Errc::config_invalid, "not an exfil config");
  std::vector<std::string> names;
  const auto payloads = load_payloads(cfg, &names);

  ExfilSummary summary;
  summary.noise_sigma = cfg.channel.noise_sigma;
  if (cfg.sigma_calibration) {
    double got = 0;
    summary.noise_sigma = calibrate_sigma(payloads, cfg, *cfg.sigma_calibration, &got);
    summary.calibrated_ber = got;
  }

  struct Job {
    std::uint32_t levels;
    double distance;
    std::size_t payload;
  };
  std::vector<Job> jobs;
  for (auto m : cfg.levels) {
    for (double d : cfg.distances_m) {
      for (std::size_t p = 0; p < payloads.size(); ++p) jobs.push_back({m, d, p});
    }
  }
  std::vector<PayloadResult> results(jobs.size());
  std::vector<std::string> job_errors(jobs.size());
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t k) {
    const auto& j = jobs[k];
    exfil::AskConfig modem = cfg.modem;
    modem.levels = j.levels;
    try {
      results[k] = transmit_payload(payloads[j.payload], modem,
                                    payload_channel(cfg, j.payload, j.distance, summary.noise_sigma), cfg.sensor_rate_hz);
    } catch (const Error& e) {
      job_errors[k] = names[j.payload] + ": " + e.what();
    }
  });

  fs::create_directories(cfg.output_dir);
  std::ostringstream ber, sum;
  ber << "levels,distance_m,payload,bits,errors,ber,locked,truncated\n";
  sum << "levels,distance_m,payloads,bits,errors,mean_ber,lock_failures\n";
  for (std::size_t k = 0; k < jobs.size();) {
    ExfilCell cell{jobs[k].levels, jobs[k].distance};
    double ber_sum = 0;
    std::size_t counted = 0;
    for (; k < jobs.size() && jobs[k].levels == cell.levels && jobs[k].distance == cell.distance_m; ++k) {
      if (!job_errors[k].empty()) {
        summary.errors.push_back(job_errors[k]);
        continue;
      }
      const auto& r = results[k];
      ber << cell.levels << ',' << fmt(cell.distance_m, "%g") << ',' << names[jobs[k].payload] << ',' << r.bits << ','
          << r.errors << ',' << fmt(r.ber) << ',' << (r.locked ? 1 : 0) << ',' << (r.truncated ? 1 : 0) << '\n';
      cell.bits += r.bits;
      cell.errors += r.errors;
      cell.lock_failures += r.locked ? 0 : 1;
      ber_sum += r.ber;
      ++counted;
      if (cfg.write_reconstructed) {
        const fs::path dir = cfg.output_dir / "reconstructed" /
                             ("M" + std::to_string(cell.levels) + "_d" + fmt(cell.distance_m, "%g"));
        fs::create_directories(dir);
        std::ofstream out(dir / names[jobs[k].payload], std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(r.reconstructed.data()),
                  static_cast<std::streamsize>(r.reconstructed.size()));
      }
    }
    cell.mean_ber = counted ? ber_sum / static_cast<double>(counted) : 0.0;
    sum << cell.levels << ',' << fmt(cell.distance_m, "%g") << ',' << counted << ',' << cell.bits << ','
        << cell.errors << ',' << fmt(cell.mean_ber) << ',' << cell.lock_failures << '\n';
    summary.cells.push_back(cell);
  }
  write_text(cfg.output_dir / "ber.csv", ber.str());
  write_text(cfg.output_dir / "ber_summary.csv", sum.str());
  write_text(cfg.output_dir / "config.json", cfg.to_json());
  json run{{"format", "lightleak-run"},
           {"version", 1},
           {"scenario", "exfil"},
           {"noise_sigma", summary.noise_sigma},
           {"errors", summary.errors.size()}};
  if (summary.calibrated_ber) run["calibrated_ber"] = *summary.calibrated_ber;
  write_text(cfg.output_dir / "run.json", run.dump(2) + "\n");
  return summary;
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_run, "" + path.string() + " not found");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    rows.push_back(std::move(cols));
  }
  return rows;
}

}  // namespace

std::vector<fs::path> report(const fs::path& run_dir, const fs::path& out_dir_in) {
  std::ifstream in(run_dir / "run.json");
  if (!in) throw Error(Errc::missing_run, "no completed run in " + run_dir.string());
  json run;
  try {
    run = json::parse(in);
  } catch (const json::exception&) {
    throw Error(Errc::missing_run, "unreadable run.json in " + run_dir.string());
  }
  const std::string scenario = run.value("scenario", "");
  const fs::path out_dir = out_dir_in.empty() ? run_dir / "report" : out_dir_in;
  fs::create_directories(out_dir);
  std::vector<fs::path> written;

  if (scenario == "exfil") {
    // one series per M: rows sorted by M, then distance
    auto rows = read_csv(run_dir / "ber_summary.csv");
    if (rows.size() < 1) throw Error(Errc::missing_run, "empty ber_summary.csv");
    std::vector<std::vector<std::string>> body(rows.begin() + 1, rows.end());
    std::stable_sort(body.begin(), body.end(), [](const auto& a, const auto& b) {
      const auto ma = std::stoul(a[0]), mb = std::stoul(b[0]);
      if (ma != mb) return ma < mb;
      return std::stod(a[1]) < std::stod(b[1]);
    });
    std::ostringstream o;
    o << "levels,distance_m,mean_ber\n";
    for (const auto& r : body) o << r[0] << ',' << r[1] << ',' << r[5] << '\n';
    write_text(out_dir / "ber_vs_distance.csv", o.str());
    written.push_back(out_dir / "ber_vs_distance.csv");
    return written;
  }
  if (scenario != "audio_attack" && scenario != "video_attack") {
    throw Error(Errc::missing_run, "unknown scenario in run.json");
  }
  auto rows = read_csv(run_dir / "summary.csv");
  if (rows.empty()) throw Error(Errc::missing_run, "empty summary.csv");
  std::vector<std::vector<std::string>> body(rows.begin() + 1, rows.end());
  std::stable_sort(body.begin(), body.end(), [](const auto& a, const auto& b) {
    for (int k : {0, 1}) {
      if (a[k] != b[k]) return a[k] < b[k];
    }
    for (int k : {3, 4}) {  // vt, fraction: descending
      const double x = std::stod(a[k]), y = std::stod(b[k]);
      if (x != y) return x > y;
    }
    return std::stod(a[2]) < std::stod(b[2]);
  });
  std::ostringstream o;
  o << "hue_mode,matcher,visible_transmittance,library_fraction,window_s,mean_rank,top1_rate\n";
  for (const auto& r : body) {
    o << r[0] << ',' << r[1] << ',' << r[3] << ',' << r[4] << ',' << r[2] << ',' << r[7] << ',' << r[8] << '\n';
  }
  write_text(out_dir / "rank_vs_window.csv", o.str());
  written.push_back(out_dir / "rank_vs_window.csv");

  if (scenario == "audio_attack" && fs::exists(run_dir / "genre_confusion.csv")) {
    // summed over all cells
    auto conf = read_csv(run_dir / "genre_confusion.csv");
    inference::GenreMatrix total{};
    for (std::size_t i = 1; i < conf.size(); ++i) {
      const int g = inference::genre_index(conf[i][5]);
      if (g < 0 || conf[i].size() < 10) continue;
      for (int p = 0; p < 4; ++p) total[g][p] += std::stoi(conf[i][6 + p]);
    }
    std::ostringstream c;
    c << "true_genre";
    for (const char* g : inference::kGenres) c << ',' << g;
    c << '\n';
    for (int g = 0; g < 4; ++g) {
      c << inference::kGenres[g];
      for (int p = 0; p < 4; ++p) c << ',' << total[g][p];
      c << '\n';
    }
    write_text(out_dir / "genre_confusion.csv", c.str());
    written.push_back(out_dir / "genre_confusion.csv");
  }
  return written;
}

}  // namespace lightleak::experiment
