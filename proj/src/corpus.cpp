#include "lightleak/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "lightleak/error.hpp"

namespace lightleak::corpus {
namespace {

struct GenreStyle {
  double bpm_lo, bpm_hi;
  double decay_s;      // beat envelope decay
  double floor;        // level between beats
  double swing;        // off-beat probability
  int bars_lo, bars_hi;
};

GenreStyle style_for(const std::string& genre) {
  if (genre == "country") return {88, 108, 0.22, 0.35, 0.15, 4, 8};
  if (genre == "dance") return {118, 130, 0.12, 0.15, 0.05, 8, 16};
  if (genre == "jazz") return {130, 170, 0.18, 0.40, 0.45, 2, 6};
  if (genre == "rock") return {105, 130, 0.16, 0.30, 0.20, 4, 12};
  throw Error(Errc::invalid_argument, "unknown genre '" + genre + "'");
}

}  // namespace

media::AudioTrack synth_song(const SongSpec& spec) {
  if (!(spec.duration_s > 0) || !(spec.sample_rate > 0)) {
    throw Error(Errc::invalid_argument, "song duration and sample rate must be positive");
  }
  const GenreStyle st = style_for(spec.genre);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const double bpm = st.bpm_lo + (st.bpm_hi - st.bpm_lo) * u01(rng);
  const double beat = 60.0 / bpm;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate));

  // Section loudness: bar-aligned sections with random levels.
  std::vector<double> level(n);
  {
    const double bar = 4 * beat;
    std::size_t i = 0;
    while (i < n) {
      const int bars = st.bars_lo + static_cast<int>(u01(rng) * (st.bars_hi - st.bars_lo + 1));
      const double lvl = 0.3 + 0.7 * u01(rng);
      const auto len = static_cast<std::size_t>(bars * bar * spec.sample_rate);
      for (std::size_t k = 0; k < len && i < n; ++k, ++i) level[i] = lvl;
    }
  }

  // Beat onsets with per-beat accents; some genres push beats off the grid.
  std::vector<double> env(n, 0.0);
  const double phase = u01(rng) * beat;
  for (double t = phase; t < spec.duration_s; t += beat) {
    double onset = t;
    if (u01(rng) < st.swing) onset += beat * (0.33 + 0.17 * u01(rng));
    const double accent = 0.5 + 0.5 * u01(rng);
    const auto first = static_cast<std::size_t>(onset * spec.sample_rate);
    const auto span = static_cast<std::size_t>(4 * st.decay_s * spec.sample_rate);
    for (std::size_t k = 0; k < span && first + k < n; ++k) {
      const double dt = static_cast<double>(k) / spec.sample_rate;
      env[first + k] = std::max(env[first + k], accent * std::exp(-dt / st.decay_s));
    }
  }

  // A slow melodic swell on top keeps bars distinguishable.
  const double swell_hz = 0.05 + 0.2 * u01(rng);
  const double swell_phase = 2 * std::numbers::pi * u01(rng);

  std::vector<double> amp(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate;
    const double swell = 0.85 + 0.15 * std::sin(2 * std::numbers::pi * swell_hz * t + swell_phase);
    amp[i] = level[i] * swell * (st.floor + (1.0 - st.floor) * env[i]);
  }

  // Mastered loud: gain pushes the upper amplitudes past full scale so the
  // limiter clips them.
  std::vector<double> sorted(amp);
  const auto q = sorted.begin() + static_cast<std::ptrdiff_t>(0.9 * (n - 1));
  std::nth_element(sorted.begin(), q, sorted.end());
  const double gain = *q > 0 ? (1.05 + 0.2 * u01(rng)) / *q : 1.0;

  media::AudioTrack track;
  track.sample_rate = spec.sample_rate;
  track.samples.resize(n);
  const double f1 = 97.0 + 40.0 * u01(rng);
  const double f2 = 211.0 + 60.0 * u01(rng);
  std::uniform_real_distribution<double> hiss(-0.1, 0.1);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate;
    const double carrier =
        0.6 * std::sin(2 * std::numbers::pi * f1 * t) + 0.3 * std::sin(2 * std::numbers::pi * f2 * t) + hiss(rng);
    track.samples[i] = static_cast<float>(std::clamp(gain * amp[i] * carrier / 0.9, -1.0, 1.0));
  }
  track.info.genre = spec.genre;
  return track;
}

media::VideoColorTrack synth_video(const VideoSpec& spec) {
  if (!(spec.duration_s > 0) || !(spec.frame_rate > 0)) {
    throw Error(Errc::invalid_argument, "video duration and frame rate must be positive");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.frame_rate));

  media::VideoColorTrack track;
  track.frame_rate = spec.frame_rate;
  track.frames.reserve(n);
  while (track.frames.size() < n) {
    const double scene_s = 2.0 + 18.0 * u01(rng);
    colorlab::RgbColor c{u01(rng), u01(rng), u01(rng)};
    const double top = std::max({c.r, c.g, c.b, 1e-6});
    // some scenes are fully bright, the rest dimmer
    const double bri = u01(rng) < 0.3 ? 1.0 : 0.2 + 0.75 * u01(rng);
    c = {c.r / top * bri, c.g / top * bri, c.b / top * bri};
    const auto frames = static_cast<std::size_t>(std::max(1.0, std::round(scene_s * spec.frame_rate)));
    for (std::size_t k = 0; k < frames && track.frames.size() < n; ++k) track.frames.push_back(c);
  }
  return track;
}

const std::vector<std::vector<std::string>>& harvard_lists() {
  static const std::vector<std::vector<std::string>> lists = {
      {"The birch canoe slid on the smooth planks.", "Glue the sheet to the dark blue background.",
       "It's easy to tell the depth of a well.", "These days a chicken leg is a rare dish.",
       "Rice is often served in round bowls.", "The juice of lemons makes fine punch.",
       "The box was thrown beside the parked truck.", "The hogs were fed chopped corn and garbage.",
       "Four hours of steady work faced us.", "Large size in stockings is hard to sell."},
      {"The boy was there when the sun rose.", "A rod is used to catch pink salmon.",
       "The source of the huge river is the clear spring.", "Kick the ball straight and follow through.",
       "Help the woman get back to her feet.", "A pot of tea helps to pass the evening.",
       "Smoky fires lack flame and heat.", "The soft cushion broke the man's fall.",
       "The salt breeze came across from the sea.", "The girl at the booth sold fifty bonds."},
      {"The small pup gnawed a hole in the sock.", "The fish twisted and turned on the bent hook.",
       "Press the pants and sew a button on the vest.", "The swan dive was far short of perfect.",
       "The beauty of the view stunned the young boy.", "Two blue fish swam in the tank.",
       "Her purse was full of useless trash.", "The colt reared and threw the tall rider.",
       "It snowed, rained, and hailed the same morning.", "Read verse out loud for pleasure."},
      {"Hoist the load to your left shoulder.", "Take the winding path to reach the lake.",
       "Note closely the size of the gas tank.", "Wipe the grease off his dirty face.",
       "Mend the coat before you go out.", "The wrist was badly strained and hung limp.",
       "The stray cat gave birth to kittens.", "The young girl gave no clear response.",
       "The meal was cooked before the bell rang.", "What joy there is in living."},
      {"A king ruled the state in the early days.", "The ship was torn apart on the sharp reef.",
       "Sickness kept him home the third week.", "The wide road shimmered in the hot sun.",
       "The lazy cow lay in the cool grass.", "Lift the square stone over the fence.",
       "The rope will bind the seven books at once.", "Hop over the fence and plunge in.",
       "The friendly gang left the drug store.", "Mesh wire keeps chicks inside."},
      {"The frosty air passed through the coat.", "The crooked maze failed to fool the mouse.",
       "Adding fast leads to wrong sums.", "The show was a flop from the very start.",
       "A saw is a tool used for making boards.", "The wagon moved on well oiled wheels.",
       "March the soldiers past the next hill.", "A cup of sugar makes sweet fudge.",
       "Place a rosebush near the porch steps.", "Both lost their lives in the raging storm."},
      {"We talked of the side show in the circus.", "Use a pencil to write the first draft.",
       "He ran half way to the hardware store.", "The clock struck to mark the third period.",
       "A small creek cut across the field.", "Cars and busses stalled in snow drifts.",
       "The set of china hit the floor with a crash.", "This is a grand season for hikes on the road.",
       "The dune rose from the edge of the water.", "Those words were the cue for the actor to leave."},
      {"A yacht slid around the point into the bay.", "The two met while playing on the sand.",
       "The ink stain dried on the finished page.", "The walled town was seized without a fight.",
       "The lease ran out in sixteen weeks.", "A tame squirrel makes a nice pet.",
       "The horn of the car woke the sleeping cop.", "The heart beat strongly and with firm strokes.",
       "The pearl was worn in a thin silver ring.", "The fruit peel was cut in thick slices."},
      {"The Navy attacked the big task force.", "See the cat glaring at the scared mouse.",
       "There are more than two factors here.", "The hat brim was wide and too droopy.",
       "The lawyer tried to lose his case.", "The grass curled around the fence post.",
       "Cut the pie into large parts.", "Men strive but seldom get rich.",
       "Always close the barn door tight.", "He lay prone and hardly moved a limb."},
      {"The slush lay deep along the street.", "A wisp of cloud hung in the blue air.",
       "A pound of sugar costs more than eggs.", "The fin was sharp and cut the clear water.",
       "The play seems dull and quite stupid.", "Bail the boat to stop it from sinking.",
       "The term ended in late June that year.", "A tusk is used to make costly gifts.",
       "Ten pins were set in order.", "The bill was paid every third week."},
  };
  return lists;
}

std::vector<std::uint8_t> test_image_pgm(std::uint64_t seed) {
  constexpr int kSize = 128;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  struct Blob {
    double x, y, r, v;
  };
  std::vector<Blob> blobs(6);
  for (auto& b : blobs) b = {u01(rng) * kSize, u01(rng) * kSize, 8 + 24 * u01(rng), u01(rng)};

  const std::string header = "P5\n128 128\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  std::normal_distribution<double> grain(0.0, 6.0);
  for (int y = 0; y < kSize; ++y) {
    for (int x = 0; x < kSize; ++x) {
      double v = 40.0 + 120.0 * (x + y) / (2.0 * kSize);
      for (const auto& b : blobs) {
        const double d = std::hypot(x - b.x, y - b.y);
        if (d < b.r) v = 0.5 * v + 0.5 * 255.0 * b.v;
      }
      out.push_back(static_cast<std::uint8_t>(std::clamp(std::lround(v + grain(rng)), 0L, 255L)));
    }
  }
  return out;
}

std::vector<MetadataRow> read_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::vector<MetadataRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("file,", 0) == 0) continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() < 2) throw Error(Errc::io_error, path.string() + ": malformed metadata row");
    cols.resize(4);
    rows.push_back({cols[0], cols[1], cols[2], cols[3]});
  }
  return rows;
}

void write_metadata(const std::vector<MetadataRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << "file,id,title,genre\n";
  for (const auto& r : rows) out << r.file << ',' << r.id << ',' << r.title << ',' << r.genre << '\n';
}

CorpusSummary generate(const CorpusSpec& spec, const std::filesystem::path& dir) {
  if (spec.songs < 0 || spec.videos < 0) throw Error(Errc::invalid_argument, "negative corpus size");
  namespace fs = std::filesystem;
  std::seed_seq base{spec.seed};
  std::vector<std::uint64_t> seeds(2);
  {
    std::vector<std::uint32_t> raw(4);
    base.generate(raw.begin(), raw.end());
    seeds[0] = (std::uint64_t{raw[0]} << 32) | raw[1];
    seeds[1] = (std::uint64_t{raw[2]} << 32) | raw[3];
  }
  CorpusSummary summary;
  char name[64];

  if (spec.songs > 0) {
    const fs::path audio = dir / "audio";
    fs::create_directories(audio);
    std::vector<MetadataRow> rows;
    for (int i = 0; i < spec.songs; ++i) {
      const std::string genre = i % 4 == 0 ? "country" : i % 4 == 1 ? "dance" : i % 4 == 2 ? "jazz" : "rock";
      std::snprintf(name, sizeof name, "song%03d", i);
      auto track = synth_song({seeds[0] + static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ULL, genre,
                               spec.song_duration_s, spec.audio_rate});
      media::write_wav(track, audio / (std::string(name) + ".wav"));
      rows.push_back({std::string(name) + ".wav", name, std::string("Synthetic ") + genre + " " + name, genre});
      ++summary.songs;
    }
    write_metadata(rows, audio / "metadata.csv");
  }

  if (spec.videos > 0) {
    const fs::path video = dir / "video";
    fs::create_directories(video);
    std::vector<MetadataRow> rows;
    for (int i = 0; i < spec.videos; ++i) {
      std::snprintf(name, sizeof name, "video%03d", i);
      auto track = synth_video({seeds[1] + static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ULL,
                                spec.video_duration_s, spec.video_fps});
      media::write_color_log(track, video / (std::string(name) + ".csv"));
      rows.push_back({std::string(name) + ".csv", name, std::string("Synthetic video ") + name, ""});
      ++summary.videos;
    }
    write_metadata(rows, video / "metadata.csv");
  }

  if (spec.payloads) {
    const fs::path harvard = dir / "payloads" / "harvard";
    fs::create_directories(harvard);
    const auto& lists = harvard_lists();
    for (std::size_t l = 0; l < lists.size(); ++l) {
      std::snprintf(name, sizeof name, "list%02zu.txt", l + 1);
      std::ofstream out(harvard / name, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(Errc::io_error, "cannot write " + (harvard / name).string());
      for (const auto& s : lists[l]) out << s << '\n';
      ++summary.payload_files;
    }
    const auto img = test_image_pgm(spec.seed);
    std::ofstream out(dir / "payloads" / "image.pgm", std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write image payload");
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    ++summary.payload_files;
  }
  return summary;
}

}  // namespace lightleak::corpus
