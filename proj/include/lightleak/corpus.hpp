#pragma once

// Seeded synthetic media so experiments run without copyrighted material:
// envelope "songs" in four genres, piecewise-constant color "videos", the
// first ten Harvard sentence lists and a generated 128x128 test image.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lightleak/media.hpp"

namespace lightleak::corpus {

struct SongSpec {
  std::uint64_t seed = 0;
  std::string genre = "rock";  // country | dance | jazz | rock
  double duration_s = 180.0;
  double sample_rate = 1000.0;
};

media::AudioTrack synth_song(const SongSpec& spec);

struct VideoSpec {
  std::uint64_t seed = 0;
  double duration_s = 600.0;
  double frame_rate = 4.0;
};

media::VideoColorTrack synth_video(const VideoSpec& spec);

// 10 lists of 10 sentences.
const std::vector<std::vector<std::string>>& harvard_lists();

// Binary PGM (P5), 128x128, 8-bit.
std::vector<std::uint8_t> test_image_pgm(std::uint64_t seed = 0);

struct CorpusSpec {
  std::uint64_t seed = 1;
  int songs = 50;
  int videos = 40;
  double song_duration_s = 180.0;
  double video_duration_s = 600.0;
  double audio_rate = 1000.0;
  double video_fps = 4.0;
  bool payloads = true;
};

struct CorpusSummary {
  int songs = 0;
  int videos = 0;
  int payload_files = 0;
};

// Writes audio/<id>.wav, video/<id>.csv (each with metadata.csv) and
// payloads/harvard/listNN.txt + payloads/image.pgm under `dir`.
CorpusSummary generate(const CorpusSpec& spec, const std::filesystem::path& dir);

// metadata.csv rows: file,id,title,genre
struct MetadataRow {
  std::string file, id, title, genre;
};
std::vector<MetadataRow> read_metadata(const std::filesystem::path& path);
void write_metadata(const std::vector<MetadataRow>& rows, const std::filesystem::path& path);

}  // namespace lightleak::corpus
