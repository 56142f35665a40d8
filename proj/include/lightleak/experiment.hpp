#pragma once

// Experiment harness: library building, seeded attack and exfiltration grids
// and report emission. Every random draw derives from the config seed, and
// grid cells share per-item draws (start offsets, hues, noise) so that cells
// differ only in the swept parameter.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lightleak/exfil.hpp"
#include "lightleak/inference.hpp"
#include "lightleak/optics.hpp"

namespace lightleak::experiment {

enum class Scenario { audio_attack, video_attack, exfil };

const char* to_string(Scenario s);

struct SigmaCalibration {
  double distance_m = 5.0;
  std::uint32_t levels = 2048;
  double target_ber = 0.138;
  double lo = 1e-7;
  double hi = 1e-2;
  int iterations = 24;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::audio_attack;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "run";
  int threads = 0;  // 0: hardware concurrency

  // attacks
  std::filesystem::path corpus;   // media directory with metadata.csv
  std::filesystem::path library;  // built reference library
  int test_items = 0;             // 0: every usable item
  std::vector<std::string> test_ids;
  std::vector<double> windows_s;
  std::vector<std::string> hue_modes = {"static"};  // static | random
  double random_hue_period_ms = 500;
  bool warm_start = true;  // random hue: calibration table instead of learned bin maxima
  std::vector<inference::Matcher> matchers;
  inference::MatchOptions match;
  std::vector<double> vt_sweep;           // extra cells at the largest window
  std::vector<double> library_fractions;  // empty: {1.0}
  std::filesystem::path calibration;      // empty: built-in bulb calibration

  // exfil
  std::vector<std::filesystem::path> payloads;  // files or directories
  std::vector<std::uint32_t> levels;
  std::vector<double> distances_m;
  exfil::AskConfig modem;
  double sensor_rate_hz = 2000.0;
  std::optional<SigmaCalibration> sigma_calibration;
  bool write_reconstructed = true;

  optics::ChannelConfig channel;

  // Relative paths resolve against `base_dir`. Throws Errc::config_invalid.
  static ExperimentConfig from_json(const std::string& text, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
  std::string to_json() const;
  void validate() const;
};

struct MediaEntry {
  std::string id;
  std::filesystem::path path;
  media::MediaInfo info;
};

// metadata.csv when present, otherwise every media file of the kind sorted
// by name.
std::vector<MediaEntry> list_media(const std::filesystem::path& dir, inference::MediaKind kind);

struct BuildReport {
  std::size_t templates = 0;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
};

// Writes manifest.json + templates/ under out_dir; unreadable files are
// reported and skipped.
BuildReport build_library(const std::filesystem::path& corpus_dir, inference::MediaKind kind,
                          const std::filesystem::path& out_dir);

struct CellSummary {
  std::string hue_mode;
  std::string matcher;
  double window_s = 0;
  double visible_transmittance = 1;
  double library_fraction = 1;
  std::size_t items = 0;
  std::size_t failures = 0;
  double mean_rank = 0;
  double top1_rate = 0;
};

struct AttackSummary {
  std::vector<CellSummary> cells;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

// ranks.csv, summary.csv, genre_confusion.csv (audio) and run.json.
AttackSummary run_attack(const ExperimentConfig& cfg);

struct ExfilCell {
  std::uint32_t levels = 0;
  double distance_m = 0;
  std::uint64_t bits = 0;
  std::uint64_t errors = 0;
  double mean_ber = 0;  // mean over payload files
  std::size_t lock_failures = 0;
};

struct ExfilSummary {
  double noise_sigma = 0;
  std::optional<double> calibrated_ber;
  std::vector<ExfilCell> cells;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

// ber.csv, ber_summary.csv, reconstructed/ and run.json.
ExfilSummary run_exfil(const ExperimentConfig& cfg);

struct PayloadResult {
  double ber = 0;
  std::uint64_t bits = 0;
  std::uint64_t errors = 0;
  bool locked = true;
  bool truncated = false;
  std::vector<std::uint8_t> reconstructed;
};

// One payload through modulate -> observe -> demodulate -> decode.
PayloadResult transmit_payload(std::span<const std::uint8_t> data, const exfil::AskConfig& modem,
                               const optics::ChannelConfig& channel, double sensor_rate_hz);

// Mean BER over payloads at one (M, distance, sigma) with per-payload seeds.
double exfil_cell_ber(const std::vector<std::vector<std::uint8_t>>& payloads, const ExperimentConfig& cfg,
                      std::uint32_t levels, double distance_m, double sigma);

// Bisection on sigma so the calibration cell lands on the target BER.
double calibrate_sigma(const std::vector<std::vector<std::uint8_t>>& payloads, const ExperimentConfig& cfg,
                       const SigmaCalibration& cal, double* achieved = nullptr);

std::vector<std::vector<std::uint8_t>> load_payloads(const ExperimentConfig& cfg,
                                                     std::vector<std::string>* names = nullptr);

// Plot-data CSVs from a completed run directory into out_dir (defaults to
// run_dir/report). Throws Errc::missing_run.
std::vector<std::filesystem::path> report(const std::filesystem::path& run_dir,
                                          const std::filesystem::path& out_dir = {});

// Deterministic per-purpose seed derived from the config seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace lightleak::experiment
