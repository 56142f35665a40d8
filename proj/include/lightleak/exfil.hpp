#pragma once

// M-ary amplitude-shift keying over a bulb's infrared channel.
//
// Frame on the air, one symbol per clock period:
//
//   [start: 8 periods max/0 alternating] [payload symbols] [end: max 0 0 max]
//
// The receiver locks its clock by correlating against the start pattern,
// takes the start pattern's high and low levels as its amplitude reference,
// averages each period over the settled tail (after max(rise, fall)), and
// quantizes to the nearest of M levels with ties going to the lower level.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lightleak/emission.hpp"
#include "lightleak/optics.hpp"

namespace lightleak::exfil {

struct AskConfig {
  std::uint32_t levels = 4;  // M, a power of two in [2, 65536]
  double clock_period_s = 0.5;
  double rise_time_s = 0.45;
  double fall_time_s = 0.2;

  // Throws Errc::invalid_argument.
  void validate() const;
  int bits_per_symbol() const;
  // Start of the settled sampling region within a period.
  double settle_time_s() const;
};

struct FrameMetadata {
  std::uint64_t bit_length = 0;
  std::uint64_t symbol_count = 0;
  std::uint32_t padding_bits = 0;
};

struct AskFrame {
  std::vector<std::uint32_t> payload;  // levels in [0, M-1]
  FrameMetadata meta;
};

inline constexpr int kStartPeriods = 8;
inline constexpr int kEndPeriods = 4;

std::vector<std::uint32_t> start_pattern(const AskConfig& cfg);
std::vector<std::uint32_t> end_pattern(const AskConfig& cfg);

// Level i -> floor(i * 65535 / (M - 1)).
std::uint16_t level_to_power(std::uint32_t level, std::uint32_t levels);

// Bits are packed big-endian into log2(M)-bit symbols; the final partial
// symbol is zero-padded and the padding recorded in the metadata.
AskFrame symbol_map(std::span<const std::uint8_t> data, const AskConfig& cfg);

// log2(M) / clock period, bits per second.
double channel_bandwidth(const AskConfig& cfg);

struct ModulateOptions {
  double lead_in_s = 1.0;  // idle (dark) before the start pattern
  double tail_s = 1.0;     // idle after the end pattern
  double trace_rate_hz = 2000.0;
  bool ideal_trace = true;  // skip the ideal trace for long transmissions
};

struct Transmission {
  PacketStream stream;        // SetInfrared packets + slewed timeline
  optics::SampleStream ideal;  // noiseless infrared output at trace_rate_hz
  double frame_start_s = 0;
};

Transmission modulate(const AskFrame& frame, const AskConfig& cfg, const ModulateOptions& options = {});

struct DemodOptions {
  std::optional<std::uint64_t> expected_symbols;  // from out-of-band frame metadata
  double search_window_s = 6.0;  // how far into the trace the start pattern may begin
  double min_lock_score = 8.0;   // correlation z-score needed to accept a lock
};

struct DemodDiagnostics {
  double frame_start_s = 0;
  double lock_correlation = 0;
  double lock_score = 0;
  double high_reference = 0;
  double low_reference = 0;
  bool end_found = false;
  bool truncated = false;
};

struct Demodulated {
  std::vector<std::uint32_t> levels;
  DemodDiagnostics diagnostics;
};

// Throws Errc::no_start_symbol when no lock is found. A missing end symbol is
// reported through diagnostics (end_found = false, truncated = true).
Demodulated demodulate(const optics::SampleStream& trace, const AskConfig& cfg,
                       const DemodOptions& options = {});

// Inverse of symbol_map. Throws Errc::length_mismatch when the level count
// disagrees with the metadata, Errc::invalid_argument for out-of-range levels.
std::vector<std::uint8_t> decode_symbols(std::span<const std::uint32_t> levels, const AskConfig& cfg,
                                         const FrameMetadata& meta);

struct BitErrors {
  double rate = 0;
  std::uint64_t errors = 0;
  std::uint64_t bits = 0;
  bool length_mismatch = false;
};

// Hamming distance / bit count; the shorter input is zero-extended.
BitErrors bit_error_rate(std::span<const std::uint8_t> original,
                         std::span<const std::uint8_t> reconstructed);

}  // namespace lightleak::exfil
