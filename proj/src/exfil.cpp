#include "lightleak/exfil.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "lightleak/error.hpp"

namespace lightleak::exfil {
namespace {

// Noiseless received waveform of a run of targets, one per period, starting
// from a dark bulb. Sample k sits at (k + 0.5) / rate.
std::vector<double> ideal_waveform(std::span<const double> targets, double period, double rate,
                                   const SlewRates& rates) {
  const auto n = static_cast<std::size_t>(std::floor(targets.size() * period * rate + 1e-9));
  std::vector<double> out(n);
  double level = 0.0;
  double clock = 0.0;
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = (static_cast<double>(k) + 0.5) / rate;
    // finish each elapsed period's slew before heading for the next target
    while (j + 1 < targets.size() && t >= static_cast<double>(j + 1) * period) {
      const double boundary = static_cast<double>(j + 1) * period;
      level = optics::slew(level, targets[j], boundary - clock, rates);
      clock = boundary;
      ++j;
    }
    level = optics::slew(level, targets[j], t - clock, rates);
    clock = t;
    out[k] = level;
  }
  return out;
}

struct Moments {
  std::vector<double> sum, sq;
  explicit Moments(std::span<const double> x) : sum(x.size() + 1, 0.0), sq(x.size() + 1, 0.0) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      sum[i + 1] = sum[i] + x[i];
      sq[i + 1] = sq[i] + x[i] * x[i];
    }
  }
};

// Pearson correlation of x[off, off + tpl.size()) against a template whose
// mean and centered norm are precomputed.
double pearson(std::span<const double> x, const Moments& m, std::size_t off, std::span<const double> tpl,
               double tpl_mean, double tpl_norm) {
  const std::size_t len = tpl.size();
  const double n = static_cast<double>(len);
  const double sx = m.sum[off + len] - m.sum[off];
  const double sxx = m.sq[off + len] - m.sq[off];
  const double var = sxx - sx * sx / n;
  if (!(var > 1e-18 * n) || !(tpl_norm > 0)) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < len; ++i) dot += x[off + i] * (tpl[i] - tpl_mean);
  return dot / (std::sqrt(var) * tpl_norm);
}

void centered(std::span<const double> tpl, double& mean, double& norm) {
  mean = 0.0;
  for (double v : tpl) mean += v;
  mean /= static_cast<double>(tpl.size());
  norm = 0.0;
  for (double v : tpl) norm += (v - mean) * (v - mean);
  norm = std::sqrt(norm);
}

std::vector<double> bin_average(std::span<const double> x, std::size_t width) {
  std::vector<double> out(x.size() / width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < width; ++j) acc += x[i * width + j];
    out[i] = acc / static_cast<double>(width);
  }
  return out;
}

std::uint32_t quantize(double x, std::uint32_t levels) {
  const double top = static_cast<double>(levels - 1);
  const double scaled = std::clamp(x, 0.0, 1.0) * top;
  // nearest level, exact halves go down
  const double q = std::ceil(scaled - 0.5);
  return static_cast<std::uint32_t>(std::clamp(q, 0.0, top));
}

}  // namespace

void AskConfig::validate() const {
  if (levels < 2 || levels > 65536 || !std::has_single_bit(levels)) {
    throw Error(Errc::invalid_argument, "M must be a power of two in [2, 65536]");
  }
  if (!(rise_time_s >= 0) || !(fall_time_s >= 0)) {
    throw Error(Errc::invalid_argument, "rise and fall times must be >= 0");
  }
  if (!(clock_period_s > settle_time_s())) {
    throw Error(Errc::invalid_argument, "clock period must exceed max(rise, fall)");
  }
}

int AskConfig::bits_per_symbol() const { return std::countr_zero(levels); }

double AskConfig::settle_time_s() const { return std::max(rise_time_s, fall_time_s); }

std::vector<std::uint32_t> start_pattern(const AskConfig& cfg) {
  std::vector<std::uint32_t> p(kStartPeriods);
  for (int i = 0; i < kStartPeriods; ++i) p[i] = i % 2 == 0 ? cfg.levels - 1 : 0;
  return p;
}

std::vector<std::uint32_t> end_pattern(const AskConfig& cfg) {
  return {cfg.levels - 1, 0, 0, cfg.levels - 1};
}

std::uint16_t level_to_power(std::uint32_t level, std::uint32_t levels) {
  if (levels < 2 || level >= levels) throw Error(Errc::invalid_argument, "level out of range");
  return static_cast<std::uint16_t>(static_cast<std::uint64_t>(level) * 65535u / (levels - 1));
}

AskFrame symbol_map(std::span<const std::uint8_t> data, const AskConfig& cfg) {
  cfg.validate();
  const int k = cfg.bits_per_symbol();
  AskFrame frame;
  frame.meta.bit_length = static_cast<std::uint64_t>(data.size()) * 8;
  frame.meta.symbol_count = (frame.meta.bit_length + k - 1) / k;
  frame.meta.padding_bits = static_cast<std::uint32_t>(frame.meta.symbol_count * k - frame.meta.bit_length);
  frame.payload.reserve(frame.meta.symbol_count);

  std::uint32_t acc = 0;
  int have = 0;
  for (std::uint8_t byte : data) {
    for (int b = 7; b >= 0; --b) {
      acc = (acc << 1) | ((byte >> b) & 1u);
      if (++have == k) {
        frame.payload.push_back(acc);
        acc = 0;
        have = 0;
      }
    }
  }
  if (have > 0) frame.payload.push_back(acc << (k - have));
  return frame;
}

double channel_bandwidth(const AskConfig& cfg) {
  cfg.validate();
  return static_cast<double>(cfg.bits_per_symbol()) / cfg.clock_period_s;
}

Transmission modulate(const AskFrame& frame, const AskConfig& cfg, const ModulateOptions& options) {
  cfg.validate();
  if (!(options.lead_in_s >= 0) || !(options.tail_s >= 0) || !(options.trace_rate_hz > 0)) {
    throw Error(Errc::invalid_argument, "lead-in, tail and trace rate must be non-negative");
  }
  for (std::uint32_t s : frame.payload) {
    if (s >= cfg.levels) throw Error(Errc::invalid_argument, "payload level out of range");
  }

  std::vector<std::uint32_t> symbols = start_pattern(cfg);
  symbols.insert(symbols.end(), frame.payload.begin(), frame.payload.end());
  const auto tail = end_pattern(cfg);
  symbols.insert(symbols.end(), tail.begin(), tail.end());

  Transmission tx;
  tx.frame_start_s = options.lead_in_s;
  auto& stream = tx.stream;
  stream.timeline.infrared_slew = SlewRates{cfg.rise_time_s, cfg.fall_time_s};
  auto emit = [&](double t, std::uint16_t power) {
    auto packet = protocol::make_packet(protocol::SetInfrared{power});
    stream.timeline.events.push_back({t, state_from_packet(packet)});
    stream.packets.push_back(std::move(packet));
  };

  // the bulb idles dark before and after the frame
  if (options.lead_in_s > 0) emit(0.0, 0);
  for (std::size_t j = 0; j < symbols.size(); ++j) {
    emit(tx.frame_start_s + static_cast<double>(j) * cfg.clock_period_s, level_to_power(symbols[j], cfg.levels));
  }
  const double frame_end = tx.frame_start_s + static_cast<double>(symbols.size()) * cfg.clock_period_s;
  emit(frame_end, 0);
  stream.timeline.end_time = frame_end + options.tail_s;

  if (options.ideal_trace) {
    tx.ideal = optics::observe(stream.timeline, {optics::SensorKind::infrared, options.trace_rate_hz}, {},
                               colorlab::ResponseCalibration::lifx_a19());
  }
  return tx;
}

Demodulated demodulate(const optics::SampleStream& trace, const AskConfig& cfg, const DemodOptions& options) {
  cfg.validate();
  if (trace.dims != 1) throw Error(Errc::invalid_argument, "infrared trace must be one-dimensional");
  const std::size_t n = trace.size();
  if (n < 2) throw Error(Errc::no_start_symbol, "trace too short");

  const double rate = static_cast<double>(n - 1) / (trace.t.back() - trace.t.front());
  const double period = cfg.clock_period_s;
  const SlewRates rates{cfg.rise_time_s, cfg.fall_time_s};
  const std::span<const double> x(trace.values);

  // Template of the start pattern as the receiver would see it.
  std::vector<double> targets(kStartPeriods);
  for (int i = 0; i < kStartPeriods; ++i) targets[i] = i % 2 == 0 ? 1.0 : 0.0;
  const std::vector<double> tpl = ideal_waveform(targets, period, rate, rates);
  const std::size_t len = tpl.size();
  if (len == 0 || n < len) throw Error(Errc::no_start_symbol, "trace shorter than the start pattern");
  const std::size_t last_offset =
      std::min(n - len, static_cast<std::size_t>(std::max(0.0, options.search_window_s) * rate));

  // Coarse search on 10 ms bins, then refine at full rate around the winner.
  const std::size_t width = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(rate * 0.01)));
  std::size_t best_off = 0;
  {
    const std::vector<double> xb = bin_average(x.subspan(0, std::min(n, last_offset + len + width)), width);
    const std::vector<double> tb = bin_average(tpl, width);
    double tm, tn;
    centered(tb, tm, tn);
    const Moments mb(xb);
    double best = -2.0;
    for (std::size_t o = 0; o + tb.size() <= xb.size() && o * width <= last_offset; ++o) {
      const double r = pearson(xb, mb, o, tb, tm, tn);
      if (r > best) {
        best = r;
        best_off = o * width;
      }
    }
  }
  double tm, tn;
  centered(tpl, tm, tn);
  const std::size_t lo = best_off >= width ? best_off - width : 0;
  const std::size_t hi = std::min(last_offset, best_off + width);
  const Moments m(x.subspan(0, std::min(n, hi + len)));
  double best_r = -2.0;
  std::size_t lock = lo;
  for (std::size_t o = lo; o <= hi; ++o) {
    const double r = pearson(x, m, o, tpl, tm, tn);
    if (r > best_r) {
      best_r = r;
      lock = o;
    }
  }

  Demodulated out;
  auto& diag = out.diagnostics;
  diag.lock_correlation = best_r;
  diag.lock_score = best_r * std::sqrt(static_cast<double>(len));
  diag.frame_start_s = trace.t[lock] - 0.5 / rate;
  if (!(diag.lock_score >= options.min_lock_score)) {
    throw Error(Errc::no_start_symbol, "no start pattern lock in the search window");
  }

  // Settled median of period j; NaN once the trace runs out. The sensor clamps
  // at zero, which biases a mean upward near the dark level but not a median.
  const double guard = cfg.settle_time_s();
  std::vector<double> window;
  auto settled = [&](std::size_t j) {
    const double a = diag.frame_start_s + static_cast<double>(j) * period + guard;
    const double b = diag.frame_start_s + static_cast<double>(j + 1) * period;
    if (b > trace.t.back() + 0.5 / rate) return std::numeric_limits<double>::quiet_NaN();
    const auto first = std::lower_bound(trace.t.begin(), trace.t.end(), a) - trace.t.begin();
    const auto last = std::lower_bound(trace.t.begin(), trace.t.end(), b) - trace.t.begin();
    if (last <= first) return std::numeric_limits<double>::quiet_NaN();
    window.assign(x.begin() + first, x.begin() + last);
    const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
    std::nth_element(window.begin(), mid, window.end());
    if (window.size() % 2) return *mid;
    return 0.5 * (*mid + *std::max_element(window.begin(), mid));
  };

  double high = 0.0, low = 0.0;
  for (int i = 0; i < kStartPeriods; ++i) (i % 2 == 0 ? high : low) += settled(i);
  high /= kStartPeriods / 2;
  low /= kStartPeriods / 2;
  diag.high_reference = high;
  diag.low_reference = low;
  if (!(high > low)) throw Error(Errc::no_start_symbol, "start pattern has no amplitude swing");

  auto level_at = [&](std::size_t j, bool& ok) {
    const double v = settled(j);
    ok = !std::isnan(v);
    return ok ? quantize((v - low) / (high - low), cfg.levels) : 0u;
  };

  const auto end = end_pattern(cfg);
  std::vector<std::uint32_t> read;
  bool ok = true;
  if (options.expected_symbols) {
    for (std::uint64_t j = 0; j < *options.expected_symbols; ++j) {
      const auto v = level_at(kStartPeriods + j, ok);
      if (!ok) break;
      read.push_back(v);
    }
    if (ok) {
      diag.end_found = true;
      for (std::size_t e = 0; e < end.size() && diag.end_found; ++e) {
        const auto v = level_at(kStartPeriods + read.size() + e, ok);
        diag.end_found = ok && v == end[e];
      }
    }
    diag.truncated = read.size() < *options.expected_symbols;
    out.levels = std::move(read);
    return out;
  }

  // Without the symbol count, read to the end of the trace and cut at the
  // last end pattern followed by an idle period or the end of the trace.
  for (std::size_t j = kStartPeriods;; ++j) {
    const auto v = level_at(j, ok);
    if (!ok) break;
    read.push_back(v);
  }
  for (std::size_t i = read.size(); i-- > 0;) {
    if (i + end.size() > read.size()) continue;
    if (!std::equal(end.begin(), end.end(), read.begin() + static_cast<std::ptrdiff_t>(i))) continue;
    const std::size_t after = i + end.size();
    if (after == read.size() || read[after] == 0) {
      diag.end_found = true;
      read.resize(i);
      break;
    }
  }
  diag.truncated = !diag.end_found;
  out.levels = std::move(read);
  return out;
}

std::vector<std::uint8_t> decode_symbols(std::span<const std::uint32_t> levels, const AskConfig& cfg,
                                         const FrameMetadata& meta) {
  cfg.validate();
  const int k = cfg.bits_per_symbol();
  if (levels.size() != meta.symbol_count || meta.symbol_count * k != meta.bit_length + meta.padding_bits ||
      meta.bit_length % 8 != 0) {
    throw Error(Errc::length_mismatch, "level count disagrees with frame metadata");
  }
  std::vector<std::uint8_t> out;
  out.reserve(meta.bit_length / 8);
  std::uint64_t produced = 0;
  std::uint32_t acc = 0;
  int have = 0;
  for (std::uint32_t v : levels) {
    if (v >= cfg.levels) throw Error(Errc::invalid_argument, "level out of range");
    for (int b = k - 1; b >= 0 && produced < meta.bit_length; --b, ++produced) {
      acc = (acc << 1) | ((v >> b) & 1u);
      if (++have == 8) {
        out.push_back(static_cast<std::uint8_t>(acc));
        acc = 0;
        have = 0;
      }
    }
  }
  return out;
}

BitErrors bit_error_rate(std::span<const std::uint8_t> original, std::span<const std::uint8_t> reconstructed) {
  BitErrors r;
  const std::size_t n = std::max(original.size(), reconstructed.size());
  r.length_mismatch = original.size() != reconstructed.size();
  r.bits = static_cast<std::uint64_t>(n) * 8;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t a = i < original.size() ? original[i] : 0;
    const std::uint8_t b = i < reconstructed.size() ? reconstructed[i] : 0;
    r.errors += static_cast<std::uint64_t>(std::popcount(static_cast<unsigned>(a ^ b)));
  }
  r.rate = r.bits ? static_cast<double>(r.errors) / static_cast<double>(r.bits) : 0.0;
  return r;
}

}  // namespace lightleak::exfil
