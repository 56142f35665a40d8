#include "lightleak/lightleak.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "lightleak/colorlab.hpp"
#include "lightleak/corpus.hpp"
#include "lightleak/error.hpp"
#include "lightleak/exfil.hpp"
#include "lightleak/experiment.hpp"
#include "lightleak/inference.hpp"
#include "lightleak/protocol.hpp"

struct ll_calibration {
  lightleak::colorlab::ResponseCalibration cal;
};

struct ll_library {
  lightleak::inference::ReferenceLibrary lib;
};

namespace {

using namespace lightleak;

thread_local std::string g_last_error;

ll_status fail(ll_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs body and converts any exception into a status code.
template <class F>
ll_status guarded(F&& body) {
  try {
    body();
    return LL_OK;
  } catch (const Error& e) {
    return fail(static_cast<ll_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(LL_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(LL_INTERNAL, e.what());
  } catch (...) {
    return fail(LL_INTERNAL, "unknown exception");
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw Error(Errc::invalid_argument, what);
}

template <class T>
T* copy_out(const T* data, std::size_t count) {
  auto* out = static_cast<T*>(std::malloc(std::max<std::size_t>(count, 1) * sizeof(T)));
  if (out == nullptr) throw std::bad_alloc();
  if (count > 0) std::memcpy(out, data, count * sizeof(T));
  return out;
}

protocol::Packet to_packet(const ll_packet& p) {
  protocol::Packet out;
  out.frame.size = p.size;
  out.frame.protocol_flags = p.protocol_flags;
  out.frame.source = p.source;
  out.address.target = p.target;
  out.address.flags = p.flags;
  out.address.sequence = p.sequence;
  out.message_type = p.message_type;
  if (p.message_type == protocol::kSetColorType) {
    out.payload = protocol::SetColor{p.hue, p.saturation, p.brightness, p.kelvin, p.duration_ms};
  } else if (p.message_type == protocol::kSetInfraredType) {
    out.payload = protocol::SetInfrared{p.infrared_level};
  } else {
    throw Error(Errc::invalid_argument, "only SetColor and SetInfrared can be encoded through the C API");
  }
  return out;
}

void from_packet(const protocol::Packet& in, ll_packet& p) {
  std::memset(&p, 0, sizeof p);
  p.size = in.frame.size;
  p.protocol_flags = in.frame.protocol_flags;
  p.source = in.frame.source;
  p.target = in.address.target;
  p.flags = in.address.flags;
  p.sequence = in.address.sequence;
  p.message_type = in.message_type;
  if (const auto* c = std::get_if<protocol::SetColor>(&in.payload)) {
    p.hue = c->hue;
    p.saturation = c->saturation;
    p.brightness = c->brightness;
    p.kelvin = c->kelvin;
    p.duration_ms = c->duration_ms;
  } else if (const auto* ir = std::get_if<protocol::SetInfrared>(&in.payload)) {
    p.infrared_level = ir->power_level;
  }
}

exfil::AskConfig ask(uint32_t levels) {
  exfil::AskConfig cfg;
  cfg.levels = levels;
  cfg.validate();
  return cfg;
}

}  // namespace

extern "C" {

const char* ll_status_string(ll_status status) {
  switch (status) {
    case LL_OK:
      return "Ok";
    case LL_INTERNAL:
      return "Internal";
    default:
      if (status >= LL_INVALID_ARGUMENT && status <= LL_KIND_MISMATCH) {
        return to_string(static_cast<Errc>(static_cast<int>(status)));
      }
      return "unknown_status";
  }
}

const char* ll_last_error_message(void) { return g_last_error.c_str(); }

const char* ll_version(void) { return "1.0.0"; }

void ll_free_buffer(void* buffer) { std::free(buffer); }

void ll_packet_init(ll_packet* packet, uint16_t message_type) {
  if (packet == nullptr) return;
  std::memset(packet, 0, sizeof *packet);
  packet->protocol_flags = protocol::kDefaultProtocolFlags;
  packet->message_type = message_type;
  packet->kelvin = 3500;
}

ll_status ll_packet_encode(const ll_packet* packet, uint8_t* out, size_t out_cap, size_t* out_len) {
  return guarded([&] {
    require(packet != nullptr && out_len != nullptr, "null argument");
    const auto bytes = protocol::encode_packet(to_packet(*packet));
    *out_len = bytes.size();
    require(out != nullptr && out_cap >= bytes.size(), "output buffer too small");
    std::memcpy(out, bytes.data(), bytes.size());
  });
}

ll_status ll_packet_decode(const uint8_t* bytes, size_t len, ll_packet* packet) {
  bool unknown = false;
  const ll_status status = guarded([&] {
    require(packet != nullptr && (bytes != nullptr || len == 0), "null argument");
    const auto decoded = protocol::decode_packet({bytes, len});
    from_packet(decoded, *packet);
    unknown = decoded.is_unknown_type();
  });
  if (status == LL_OK && unknown) {
    return fail(LL_UNKNOWN_MESSAGE_TYPE, "unknown message type " + std::to_string(packet->message_type));
  }
  return status;
}

ll_status ll_calibration_default(ll_calibration** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = new ll_calibration{colorlab::ResponseCalibration::lifx_a19()};
  });
}

ll_status ll_calibration_load(const char* path, ll_calibration** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new ll_calibration{colorlab::load_calibration(path)};
  });
}

ll_status ll_calibration_save(const ll_calibration* cal, const char* path) {
  return guarded([&] {
    require(cal != nullptr && path != nullptr, "null argument");
    colorlab::save_calibration(cal->cal, path);
  });
}

void ll_calibration_free(ll_calibration* cal) { delete cal; }

ll_status ll_rgb_to_hsb(const double rgb[3], double hsb[3]) {
  return guarded([&] {
    require(rgb != nullptr && hsb != nullptr, "null argument");
    const auto c = colorlab::rgb_to_hsb({rgb[0], rgb[1], rgb[2]});
    hsb[0] = c.hue;
    hsb[1] = c.saturation;
    hsb[2] = c.brightness;
  });
}

ll_status ll_hsb_to_rgb(const double hsb[3], double rgb[3]) {
  return guarded([&] {
    require(rgb != nullptr && hsb != nullptr, "null argument");
    const auto c = colorlab::hsb_to_rgb({hsb[0], hsb[1], hsb[2]});
    rgb[0] = c.r;
    rgb[1] = c.g;
    rgb[2] = c.b;
  });
}

ll_status ll_sensor_response(const ll_calibration* cal, const double rgb[3], double response[3]) {
  return guarded([&] {
    require(cal != nullptr && rgb != nullptr && response != nullptr, "null argument");
    const auto d = colorlab::sensor_response({rgb[0], rgb[1], rgb[2]}, cal->cal);
    response[0] = d.dr;
    response[1] = d.dg;
    response[2] = d.db;
  });
}

ll_status ll_correct_response(const ll_calibration* cal, const double response[3], double corrected[3]) {
  return guarded([&] {
    require(cal != nullptr && response != nullptr && corrected != nullptr, "null argument");
    const auto g = colorlab::correct_response({response[0], response[1], response[2]}, cal->cal);
    corrected[0] = g.gr;
    corrected[1] = g.gg;
    corrected[2] = g.gb;
  });
}

ll_status ll_identify_hue(const ll_calibration* cal, const double response[3], int* hue_bin) {
  return guarded([&] {
    require(cal != nullptr && response != nullptr && hue_bin != nullptr, "null argument");
    *hue_bin = colorlab::identify_hue({response[0], response[1], response[2]}, cal->cal);
  });
}

ll_status ll_luminance_sensitivity(const ll_calibration* cal, int hue_bin, double* out) {
  return guarded([&] {
    require(cal != nullptr && out != nullptr, "null argument");
    require(hue_bin >= 0 && hue_bin < colorlab::kHueBins, "hue bin out of range");
    *out = colorlab::luminance_sensitivity(hue_bin, cal->cal);
  });
}

ll_status ll_dtw(const double* a, size_t n, const double* b, size_t m, long band, double* out) {
  return guarded([&] {
    require(out != nullptr && (a != nullptr || n == 0) && (b != nullptr || m == 0), "null argument");
    *out = inference::dtw({a, n}, {b, m}, {.band = band});
  });
}

ll_status ll_osb(const double* query, size_t n, const double* target, size_t m, double skip_penalty, long band,
                 double* out) {
  return guarded([&] {
    require(out != nullptr && (query != nullptr || n == 0) && (target != nullptr || m == 0), "null argument");
    *out = inference::osb({query, n}, {target, m}, skip_penalty, band);
  });
}

ll_status ll_mdtw(const double* a, size_t n, const double* b, size_t m, long band, double* out) {
  return guarded([&] {
    require(out != nullptr && (a != nullptr || n == 0) && (b != nullptr || m == 0), "null argument");
    std::vector<std::array<double, 3>> va(n), vb(m);
    if (n > 0) std::memcpy(va.data(), a, n * 3 * sizeof(double));
    if (m > 0) std::memcpy(vb.data(), b, m * 3 * sizeof(double));
    *out = inference::mdtw(va, vb, {.band = band});
  });
}

ll_status ll_library_open(const char* dir, ll_library** out) {
  return guarded([&] {
    require(dir != nullptr && out != nullptr, "null argument");
    *out = new ll_library{inference::ReferenceLibrary::load(dir)};
  });
}

size_t ll_library_size(const ll_library* lib) { return lib != nullptr ? lib->lib.size() : 0; }

void ll_library_free(ll_library* lib) { delete lib; }

ll_status ll_library_match(const ll_library* lib, const double* query, size_t length, int dims,
                           const char* matcher, double band_fraction, ll_match_entry* entries, size_t cap,
                           size_t* count) {
  return guarded([&] {
    require(lib != nullptr && query != nullptr && matcher != nullptr && count != nullptr, "null argument");
    require(dims == 1 || dims == 3, "dims must be 1 or 3");
    require(entries != nullptr || cap == 0, "null entries with nonzero capacity");
    inference::Series series;
    series.dims = dims;
    series.values.assign(query, query + length * static_cast<size_t>(dims));
    inference::MatchOptions options;
    options.matcher = inference::matcher_from_string(matcher);
    options.band_fraction = band_fraction;
    const auto kind = dims == 1 ? inference::MediaKind::audio : inference::MediaKind::video;
    const auto result = inference::match_profile(series, lib->lib, kind, options);
    *count = result.ranked.size();
    for (size_t i = 0; i < std::min(cap, result.ranked.size()); ++i) {
      std::memset(entries[i].id, 0, sizeof entries[i].id);
      std::strncpy(entries[i].id, result.ranked[i].id.c_str(), sizeof entries[i].id - 1);
      entries[i].distance = result.ranked[i].distance;
    }
  });
}

ll_status ll_hue_coverage(uint64_t draws, int bins, double* p_single, double* p_all) {
  return guarded([&] {
    require(p_single != nullptr && p_all != nullptr, "null argument");
    const auto c = inference::hue_coverage(draws, bins);
    *p_single = c.p_single;
    *p_all = c.p_all;
  });
}

ll_status ll_coverage_time(double peaks_per_minute, double target_p_all, int bins, uint64_t* peaks,
                           double* minutes) {
  return guarded([&] {
    require(peaks != nullptr && minutes != nullptr, "null argument");
    const auto e = inference::coverage_time_estimate(peaks_per_minute, target_p_all, bins);
    *peaks = e.peaks;
    *minutes = e.minutes;
  });
}

ll_status ll_channel_bandwidth(uint32_t levels, double clock_period_s, double* bits_per_second) {
  return guarded([&] {
    require(bits_per_second != nullptr, "null argument");
    auto cfg = ask(levels);
    cfg.clock_period_s = clock_period_s;
    cfg.rise_time_s = std::min(cfg.rise_time_s, clock_period_s * 0.9);
    cfg.fall_time_s = std::min(cfg.fall_time_s, clock_period_s * 0.4);
    *bits_per_second = exfil::channel_bandwidth(cfg);
  });
}

ll_status ll_symbol_map(const uint8_t* data, size_t len, uint32_t levels, uint32_t** levels_out, size_t* count,
                        uint32_t* padding_bits) {
  return guarded([&] {
    require((data != nullptr || len == 0) && levels_out != nullptr && count != nullptr, "null argument");
    const auto frame = exfil::symbol_map({data, len}, ask(levels));
    *levels_out = copy_out(frame.payload.data(), frame.payload.size());
    *count = frame.payload.size();
    if (padding_bits != nullptr) *padding_bits = frame.meta.padding_bits;
  });
}

ll_status ll_decode_symbols(const uint32_t* symbols, size_t count, uint32_t levels, uint64_t bit_length,
                            uint32_t padding_bits, uint8_t** data_out, size_t* len) {
  return guarded([&] {
    require((symbols != nullptr || count == 0) && data_out != nullptr && len != nullptr, "null argument");
    exfil::FrameMetadata meta;
    meta.bit_length = bit_length;
    meta.symbol_count = count;
    meta.padding_bits = padding_bits;
    const auto bytes = exfil::decode_symbols({symbols, count}, ask(levels), meta);
    *data_out = copy_out(bytes.data(), bytes.size());
    *len = bytes.size();
  });
}

ll_status ll_bit_error_rate(const uint8_t* a, size_t a_len, const uint8_t* b, size_t b_len, double* ber) {
  return guarded([&] {
    require((a != nullptr || a_len == 0) && (b != nullptr || b_len == 0) && ber != nullptr, "null argument");
    *ber = exfil::bit_error_rate({a, a_len}, {b, b_len}).rate;
  });
}

ll_status ll_exfil_packets(const uint8_t* data, size_t len, uint32_t levels, uint8_t** packets_out, size_t* bytes,
                           size_t* packet_count) {
  return guarded([&] {
    require((data != nullptr || len == 0) && packets_out != nullptr && bytes != nullptr, "null argument");
    const auto cfg = ask(levels);
    const auto tx = exfil::modulate(exfil::symbol_map({data, len}, cfg), cfg, {.ideal_trace = false});
    std::vector<uint8_t> wire;
    for (const auto& p : tx.stream.packets) {
      const auto b = protocol::encode_packet(p);
      wire.insert(wire.end(), b.begin(), b.end());
    }
    *packets_out = copy_out(wire.data(), wire.size());
    *bytes = wire.size();
    if (packet_count != nullptr) *packet_count = tx.stream.packets.size();
  });
}

ll_status ll_gen_corpus(const char* out_dir, uint64_t seed, int songs, int videos) {
  return guarded([&] {
    require(out_dir != nullptr, "null argument");
    require(songs >= 0 && videos >= 0, "negative item count");
    corpus::CorpusSpec spec;
    spec.seed = seed;
    spec.songs = songs;
    spec.videos = videos;
    corpus::generate(spec, out_dir);
  });
}

ll_status ll_build_library(const char* corpus_dir, const char* kind, const char* out_dir, size_t* templates,
                           size_t* failures) {
  return guarded([&] {
    require(corpus_dir != nullptr && kind != nullptr && out_dir != nullptr, "null argument");
    const auto report = experiment::build_library(corpus_dir, inference::media_kind_from_string(kind), out_dir);
    if (templates != nullptr) *templates = report.templates;
    if (failures != nullptr) *failures = report.errors.size();
  });
}

ll_status ll_run_experiment(const char* config_path, const char* scenario, const uint64_t* seed,
                            const char* out_dir) {
  return guarded([&] {
    require(config_path != nullptr, "null argument");
    auto cfg = experiment::ExperimentConfig::load(config_path);
    if (scenario != nullptr && std::string(scenario) != experiment::to_string(cfg.scenario)) {
      throw Error(Errc::config_invalid, std::string("config scenario is ") + experiment::to_string(cfg.scenario) +
                                            ", expected " + scenario);
    }
    if (seed != nullptr) cfg.seed = *seed;
    if (out_dir != nullptr) cfg.output_dir = out_dir;
    cfg.validate();
    std::vector<std::string> errors;
    if (cfg.scenario == experiment::Scenario::exfil) {
      errors = experiment::run_exfil(cfg).errors;
    } else {
      errors = experiment::run_attack(cfg).errors;
    }
    if (!errors.empty()) {
      std::string message = std::to_string(errors.size()) + " cell error(s); first: " + errors.front();
      throw std::runtime_error(message);
    }
  });
}

ll_status ll_report(const char* run_dir, const char* out_dir) {
  return guarded([&] {
    require(run_dir != nullptr, "null argument");
    experiment::report(run_dir, out_dir ? std::filesystem::path(out_dir) : std::filesystem::path());
  });
}

}  // extern "C"
