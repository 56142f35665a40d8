/* C interface to the lightleak core.
 *
 * Every call returns an ll_status. On failure a description is available from
 * ll_last_error_message() on the same thread until the next failing call.
 * Objects are opaque handles released with their matching _free function;
 * buffers handed out by the library are released with ll_free_buffer. */
#ifndef LIGHTLEAK_H
#define LIGHTLEAK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LL_API __declspec(dllexport)
#elif defined(__GNUC__)
#define LL_API __attribute__((visibility("default")))
#else
#define LL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ll_status {
  LL_OK = 0,
  LL_INVALID_ARGUMENT = 1,
  LL_TRUNCATED_PACKET = 2,
  LL_UNKNOWN_MESSAGE_TYPE = 3, /* non-fatal: the packet decoded with a raw payload */
  LL_CALIBRATION_INVALID = 4,
  LL_DUPLICATE_KNOT = 5,
  LL_DARK_SAMPLE = 6,
  LL_EMPTY_INPUT = 7,
  LL_ALL_DARK = 8,
  LL_EMPTY_LIBRARY = 9,
  LL_NO_START_SYMBOL = 10,
  LL_NO_END_SYMBOL = 11,
  LL_LENGTH_MISMATCH = 12,
  LL_MISSING_GENRE = 13,
  LL_MISSING_RUN = 14,
  LL_IO_ERROR = 15,
  LL_CONFIG_INVALID = 16,
  LL_KIND_MISMATCH = 17,
  LL_INTERNAL = 99
} ll_status;

LL_API const char* ll_status_string(ll_status status);
LL_API const char* ll_last_error_message(void);
LL_API const char* ll_version(void);
LL_API void ll_free_buffer(void* buffer);

/* ---- protocol ---------------------------------------------------------- */

enum { LL_MSG_SET_COLOR = 102, LL_MSG_SET_INFRARED = 122 };

typedef struct ll_packet {
  uint16_t size;           /* filled by encode/decode */
  uint16_t protocol_flags; /* 0x1400 by default */
  uint32_t source;
  uint64_t target;
  uint8_t flags;
  uint8_t sequence;
  uint16_t message_type;
  /* SetColor */
  uint16_t hue, saturation, brightness, kelvin;
  uint32_t duration_ms;
  /* SetInfrared */
  uint16_t infrared_level;
} ll_packet;

LL_API void ll_packet_init(ll_packet* packet, uint16_t message_type);
/* Writes the encoded bytes to out (capacity out_cap) and their count to out_len. */
LL_API ll_status ll_packet_encode(const ll_packet* packet, uint8_t* out, size_t out_cap, size_t* out_len);
/* LL_UNKNOWN_MESSAGE_TYPE leaves the header fields filled. */
LL_API ll_status ll_packet_decode(const uint8_t* bytes, size_t len, ll_packet* packet);

/* ---- color ------------------------------------------------------------- */

typedef struct ll_calibration ll_calibration;

LL_API ll_status ll_calibration_default(ll_calibration** out);
LL_API ll_status ll_calibration_load(const char* path, ll_calibration** out);
LL_API ll_status ll_calibration_save(const ll_calibration* cal, const char* path);
LL_API void ll_calibration_free(ll_calibration* cal);

LL_API ll_status ll_rgb_to_hsb(const double rgb[3], double hsb[3]);
LL_API ll_status ll_hsb_to_rgb(const double hsb[3], double rgb[3]);
LL_API ll_status ll_sensor_response(const ll_calibration* cal, const double rgb[3], double response[3]);
LL_API ll_status ll_correct_response(const ll_calibration* cal, const double response[3], double corrected[3]);
LL_API ll_status ll_identify_hue(const ll_calibration* cal, const double response[3], int* hue_bin);
LL_API ll_status ll_luminance_sensitivity(const ll_calibration* cal, int hue_bin, double* out);

/* ---- matching ---------------------------------------------------------- */

/* band < 0 disables the Sakoe-Chiba band. */
LL_API ll_status ll_dtw(const double* a, size_t n, const double* b, size_t m, long band, double* out);
LL_API ll_status ll_osb(const double* query, size_t n, const double* target, size_t m, double skip_penalty,
                        long band, double* out);
/* a and b hold n and m RGB triples. */
LL_API ll_status ll_mdtw(const double* a, size_t n, const double* b, size_t m, long band, double* out);

typedef struct ll_library ll_library;

LL_API ll_status ll_library_open(const char* dir, ll_library** out);
LL_API size_t ll_library_size(const ll_library* lib);
LL_API void ll_library_free(ll_library* lib);

typedef struct ll_match_entry {
  char id[64];
  double distance;
} ll_match_entry;

/* Ranks every template of the query's kind (dims 1: audio, dims 3: video).
 * matcher: "dtw", "osb" or "mdtw". Entries are written up to cap; count gets
 * the total. */
LL_API ll_status ll_library_match(const ll_library* lib, const double* query, size_t length, int dims,
                                  const char* matcher, double band_fraction, ll_match_entry* entries, size_t cap,
                                  size_t* count);

/* ---- occupancy --------------------------------------------------------- */

LL_API ll_status ll_hue_coverage(uint64_t draws, int bins, double* p_single, double* p_all);
LL_API ll_status ll_coverage_time(double peaks_per_minute, double target_p_all, int bins, uint64_t* peaks,
                                  double* minutes);

/* ---- exfiltration ------------------------------------------------------ */

LL_API ll_status ll_channel_bandwidth(uint32_t levels, double clock_period_s, double* bits_per_second);
/* Levels for data (big-endian bit packing); *levels_out must be released with ll_free_buffer. */
LL_API ll_status ll_symbol_map(const uint8_t* data, size_t len, uint32_t levels, uint32_t** levels_out,
                               size_t* count, uint32_t* padding_bits);
LL_API ll_status ll_decode_symbols(const uint32_t* symbols, size_t count, uint32_t levels, uint64_t bit_length,
                                   uint32_t padding_bits, uint8_t** data_out, size_t* len);
LL_API ll_status ll_bit_error_rate(const uint8_t* a, size_t a_len, const uint8_t* b, size_t b_len, double* ber);
/* Encoded SetInfrared packets of a full frame, concatenated; *packets_out
 * must be released with ll_free_buffer. */
LL_API ll_status ll_exfil_packets(const uint8_t* data, size_t len, uint32_t levels, uint8_t** packets_out,
                                  size_t* bytes, size_t* packet_count);

/* ---- experiments ------------------------------------------------------- */

LL_API ll_status ll_gen_corpus(const char* out_dir, uint64_t seed, int songs, int videos);
/* kind: "audio" or "video". Per-file failures are counted, not fatal. */
LL_API ll_status ll_build_library(const char* corpus_dir, const char* kind, const char* out_dir,
                                  size_t* templates, size_t* failures);
/* Runs the scenario named in the config. seed and out_dir override the config
 * when non-NULL. A non-NULL scenario ("audio_attack", "video_attack" or
 * "exfil") must match the config. LL_OK only when every grid cell succeeded. */
LL_API ll_status ll_run_experiment(const char* config_path, const char* scenario, const uint64_t* seed,
                                   const char* out_dir);
/* NULL out_dir writes to run_dir/report. */
LL_API ll_status ll_report(const char* run_dir, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif
