#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "doctest.h"
#include "lightleak/lightleak.h"

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const fs::path kTestdata = LL_TESTDATA_DIR;

}  // namespace

TEST_CASE("status strings and errors") {
  CHECK(std::string(ll_status_string(LL_OK)) == "Ok");
  CHECK(std::string(ll_status_string(LL_NO_START_SYMBOL)) == "NoStartSymbol");
  CHECK(std::string(ll_version()).size() > 0);
  double out = 0;
  CHECK(ll_dtw(nullptr, 3, nullptr, 3, -1, &out) == LL_INVALID_ARGUMENT);
  CHECK(std::string(ll_last_error_message()).size() > 0);
  const double a[] = {1.0};
  CHECK(ll_dtw(a, 0, a, 1, -1, &out) == LL_EMPTY_INPUT);
}

TEST_CASE("packet encode matches the golden bytes") {
  ll_packet p;
  ll_packet_init(&p, LL_MSG_SET_INFRARED);
  p.infrared_level = 65535;
  std::uint8_t buf[64];
  size_t len = 0;
  REQUIRE(ll_packet_encode(&p, buf, sizeof buf, &len) == LL_OK);
  const auto golden = read_bytes(kTestdata / "packets" / "infrared_max.bin");
  CHECK(std::vector<std::uint8_t>(buf, buf + len) == golden);
  CHECK(ll_packet_encode(&p, buf, 10, &len) == LL_INVALID_ARGUMENT);

  ll_packet back;
  REQUIRE(ll_packet_decode(golden.data(), golden.size(), &back) == LL_OK);
  CHECK(back.message_type == LL_MSG_SET_INFRARED);
  CHECK(back.infrared_level == 65535);
  CHECK(back.protocol_flags == 0x1400);
  CHECK(back.size == golden.size());
  CHECK(ll_packet_decode(golden.data(), 10, &back) == LL_TRUNCATED_PACKET);

  const auto unknown = read_bytes(kTestdata / "packets" / "unknown_type_999.bin");
  CHECK(ll_packet_decode(unknown.data(), unknown.size(), &back) == LL_UNKNOWN_MESSAGE_TYPE);
  CHECK(back.message_type == 999);

  ll_packet c;
  ll_packet_init(&c, LL_MSG_SET_COLOR);
  c.hue = 1000;
  c.saturation = 2000;
  c.brightness = 3000;
  c.kelvin = 3500;
  c.duration_ms = 77;
  REQUIRE(ll_packet_encode(&c, buf, sizeof buf, &len) == LL_OK);
  CHECK(len == 49);
  REQUIRE(ll_packet_decode(buf, len, &back) == LL_OK);
  CHECK(back.hue == 1000);
  CHECK(back.kelvin == 3500);
  CHECK(back.duration_ms == 77);
}

TEST_CASE("calibration handle") {
  ll_calibration* cal = nullptr;
  REQUIRE(ll_calibration_default(&cal) == LL_OK);
  const double red[] = {1, 0, 0};
  double resp[3];
  REQUIRE(ll_sensor_response(cal, red, resp) == LL_OK);
  CHECK(resp[0] == doctest::Approx(0.741883).epsilon(1e-4));
  int bin = -1;
  REQUIRE(ll_identify_hue(cal, resp, &bin) == LL_OK);
  CHECK((bin <= 1 || bin >= 359));
  const double dark[] = {0, 0, 0};
  CHECK(ll_identify_hue(cal, dark, &bin) == LL_DARK_SAMPLE);
  double sens = 0;
  CHECK(ll_luminance_sensitivity(cal, 400, &sens) == LL_INVALID_ARGUMENT);

  const fs::path p = fs::temp_directory_path() / "lightleak_capi.cal";
  REQUIRE(ll_calibration_save(cal, p.c_str()) == LL_OK);
  ll_calibration* loaded = nullptr;
  REQUIRE(ll_calibration_load(p.c_str(), &loaded) == LL_OK);
  double again[3];
  REQUIRE(ll_sensor_response(loaded, red, again) == LL_OK);
  CHECK(again[0] == resp[0]);
  ll_calibration_free(loaded);
  ll_calibration_free(cal);
  fs::remove(p);
  CHECK(ll_calibration_load("/nonexistent.cal", &loaded) != LL_OK);

  double hsb[3];
  const double rgb[] = {0, 0, 1};
  REQUIRE(ll_rgb_to_hsb(rgb, hsb) == LL_OK);
  CHECK(hsb[0] == doctest::Approx(240));
}

TEST_CASE("distances") {
  const double a[] = {0, 1, 2}, b[] = {0, 1, 1, 2};
  double d = -1;
  REQUIRE(ll_dtw(a, 3, b, 4, -1, &d) == LL_OK);
  CHECK(d == 0);
  REQUIRE(ll_osb(a, 3, b, 4, 0.5, -1, &d) == LL_OK);
  CHECK(d == 0);
  const double a3[] = {0, 0, 0}, b3[] = {1, 1, 1};
  REQUIRE(ll_mdtw(a3, 1, b3, 1, -1, &d) == LL_OK);
  CHECK(d == 3);
}

TEST_CASE("coverage and exfil helpers") {
  double single = 0, all = 0;
  REQUIRE(ll_hue_coverage(360, 360, &single, &all) == LL_OK);
  CHECK(single == doctest::Approx(1 - std::pow(359.0 / 360.0, 360)));
  double bps = 0;
  REQUIRE(ll_channel_bandwidth(65536, 0.5, &bps) == LL_OK);
  CHECK(bps == 32);
  CHECK(ll_channel_bandwidth(3, 0.5, &bps) == LL_INVALID_ARGUMENT);

  const std::uint8_t data[] = {0x1B, 0xE4};
  std::uint32_t* levels = nullptr;
  size_t count = 0;
  std::uint32_t pad = 0;
  REQUIRE(ll_symbol_map(data, 2, 4, &levels, &count, &pad) == LL_OK);
  REQUIRE(count == 8);
  CHECK(levels[0] == 0);
  CHECK(levels[3] == 3);
  CHECK(levels[4] == 3);
  std::uint8_t* decoded = nullptr;
  size_t len = 0;
  REQUIRE(ll_decode_symbols(levels, count, 4, 16, pad, &decoded, &len) == LL_OK);
  CHECK(len == 2);
  CHECK(std::memcmp(decoded, data, 2) == 0);
  CHECK(ll_decode_symbols(levels, count - 1, 4, 16, pad, &decoded, &len) == LL_LENGTH_MISMATCH);
  ll_free_buffer(decoded);
  ll_free_buffer(levels);

  double ber = 0;
  const std::uint8_t other[] = {0x1A, 0xE4};
  REQUIRE(ll_bit_error_rate(data, 2, other, 2, &ber) == LL_OK);
  CHECK(ber == doctest::Approx(1.0 / 16));

  std::uint8_t* packets = nullptr;
  size_t bytes = 0, n = 0;
  REQUIRE(ll_exfil_packets(data, 2, 4, &packets, &bytes, &n) == LL_OK);
  CHECK(n == 1 + 8 + 8 + 4 + 1);
  CHECK(bytes == n * 38);
  ll_packet p;
  REQUIRE(ll_packet_decode(packets + 38, 38, &p) == LL_OK);
  CHECK(p.message_type == LL_MSG_SET_INFRARED);
  CHECK(p.infrared_level == 65535);
  ll_free_buffer(packets);
}

TEST_CASE("corpus, library and experiment through the C interface") {
  const fs::path root = fs::temp_directory_path() / "lightleak_capi_run";
  fs::remove_all(root);
  REQUIRE(ll_gen_corpus((root / "corpus").c_str(), 9, 4, 2) == LL_OK);
  size_t templates = 0, failures = 0;
  REQUIRE(ll_build_library((root / "corpus" / "audio").c_str(), "audio", (root / "lib").c_str(), &templates,
                           &failures) == LL_OK);
  CHECK(templates == 4);
  CHECK(failures == 0);
  CHECK(ll_build_library((root / "corpus").c_str(), "sound", (root / "x").c_str(), &templates, &failures) ==
        LL_INVALID_ARGUMENT);

  ll_library* lib = nullptr;
  REQUIRE(ll_library_open((root / "lib").c_str(), &lib) == LL_OK);
  CHECK(ll_library_size(lib) == 4);
  std::vector<double> q(300);
  for (size_t i = 0; i < q.size(); ++i) q[i] = 0.5 + 0.5 * std::sin(i * 0.1);
  ll_match_entry entries[2];
  size_t count = 0;
  REQUIRE(ll_library_match(lib, q.data(), q.size(), 1, "dtw", 0.1, entries, 2, &count) == LL_OK);
  CHECK(count == 4);
  CHECK(entries[0].distance <= entries[1].distance);
  CHECK(std::strlen(entries[0].id) > 0);
  CHECK(ll_library_match(lib, q.data(), 100, 3, "mdtw", 0.1, entries, 2, &count) == LL_EMPTY_LIBRARY);
  CHECK(ll_library_match(lib, q.data(), q.size(), 1, "mdtw", 0.1, entries, 2, &count) == LL_KIND_MISMATCH);
  CHECK(ll_library_match(lib, q.data(), q.size(), 1, "nope", 0.1, entries, 2, &count) == LL_INVALID_ARGUMENT);
  ll_library_free(lib);

  const fs::path cfg = root / "attack.json";
  std::ofstream(cfg) << R"({"scenario":"audio_attack","corpus":"corpus/audio","library":"lib",)"
                     << R"("windows_s":[30],"matchers":["dtw"],"test_items":2})";
  const std::uint64_t seed = 4;
  CHECK(ll_run_experiment(cfg.c_str(), "exfil", &seed, (root / "run").c_str()) == LL_CONFIG_INVALID);
  REQUIRE(ll_run_experiment(cfg.c_str(), "audio_attack", &seed, (root / "run").c_str()) == LL_OK);
  CHECK(fs::exists(root / "run" / "summary.csv"));
  REQUIRE(ll_report((root / "run").c_str(), nullptr) == LL_OK);
  CHECK(ll_report((root / "missing").c_str(), nullptr) == LL_MISSING_RUN);
  fs::remove_all(root);
}
