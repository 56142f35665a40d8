// Operator front end over the lightleak C API.

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "lightleak/lightleak.h"

namespace {

int report_status(ll_status status, const char* what) {
  if (status == LL_OK) return 0;
  std::fprintf(stderr, "lightleak %s: %s: %s\n", what, ll_status_string(status), ll_last_error_message());
  return 1;
}

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_run_options(CLI::App* cmd, RunArgs& args) {
  cmd->add_option("--config", args.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--out", args.out, "override the output directory");
}

int run_scenario(const RunArgs& args, const char* scenario) {
  const std::uint64_t seed = args.seed.value_or(0);
  const ll_status status = ll_run_experiment(args.config.c_str(), scenario, args.seed ? &seed : nullptr,
                                             args.out.empty() ? nullptr : args.out.c_str());
  return report_status(status, scenario);
}

// Sends a payload as SetInfrared datagrams, one per clock period.
int transmit(const std::string& host, const std::string& port, const std::string& file, std::uint32_t levels,
             double period_s) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    std::fprintf(stderr, "lightleak transmit: cannot read %s\n", file.c_str());
    return 1;
  }
  const std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::uint8_t* wire = nullptr;
  size_t bytes = 0;
  size_t count = 0;
  if (const int rc = report_status(ll_exfil_packets(data.data(), data.size(), levels, &wire, &bytes, &count),
                                   "transmit")) {
    return rc;
  }

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* addr = nullptr;
  if (getaddrinfo(host.c_str(), port.c_str(), &hints, &addr) != 0 || addr == nullptr) {
    std::fprintf(stderr, "lightleak transmit: cannot resolve %s:%s\n", host.c_str(), port.c_str());
    ll_free_buffer(wire);
    return 1;
  }
  const int fd = socket(addr->ai_family, addr->ai_socktype, addr->ai_protocol);
  int rc = fd < 0 ? 1 : 0;
  for (size_t off = 0; rc == 0 && off + 2 <= bytes;) {
    const size_t size = wire[off] | (static_cast<size_t>(wire[off + 1]) << 8);
    if (size == 0 || off + size > bytes) break;
    if (sendto(fd, wire + off, size, 0, addr->ai_addr, addr->ai_addrlen) < 0) rc = 1;
    off += size;
    std::this_thread::sleep_for(std::chrono::duration<double>(period_s));
  }
  if (rc != 0) std::perror("lightleak transmit");
  if (fd >= 0) close(fd);
  freeaddrinfo(addr);
  ll_free_buffer(wire);
  if (rc == 0) std::printf("sent %zu packets\n", count);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smart-light side-channel and exfiltration simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ll_version());

  std::string corpus_out;
  std::uint64_t corpus_seed = 1;
  int songs = 50;
  int videos = 40;
  auto* gen = app.add_subcommand("gen-corpus", "write a synthetic audio/video/payload corpus");
  gen->add_option("--out", corpus_out, "corpus directory")->required();
  gen->add_option("--seed", corpus_seed, "corpus seed");
  gen->add_option("--songs", songs, "number of songs")->check(CLI::NonNegativeNumber);
  gen->add_option("--videos", videos, "number of videos")->check(CLI::NonNegativeNumber);

  std::string lib_corpus, lib_kind, lib_out;
  auto* build = app.add_subcommand("build-library", "build reference templates from a media directory");
  build->add_option("--corpus", lib_corpus, "media directory with metadata.csv")->required();
  build->add_option("--kind", lib_kind, "audio or video")->required()->check(CLI::IsMember({"audio", "video"}));
  build->add_option("--out", lib_out, "library directory")->required();

  RunArgs audio, video, exfil;
  auto* attack_audio = app.add_subcommand("attack-audio", "run an audio inference experiment");
  add_run_options(attack_audio, audio);
  auto* attack_video = app.add_subcommand("attack-video", "run a video inference experiment");
  add_run_options(attack_video, video);
  auto* exfil_cmd = app.add_subcommand("exfil", "run an infrared exfiltration experiment");
  add_run_options(exfil_cmd, exfil);

  std::string run_dir, report_out;
  auto* report = app.add_subcommand("report", "emit plot-data CSVs for a finished run");
  report->add_option("run_dir", run_dir, "run directory")->required();
  report->add_option("--out", report_out, "output directory (default: <run_dir>/report)");

  std::string host = "127.0.0.1", port = "56700", file;
  std::uint32_t levels = 4;
  double period_s = 0.5;
  auto* tx = app.add_subcommand("transmit", "send a payload as SetInfrared datagrams (lab use)");
  tx->add_option("--file", file, "payload file")->required()->check(CLI::ExistingFile);
  tx->add_option("--host", host, "destination host");
  tx->add_option("--port", port, "destination UDP port");
  tx->add_option("--levels", levels, "amplitude levels (power of two)");
  tx->add_option("--period", period_s, "clock period in seconds")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  if (*gen) {
    const int rc = report_status(ll_gen_corpus(corpus_out.c_str(), corpus_seed, songs, videos), "gen-corpus");
    if (rc == 0) std::printf("wrote %d songs and %d videos to %s\n", songs, videos, corpus_out.c_str());
    return rc;
  }
  if (*build) {
    size_t templates = 0, failures = 0;
    const int rc = report_status(
        ll_build_library(lib_corpus.c_str(), lib_kind.c_str(), lib_out.c_str(), &templates, &failures),
        "build-library");
    if (rc != 0) return rc;
    std::printf("%zu templates, %zu failed files\n", templates, failures);
    return failures == 0 ? 0 : 1;
  }
  if (*attack_audio) return run_scenario(audio, "audio_attack");
  if (*attack_video) return run_scenario(video, "video_attack");
  if (*exfil_cmd) return run_scenario(exfil, "exfil");
  if (*report) {
    const std::string out = report_out.empty() ? run_dir + "/report" : report_out;
    return report_status(ll_report(run_dir.c_str(), out.c_str()), "report");
  }
  if (*tx) return transmit(host, port, file, levels, period_s);
  return 1;
}
