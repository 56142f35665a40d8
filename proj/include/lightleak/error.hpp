#pragma once

#include <stdexcept>
#include <string>

namespace lightleak {

// Error kinds shared by every module. The C API maps these 1:1 onto
// ll_status codes, so the numeric values are part of the ABI.
enum class Errc : int {
  invalid_argument = 1,
  truncated_packet = 2,
  unknown_message_type = 3,
  calibration_invalid = 4,
  duplicate_knot = 5,
  dark_sample = 6,
  empty_input = 7,
  all_dark = 8,
  empty_library = 9,
  no_start_symbol = 10,
  no_end_symbol = 11,
  length_mismatch = 12,
  missing_genre = 13,
  missing_run = 14,
  io_error = 15,
  config_invalid = 16,
  kind_mismatch = 17,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace lightleak
