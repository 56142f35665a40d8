#include "lightleak/error.hpp"

namespace lightleak {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::truncated_packet: return "TruncatedPacket";
    case Errc::unknown_message_type: return "UnknownMessageType";
    case Errc::calibration_invalid: return "CalibrationInvalid";
    case Errc::duplicate_knot: return "DuplicateKnot";
    case Errc::dark_sample: return "DarkSample";
    case Errc::empty_input: return "EmptyInput";
    case Errc::all_dark: return "AllDark";
    case Errc::empty_library: return "EmptyLibrary";
    case Errc::no_start_symbol: return "NoStartSymbol";
    case Errc::no_end_symbol: return "NoEndSymbol";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::missing_genre: return "MissingGenre";
    case Errc::missing_run: return "MissingRun";
    case Errc::io_error: return "IoError";
    case Errc::config_invalid: return "ConfigInvalid";
    case Errc::kind_mismatch: return "KindMismatch";
  }
  return "Unknown";
}

}  // namespace lightleak
