#include "lightleak/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lightleak/error.hpp"

namespace lightleak::protocol {
namespace {

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void zeros(std::size_t n) { out_.insert(out_.end(), n, 0); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return in_[pos_++]; }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  void skip(std::size_t n) { pos_ += n; }
  std::size_t pos() const { return pos_; }

 private:
  std::uint64_t le(int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint16_t type_of(const Payload& payload, std::uint16_t raw_type) {
  if (std::holds_alternative<SetColor>(payload)) return kSetColorType;
  if (std::holds_alternative<SetInfrared>(payload)) return kSetInfraredType;
  return raw_type;
}

}  // namespace

std::size_t payload_size(const Payload& payload) noexcept {
  if (std::holds_alternative<SetColor>(payload)) return kSetColorPayloadSize;
  if (std::holds_alternative<SetInfrared>(payload)) return kSetInfraredPayloadSize;
  return std::get<RawPayload>(payload).bytes.size();
}

Packet make_packet(Payload payload, std::uint32_t source, std::uint64_t target,
                   std::uint8_t sequence) {
  Packet p;
  p.frame.source = source;
  p.address.target = target;
  p.address.sequence = sequence;
  p.message_type = type_of(payload, 0);
  p.frame.size = static_cast<std::uint16_t>(kHeaderBlockSize + payload_size(payload));
  p.payload = std::move(payload);
  return p;
}

std::vector<std::uint8_t> encode_packet(const Packet& packet) {
  const std::size_t total = kHeaderBlockSize + payload_size(packet.payload);
  if (total > 0xFFFF) {
    throw Error(Errc::invalid_argument, "packet exceeds 65535 bytes");
  }
  if (!packet.is_unknown_type() && packet.message_type != type_of(packet.payload, 0)) {
    throw Error(Errc::invalid_argument,
                "message_type " + std::to_string(packet.message_type) +
                    " does not match payload variant");
  }
  if (packet.is_unknown_type() &&
      (packet.message_type == kSetColorType || packet.message_type == kSetInfraredType)) {
    throw Error(Errc::invalid_argument, "raw payload carries a known message_type");
  }

  Writer w(total);
  w.u16(static_cast<std::uint16_t>(total));
  w.u16(packet.frame.protocol_flags);
  w.u32(packet.frame.source);

  w.u64(packet.address.target);
  w.zeros(6);
  w.u8(packet.address.flags);
  w.u8(packet.address.sequence);

  w.zeros(8);
  w.u16(packet.message_type);
  w.zeros(2);

  std::visit(
      [&w](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, SetColor>) {
          w.u8(0);
          w.u16(body.hue);
          w.u16(body.saturation);
          w.u16(body.brightness);
          w.u16(body.kelvin);
          w.u32(body.duration_ms);
        } else if constexpr (std::is_same_v<T, SetInfrared>) {
          w.u16(body.power_level);
        } else {
          w.bytes(body.bytes);
        }
      },
      packet.payload);
  return std::move(w.data());
}

Packet decode_packet(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBlockSize) {
    throw Error(Errc::truncated_packet, "packet shorter than the " +
                                            std::to_string(kHeaderBlockSize) +
                                            "-byte header block (" +
                                            std::to_string(bytes.size()) + " bytes)");
  }
  Reader r(bytes);
  Packet p;
  p.frame.size = r.u16();
  p.frame.protocol_flags = r.u16();
  p.frame.source = r.u32();
  if (p.frame.size < kHeaderBlockSize || p.frame.size > bytes.size()) {
    throw Error(Errc::truncated_packet, "declared size " + std::to_string(p.frame.size) +
                                            " but " + std::to_string(bytes.size()) +
                                            " bytes available");
  }

  p.address.target = r.u64();
  r.skip(6);
  p.address.flags = r.u8();
  p.address.sequence = r.u8();

  r.skip(8);
  p.message_type = r.u16();
  r.skip(2);

  const std::size_t body = p.frame.size - kHeaderBlockSize;
  auto need = [&](std::size_t n) {
    if (body < n) {
      throw Error(Errc::truncated_packet, "payload for type " +
                                              std::to_string(p.message_type) + " needs " +
                                              std::to_string(n) + " bytes, frame declares " +
                                              std::to_string(body));
    }
  };

  switch (p.message_type) {
    case kSetColorType: {
      need(kSetColorPayloadSize);
      SetColor c;
      r.skip(1);
      c.hue = r.u16();
      c.saturation = r.u16();
      c.brightness = r.u16();
      c.kelvin = r.u16();
      c.duration_ms = r.u32();
      p.payload = c;
      break;
    }
    case kSetInfraredType: {
      need(kSetInfraredPayloadSize);
      p.payload = SetInfrared{r.u16()};
      break;
    }
    default: {
      auto first = bytes.begin() + static_cast<std::ptrdiff_t>(kHeaderBlockSize);
      p.payload = RawPayload{{first, first + static_cast<std::ptrdiff_t>(body)}};
      break;
    }
  }
  return p;
}

std::uint16_t hue_to_u16(double degrees) noexcept {
  double d = std::fmod(degrees, 360.0);
  if (d < 0) d += 360.0;
  const auto v = static_cast<std::int64_t>(std::llround(d / 360.0 * 65536.0));
  return static_cast<std::uint16_t>(v & 0xFFFF);
}

double hue_from_u16(std::uint16_t value) noexcept { return value * 360.0 / 65536.0; }

std::uint16_t unit_to_u16(double value) noexcept {
  const double c = std::clamp(value, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(c * 65535.0));
}

double unit_from_u16(std::uint16_t value) noexcept { return value / 65535.0; }

}  // namespace lightleak::protocol
