#pragma once

// Binary control packets for LIFX-style smart bulbs.
//
// Layout (all multi-byte fields little-endian):
//
//   offset  size  field
//   ------  ----  -------------------------------------------
//   0       2     frame.size            total packet length
//   2       2     frame.protocol_flags  protocol | addressable | tagged
//   4       4     frame.source
//   8       8     address.target
//   16      6     reserved (zero)
//   22      1     address.flags         ack / res-required bits
//   23      1     address.sequence
//   24      8     reserved (zero)
//   32      2     message_type
//   34      2     reserved (zero)
//   36      ...   payload
//
// See docs/wire-format.md for the payload tables.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace lightleak::protocol {

inline constexpr std::size_t kFrameHeaderSize = 8;
inline constexpr std::size_t kFrameAddressSize = 16;
inline constexpr std::size_t kProtocolHeaderSize = 12;
inline constexpr std::size_t kHeaderBlockSize =
    kFrameHeaderSize + kFrameAddressSize + kProtocolHeaderSize;
inline constexpr std::size_t kMessageTypeOffset = 32;

inline constexpr std::uint16_t kSetColorType = 102;
inline constexpr std::uint16_t kSetInfraredType = 122;

inline constexpr std::size_t kSetColorPayloadSize = 13;
inline constexpr std::size_t kSetInfraredPayloadSize = 2;

// protocol number 1024 with the addressable bit set
inline constexpr std::uint16_t kDefaultProtocolFlags = 0x1400;

struct FrameHeader {
  std::uint16_t size = 0;
  std::uint16_t protocol_flags = kDefaultProtocolFlags;
  std::uint32_t source = 0;

  friend bool operator==(const FrameHeader&, const FrameHeader&) = default;
};

struct FrameAddress {
  std::uint64_t target = 0;
  std::uint8_t flags = 0;
  std::uint8_t sequence = 0;

  friend bool operator==(const FrameAddress&, const FrameAddress&) = default;
};

struct SetColor {
  std::uint16_t hue = 0;  // 0..65535 maps onto 0..360 degrees
  std::uint16_t saturation = 0;
  std::uint16_t brightness = 0;
  std::uint16_t kelvin = 3500;
  std::uint32_t duration_ms = 0;

  friend bool operator==(const SetColor&, const SetColor&) = default;
};

struct SetInfrared {
  std::uint16_t power_level = 0;

  friend bool operator==(const SetInfrared&, const SetInfrared&) = default;
};

// Payload of a message type this codec does not interpret. Kept verbatim so
// captured traffic can be replayed.
struct RawPayload {
  std::vector<std::uint8_t> bytes;

  friend bool operator==(const RawPayload&, const RawPayload&) = default;
};

using Payload = std::variant<SetColor, SetInfrared, RawPayload>;

struct Packet {
  FrameHeader frame;
  FrameAddress address;
  std::uint16_t message_type = 0;
  Payload payload;

  bool is_unknown_type() const noexcept { return std::holds_alternative<RawPayload>(payload); }

  friend bool operator==(const Packet&, const Packet&) = default;
};

std::size_t payload_size(const Payload& payload) noexcept;

// Builds a packet whose message_type and frame.size agree with the payload.
Packet make_packet(Payload payload, std::uint32_t source = 0, std::uint64_t target = 0,
                   std::uint8_t sequence = 0);

// Emits the wire bytes; frame.size is rewritten to the real length.
// Throws Errc::invalid_argument when message_type disagrees with the payload
// variant or the packet would exceed 65535 bytes.
std::vector<std::uint8_t> encode_packet(const Packet& packet);

// Inverse of encode_packet. Bytes past the declared size are ignored.
// Throws Errc::truncated_packet when fewer bytes than declared (or than the
// header block) are available. Unknown message types come back as RawPayload.
Packet decode_packet(std::span<const std::uint8_t> bytes);

// Hue / unit-interval conversions for the 16-bit HSB fields.
std::uint16_t hue_to_u16(double degrees) noexcept;
double hue_from_u16(std::uint16_t value) noexcept;
std::uint16_t unit_to_u16(double value) noexcept;
double unit_from_u16(std::uint16_t value) noexcept;

}  // namespace lightleak::protocol
