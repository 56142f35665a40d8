#include "lightleak/emission.hpp"

namespace lightleak {

LightState state_from_packet(const protocol::Packet& packet) {
  using namespace protocol;
  if (const auto* c = std::get_if<SetColor>(&packet.payload)) {
    return colorlab::HsbColor{hue_from_u16(c->hue), unit_from_u16(c->saturation),
                              unit_from_u16(c->brightness)};
  }
  if (const auto* ir = std::get_if<SetInfrared>(&packet.payload)) {
    return InfraredLevel{unit_from_u16(ir->power_level)};
  }
  return InfraredLevel{0.0};
}

}  // namespace lightleak
