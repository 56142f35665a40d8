#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "lightleak/colorlab.hpp"
#include "lightleak/protocol.hpp"

namespace lightleak {

// Infrared output as a fraction of the maximum power level.
struct InfraredLevel {
  double power = 0;
};

using LightState = std::variant<colorlab::HsbColor, InfraredLevel>;

// A change of the bulb's light state, t in seconds since stream start.
struct EmissionEvent {
  double t = 0;
  LightState state;
};

// Linear slew of the infrared output: full-scale rise and fall times.
struct SlewRates {
  double rise_time_s = 0.45;
  double fall_time_s = 0.2;
};

// The bulb's light-state timeline. Events are strictly increasing in t; the
// last state holds until end_time.
struct Timeline {
  std::vector<EmissionEvent> events;
  double end_time = 0;
  std::optional<SlewRates> infrared_slew;
};

struct PacketStream {
  std::vector<protocol::Packet> packets;
  Timeline timeline;
};

// Light state a bulb takes on after applying a control packet.
LightState state_from_packet(const protocol::Packet& packet);

}  // namespace lightleak
