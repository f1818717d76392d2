#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "amqc/wire.hpp"

namespace amqc {

// MQTT 3.1.1 subset: CONNECT/CONNACK, PUBLISH/PUBACK (QoS 0/1), SUBSCRIBE/
// SUBACK (exact-match filters), PINGREQ/PINGRESP, DISCONNECT. No retained
// messages, wills, wildcards, QoS 2, or auth.

enum class PacketType : uint8_t {
  connect = 1,
  connack = 2,
  publish = 3,
  puback = 4,
  subscribe = 8,
  suback = 9,
  pingreq = 12,
  pingresp = 13,
  disconnect = 14,
};

const char* packet_type_name(PacketType t);

// Raw frame: fixed header split into type/flags, plus the remaining bytes
// (variable header + payload).
struct Frame {
  PacketType type = PacketType::pingreq;
  uint8_t flags = 0;  // low nibble
  std::vector<uint8_t> payload;

  bool operator==(const Frame&) const = default;
};

std::vector<uint8_t> encode_frame(const Frame& f);
// Whole-buffer decode (must consume every byte).
Frame decode_frame(std::span<const uint8_t> bytes);

struct ConnectPacket {
  std::string client_id;
  uint16_t keepalive_s = 60;
};

struct ConnackPacket {
  bool session_present = false;
  uint8_t return_code = 0;  // 0 = accepted
};

struct PublishPacket {
  std::string topic;
  std::vector<uint8_t> payload;
  uint8_t qos = 0;  // 0 or 1
  bool dup = false;
  uint16_t packet_id = 0;  // nonzero when qos = 1
};

struct PubackPacket {
  uint16_t packet_id = 0;
};

struct SubscribePacket {
  uint16_t packet_id = 0;
  std::string topic;  // exact match, no wildcards
  uint8_t qos = 1;
};

struct SubackPacket {
  uint16_t packet_id = 0;
  uint8_t return_code = 1;  // granted QoS, or 0x80 = failure
};

Frame make_connect(const ConnectPacket& p);
Frame make_connack(const ConnackPacket& p);
Frame make_publish(const PublishPacket& p);
Frame make_puback(const PubackPacket& p);
Frame make_subscribe(const SubscribePacket& p);
Frame make_suback(const SubackPacket& p);
Frame make_pingreq();
Frame make_pingresp();
Frame make_disconnect();

// All decoders throw protocol errors on malformed input (bad flags, missing
// packet id at QoS 1, trailing bytes, oversize strings).
ConnectPacket parse_connect(const Frame& f);
ConnackPacket parse_connack(const Frame& f);
PublishPacket parse_publish(const Frame& f);
PubackPacket parse_puback(const Frame& f);
SubscribePacket parse_subscribe(const Frame& f);
SubackPacket parse_suback(const Frame& f);

}  // namespace amqc
