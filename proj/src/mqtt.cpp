#include "amqc/mqtt.hpp"

namespace amqc {

const char* packet_type_name(PacketType t) {
  switch (t) {
    case PacketType::connect: return "CONNECT";
    case PacketType::connack: return "CONNACK";
    case PacketType::publish: return "PUBLISH";
    case PacketType::puback: return "PUBACK";
    case PacketType::subscribe: return "SUBSCRIBE";
    case PacketType::suback: return "SUBACK";
    case PacketType::pingreq: return "PINGREQ";
    case PacketType::pingresp: return "PINGRESP";
    case PacketType::disconnect: return "DISCONNECT";
  }
  return "?";
}

namespace {

bool known_type(uint8_t t) {
  switch (t) {
    case 1: case 2: case 3: case 4: case 8: case 9: case 12: case 13: case 14:
      return true;
    default:
      return false;
  }
}

// Reserved flag nibbles per MQTT 3.1.1 (PUBLISH is variable and checked in
// parse_publish).
void check_flags(PacketType type, uint8_t flags) {
  if (type == PacketType::publish) {
    if (flags & 0x01) fail(ErrorKind::protocol, "retained PUBLISH unsupported");
    const uint8_t qos = (flags >> 1) & 0x03;
    if (qos > 1)
      fail(ErrorKind::protocol, "QoS " + std::to_string(qos) + " unsupported (subset is 0/1)");
    return;
  }
  const uint8_t want = type == PacketType::subscribe ? 0x02 : 0x00;
  if (flags != want)
    fail(ErrorKind::protocol, std::string("bad flags on ") + packet_type_name(type));
}

void put_mqtt_string(std::vector<uint8_t>& out, const std::string& s) {
  if (s.size() > 0xFFFF) fail(ErrorKind::invalid_argument, "MQTT string too long");
  put_u16be(out, static_cast<uint16_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

std::string take_mqtt_string(ByteReader& r) {
  const uint16_t n = r.u16be();
  auto bytes = r.take(n);
  return std::string(bytes.begin(), bytes.end());
}

void expect_done(const ByteReader& r, PacketType t) {
  if (!r.done())
    fail(ErrorKind::protocol, std::string(packet_type_name(t)) + ": " +
                                  std::to_string(r.remaining()) + " trailing bytes");
}

void expect_type(const Frame& f, PacketType t) {
  if (f.type != t)
    fail(ErrorKind::protocol, std::string("expected ") + packet_type_name(t) + ", got " +
                                  packet_type_name(f.type));
}

}  // namespace

std::vector<uint8_t> encode_frame(const Frame& f) {
  check_flags(f.type, f.flags);
  if (f.payload.size() > kVarintMax) fail(ErrorKind::invalid_argument, "frame payload too large");
  std::vector<uint8_t> out;
  out.reserve(f.payload.size() + 5);
  out.push_back(static_cast<uint8_t>((static_cast<uint8_t>(f.type) << 4) | (f.flags & 0x0F)));
  encode_varint(out, static_cast<uint32_t>(f.payload.size()));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

Frame decode_frame(std::span<const uint8_t> bytes) {
  ByteReader r{bytes};
  const uint8_t head = r.u8();
  const uint8_t type = head >> 4;
  if (!known_type(type))
    fail(ErrorKind::protocol, "unknown packet type " + std::to_string(type));
  Frame f;
  f.type = static_cast<PacketType>(type);
  f.flags = head & 0x0F;
  check_flags(f.type, f.flags);
  const uint32_t len = decode_varint(r);
  if (len != r.remaining())
    fail(ErrorKind::protocol, "remaining length " + std::to_string(len) + " does not match " +
                                  std::to_string(r.remaining()) + " available bytes");
  auto payload = r.take(len);
  f.payload.assign(payload.begin(), payload.end());
  return f;
}

Frame make_connect(const ConnectPacket& p) {
  Frame f{PacketType::connect, 0, {}};
  put_mqtt_string(f.payload, "MQTT");
  put_u8(f.payload, 4);     // protocol level 3.1.1
  put_u8(f.payload, 0x02);  // clean session
  put_u16be(f.payload, p.keepalive_s);
  put_mqtt_string(f.payload, p.client_id);
  return f;
}

ConnectPacket parse_connect(const Frame& f) {
  expect_type(f, PacketType::connect);
  ByteReader r{f.payload};
  if (take_mqtt_string(r) != "MQTT") fail(ErrorKind::protocol, "CONNECT: bad protocol name");
  if (r.u8() != 4) fail(ErrorKind::protocol, "CONNECT: unsupported protocol level");
  const uint8_t flags = r.u8();
  if (flags != 0x02)
    fail(ErrorKind::protocol, "CONNECT: only clean sessions without will/auth are supported");
  ConnectPacket p;
  p.keepalive_s = r.u16be();
  p.client_id = take_mqtt_string(r);
  expect_done(r, f.type);
  return p;
}

Frame make_connack(const ConnackPacket& p) {
  Frame f{PacketType::connack, 0, {}};
  put_u8(f.payload, p.session_present ? 1 : 0);
  put_u8(f.payload, p.return_code);
  return f;
}

ConnackPacket parse_connack(const Frame& f) {
  expect_type(f, PacketType::connack);
  ByteReader r{f.payload};
  ConnackPacket p;
  const uint8_t ack = r.u8();
  if (ack > 1) fail(ErrorKind::protocol, "CONNACK: bad acknowledge flags");
  p.session_present = ack == 1;
  p.return_code = r.u8();
  expect_done(r, f.type);
  return p;
}

Frame make_publish(const PublishPacket& p) {
  if (p.qos > 1) fail(ErrorKind::invalid_argument, "QoS 2 unsupported");
  if (p.qos == 1 && p.packet_id == 0)
    fail(ErrorKind::invalid_argument, "QoS 1 PUBLISH requires a nonzero packet id");
  if (p.topic.empty()) fail(ErrorKind::invalid_argument, "PUBLISH: empty topic");
  Frame f{PacketType::publish, 0, {}};
  f.flags = static_cast<uint8_t>((p.dup ? 0x08 : 0x00) | (p.qos << 1));
  put_mqtt_string(f.payload, p.topic);
  if (p.qos == 1) put_u16be(f.payload, p.packet_id);
  f.payload.insert(f.payload.end(), p.payload.begin(), p.payload.end());
  return f;
}

PublishPacket parse_publish(const Frame& f) {
  expect_type(f, PacketType::publish);
  check_flags(f.type, f.flags);
  PublishPacket p;
  p.dup = (f.flags & 0x08) != 0;
  p.qos = (f.flags >> 1) & 0x03;
  ByteReader r{f.payload};
  p.topic = take_mqtt_string(r);
  if (p.topic.empty()) fail(ErrorKind::protocol, "PUBLISH: empty topic");
  if (p.qos == 1) {
    p.packet_id = r.u16be();
    if (p.packet_id == 0) fail(ErrorKind::protocol, "PUBLISH: packet id 0 at QoS 1");
  }
  auto rest = r.take(r.remaining());
  p.payload.assign(rest.begin(), rest.end());
  return p;
}

Frame make_puback(const PubackPacket& p) {
  Frame f{PacketType::puback, 0, {}};
  put_u16be(f.payload, p.packet_id);
  return f;
}

PubackPacket parse_puback(const Frame& f) {
  expect_type(f, PacketType::puback);
  ByteReader r{f.payload};
  PubackPacket p{r.u16be()};
  expect_done(r, f.type);
  return p;
}

Frame make_subscribe(const SubscribePacket& p) {
  if (p.packet_id == 0) fail(ErrorKind::invalid_argument, "SUBSCRIBE requires a nonzero packet id");
  if (p.qos > 1) fail(ErrorKind::invalid_argument, "QoS 2 unsupported");
  Frame f{PacketType::subscribe, 0x02, {}};
  put_u16be(f.payload, p.packet_id);
  put_mqtt_string(f.payload, p.topic);
  put_u8(f.payload, p.qos);
  return f;
}

SubscribePacket parse_subscribe(const Frame& f) {
  expect_type(f, PacketType::subscribe);
  ByteReader r{f.payload};
  SubscribePacket p;
  p.packet_id = r.u16be();
  if (p.packet_id == 0) fail(ErrorKind::protocol, "SUBSCRIBE: packet id 0");
  p.topic = take_mqtt_string(r);
  if (p.topic.empty()) fail(ErrorKind::protocol, "SUBSCRIBE: empty topic filter");
  if (p.topic.find_first_of("+#") != std::string::npos)
    fail(ErrorKind::protocol, "SUBSCRIBE: wildcards unsupported");
  p.qos = r.u8();
  if (p.qos > 1) fail(ErrorKind::protocol, "SUBSCRIBE: QoS 2 unsupported");
  expect_done(r, f.type);
  return p;
}

Frame make_suback(const SubackPacket& p) {
  Frame f{PacketType::suback, 0, {}};
  put_u16be(f.payload, p.packet_id);
  put_u8(f.payload, p.return_code);
  return f;
}

SubackPacket parse_suback(const Frame& f) {
  expect_type(f, PacketType::suback);
  ByteReader r{f.payload};
  SubackPacket p;
  p.packet_id = r.u16be();
  p.return_code = r.u8();
  if (p.return_code > 1 && p.return_code != 0x80)
    fail(ErrorKind::protocol, "SUBACK: bad return code");
  expect_done(r, f.type);
  return p;
}

Frame make_pingreq() { return {PacketType::pingreq, 0, {}}; }

Frame make_pingresp() { return {PacketType::pingresp, 0, {}}; }

Frame make_disconnect() { return {PacketType::disconnect, 0, {}}; }

}  // namespace amqc
