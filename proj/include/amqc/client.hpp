#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "amqc/link.hpp"

namespace amqc {

struct ClientOptions {
  std::chrono::milliseconds retransmit_interval{200};
  int max_attempts = 10;  // total sends per QoS-1 publish
  std::chrono::milliseconds handshake_timeout{5000};
  // Test hook: outgoing frames (e.g. PUBACKs) this returns true for are
  // dropped instead of written.
  std::function<bool(const Frame&)> drop_outgoing;
};

// One MQTT connection. subscribe/publish may be called from any thread;
// handlers run on the internal reader thread and must not call back into the
// client (except publish at QoS 0).
class Client {
public:
  // Performs the CONNECT/CONNACK handshake, then starts the reader.
  Client(std::unique_ptr<Link> link, const std::string& client_id, ClientOptions opt = {});
  ~Client();

  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  using Handler = std::function<void(const PublishPacket&)>;

  // Exact-match topic subscription; blocks until SUBACK.
  void subscribe(const std::string& topic, Handler handler);

  // Fire-and-forget.
  void publish_qos0(const std::string& topic, std::span<const uint8_t> payload);

  // At-least-once: blocks until PUBACK, retransmitting with DUP on timeout.
  // Throws a protocol error after max_attempts or on connection loss.
  void publish_qos1(const std::string& topic, std::span<const uint8_t> payload);

  // PINGREQ/PINGRESP round trip.
  void ping();

  // Sends DISCONNECT and closes; implicit in the destructor.
  void disconnect();

  bool connected() const;
  std::vector<uint16_t> unacked_ids() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace amqc
