#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "amqc/link.hpp"

namespace amqc {

struct BrokerOptions {
  std::chrono::milliseconds retransmit_interval{200};
  int max_retransmits = 10;
  // Test hook: outgoing frames for which this returns true are silently not
  // written, simulating loss on an otherwise reliable transport.
  std::function<bool(const Frame&)> drop_outgoing;
  std::function<void(const std::string&)> log;
};

struct BrokerStats {
  uint64_t connects = 0;
  uint64_t publishes = 0;
  uint64_t forwarded = 0;
  uint64_t retransmits = 0;
  uint64_t dropped_frames = 0;  // via the drop hook
  uint64_t malformed = 0;
  uint64_t expired = 0;  // gave up after max retransmits
};

// Single-process MQTT-subset broker. Sessions are served by one thread each;
// QoS-1 deliveries to subscribers are retransmitted with DUP until PUBACKed.
class Broker {
public:
  explicit Broker(BrokerOptions opt = {});
  ~Broker();

  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  // Serves TCP clients on 127.0.0.1:<port>; port 0 picks a free port.
  void start_tcp(uint16_t port);
  uint16_t port() const;

  // In-process transport: returns the client end of a fresh pipe whose broker
  // end is already being served.
  std::unique_ptr<Link> connect_local();

  // Closes every session and stops serving. Idempotent.
  void stop();

  BrokerStats stats() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace amqc
