#pragma once

#include <cstdint>
#include <memory>
#include <utility>

#include "amqc/mqtt.hpp"

namespace amqc {

// Reliable bidirectional byte stream. Implementations must allow a concurrent
// reader and writer; close() may be called from any thread and unblocks both.
class Link {
public:
  virtual ~Link() = default;

  // Writes all n bytes; returns false when the peer is gone.
  virtual bool write(const uint8_t* data, size_t n) = 0;
  // Blocks for at least one byte; returns 0 on EOF/close.
  virtual size_t read_some(uint8_t* out, size_t n) = 0;
  virtual void close() = 0;
};

// In-process loopback transport (unbounded buffers, so writes never block);
// both ends see EOF once either side closes.
std::pair<std::unique_ptr<Link>, std::unique_ptr<Link>> make_pipe();

// POSIX TCP. connect_tcp resolves "127.0.0.1"-style numeric hosts only.
std::unique_ptr<Link> connect_tcp(const std::string& host, uint16_t port);

class TcpListener {
public:
  // port 0 picks an ephemeral port; see port().
  explicit TcpListener(uint16_t port);
  ~TcpListener();

  uint16_t port() const { return port_; }
  // nullptr once close() has been called.
  std::unique_ptr<Link> accept();
  void close();

private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

// Stream framing: false on clean EOF at a frame boundary; protocol error on
// mid-frame EOF or malformed bytes.
bool read_frame(Link& link, Frame& out);
bool write_frame(Link& link, const Frame& f);

}  // namespace amqc
