#include "amqc/link.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

namespace amqc {

namespace {

struct PipeCore {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<uint8_t> buf[2];  // [0] a->b, [1] b->a
  bool closed[2] = {false, false};
};

class PipeLink : public Link {
public:
  PipeLink(std::shared_ptr<PipeCore> core, int side) : core_(std::move(core)), side_(side) {}
  ~PipeLink() override { close(); }

  bool write(const uint8_t* data, size_t n) override {
    std::lock_guard lk(core_->mu);
    if (core_->closed[0] || core_->closed[1]) return false;
    auto& q = core_->buf[side_ == 0 ? 0 : 1];
    q.insert(q.end(), data, data + n);
    core_->cv.notify_all();
    return true;
  }

  size_t read_some(uint8_t* out, size_t n) override {
    std::unique_lock lk(core_->mu);
    auto& q = core_->buf[side_ == 0 ? 1 : 0];
    core_->cv.wait(lk, [&] { return !q.empty() || core_->closed[0] || core_->closed[1]; });
    if (q.empty()) return 0;
    const size_t take = std::min(n, q.size());
    std::copy_n(q.begin(), take, out);
    q.erase(q.begin(), q.begin() + static_cast<ptrdiff_t>(take));
    return take;
  }

  void close() override {
    std::lock_guard lk(core_->mu);
    core_->closed[side_] = true;
    core_->cv.notify_all();
  }

private:
  std::shared_ptr<PipeCore> core_;
  int side_;
};

class TcpLink : public Link {
public:
  explicit TcpLink(int fd) : fd_(fd) {
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  ~TcpLink() override { close(); }

  bool write(const uint8_t* data, size_t n) override {
    size_t sent = 0;
    while (sent < n) {
      const ssize_t k = ::send(fd_, data + sent, n - sent, MSG_NOSIGNAL);
      if (k <= 0) return false;
      sent += static_cast<size_t>(k);
    }
    return true;
  }

  size_t read_some(uint8_t* out, size_t n) override {
    const ssize_t k = ::recv(fd_, out, n, 0);
    return k > 0 ? static_cast<size_t>(k) : 0;
  }

  void close() override {
    int fd = fd_.exchange(-1);
    if (fd >= 0) {
      ::shutdown(fd, SHUT_RDWR);
      ::close(fd);
    }
  }

private:
  std::atomic<int> fd_;
};

}  // namespace

std::pair<std::unique_ptr<Link>, std::unique_ptr<Link>> make_pipe() {
  auto core = std::make_shared<PipeCore>();
  return {std::make_unique<PipeLink>(core, 0), std::make_unique<PipeLink>(core, 1)};
}

std::unique_ptr<Link> connect_tcp(const std::string& host, uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) fail(ErrorKind::io, "socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    fail(ErrorKind::invalid_argument, "connect_tcp: bad host address " + host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    fail(ErrorKind::io, "connect to " + host + ":" + std::to_string(port) + " failed");
  }
  return std::make_unique<TcpLink>(fd);
}

TcpListener::TcpListener(uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) fail(ErrorKind::io, "socket() failed");
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 64) != 0) {
    ::close(fd_);
    fd_ = -1;
    fail(ErrorKind::io, "cannot listen on port " + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

std::unique_ptr<Link> TcpListener::accept() {
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) return nullptr;
  return std::make_unique<TcpLink>(fd);
}

void TcpListener::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

namespace {

// Reads exactly n bytes; false on EOF before the first byte, protocol error
// on EOF mid-read when `mid_frame`.
bool read_exact(Link& link, uint8_t* out, size_t n, bool mid_frame) {
  size_t got = 0;
  while (got < n) {
    const size_t k = link.read_some(out + got, n - got);
    if (k == 0) {
      if (got == 0 && !mid_frame) return false;
      fail(ErrorKind::protocol, "connection closed mid-frame");
    }
    got += k;
  }
  return true;
}

}  // namespace

bool read_frame(Link& link, Frame& out) {
  uint8_t head;
  if (!read_exact(link, &head, 1, false)) return false;
  const uint8_t type = head >> 4;
  // Remaining length, byte by byte.
  uint32_t len = 0;
  for (int i = 0;; ++i) {
    if (i == 4) fail(ErrorKind::protocol, "malformed varint: continuation bit set on 4th byte");
    uint8_t b;
    read_exact(link, &b, 1, true);
    len |= static_cast<uint32_t>(b & 0x7F) << (7 * i);
    if ((b & 0x80) == 0) break;
  }
  std::vector<uint8_t> bytes;
  bytes.reserve(len + 5);
  bytes.push_back(head);
  encode_varint(bytes, len);
  const size_t payload_at = bytes.size();
  bytes.resize(payload_at + len);
  if (len > 0) read_exact(link, bytes.data() + payload_at, len, true);
  out = decode_frame(bytes);
  (void)type;
  return true;
}

bool write_frame(Link& link, const Frame& f) {
  const std::vector<uint8_t> bytes = encode_frame(f);
  return link.write(bytes.data(), bytes.size());
}

}  // namespace amqc
