#include "amqc/client.hpp"

#include <atomic>
#include <condition_variable>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace amqc {

struct Client::Impl {
  std::unique_ptr<Link> link;
  ClientOptions opt;
  std::string client_id;

  std::mutex mu;
  std::condition_variable cv;
  bool closed = false;
  std::set<uint16_t> pending_pub;     // QoS-1 ids awaiting PUBACK
  std::set<uint16_t> acked_pub;       // PUBACKs seen (consumed by the waiter)
  std::map<uint16_t, uint8_t> subacks;  // packet id -> return code
  uint64_t pings_answered = 0;
  uint16_t next_id = 1;
  std::map<std::string, Handler> handlers;

  std::thread reader;

  bool send(const Frame& f) {
    if (opt.drop_outgoing && opt.drop_outgoing(f)) return true;
    std::lock_guard lk(write_mu);
    return write_frame(*link, f);
  }
  std::mutex write_mu;

  uint16_t alloc_id() {
    // Caller holds mu. Skips 0 and ids still in flight.
    uint16_t id = next_id;
    while (id == 0 || pending_pub.count(id) || subacks.count(id)) {
      ++id;
      if (id == 0) ++id;
    }
    next_id = static_cast<uint16_t>(id + 1);
    if (next_id == 0) next_id = 1;
    return id;
  }

  void reader_loop() {
    Frame f;
    try {
      while (read_frame(*link, f)) {
        switch (f.type) {
          case PacketType::publish: {
            const PublishPacket p = parse_publish(f);
            if (p.qos == 1) send(make_puback({p.packet_id}));
            Handler h;
            {
              std::lock_guard lk(mu);
              auto it = handlers.find(p.topic);
              if (it != handlers.end()) h = it->second;
            }
            if (h) h(p);
            break;
          }
          case PacketType::puback: {
            const PubackPacket p = parse_puback(f);
            std::lock_guard lk(mu);
            if (pending_pub.erase(p.packet_id)) acked_pub.insert(p.packet_id);
            cv.notify_all();
            break;
          }
          case PacketType::suback: {
            const SubackPacket p = parse_suback(f);
            std::lock_guard lk(mu);
            subacks[p.packet_id] = p.return_code;
            cv.notify_all();
            break;
          }
          case PacketType::pingresp: {
            std::lock_guard lk(mu);
            ++pings_answered;
            cv.notify_all();
            break;
          }
          default:
            fail(ErrorKind::protocol,
                 std::string("unexpected ") + packet_type_name(f.type) + " from broker");
        }
      }
    } catch (const std::exception&) {
      // fall through to closed state
    }
    std::lock_guard lk(mu);
    closed = true;
    cv.notify_all();
  }
};

Client::Client(std::unique_ptr<Link> link, const std::string& client_id, ClientOptions opt)
    : impl_(std::make_unique<Impl>()) {
  impl_->link = std::move(link);
  impl_->opt = std::move(opt);
  impl_->client_id = client_id;

  if (!write_frame(*impl_->link, make_connect({client_id, 60})))
    fail(ErrorKind::io, "connect: link closed");
  Frame f;
  if (!read_frame(*impl_->link, f)) fail(ErrorKind::protocol, "connect: no CONNACK");
  const ConnackPacket ack = parse_connack(f);
  if (ack.return_code != 0)
    fail(ErrorKind::protocol,
         "connection refused (return code " + std::to_string(ack.return_code) + ")");
  impl_->reader = std::thread([p = impl_.get()] { p->reader_loop(); });
}

Client::~Client() {
  try {
    disconnect();
  } catch (...) {
  }
  if (impl_->reader.joinable()) impl_->reader.join();
}

void Client::subscribe(const std::string& topic, Handler handler) {
  uint16_t id;
  {
    std::lock_guard lk(impl_->mu);
    if (impl_->closed) fail(ErrorKind::state, "subscribe: connection closed");
    id = impl_->alloc_id();
    impl_->handlers[topic] = std::move(handler);  // registered before SUBACK to avoid a gap
  }
  if (!impl_->send(make_subscribe({id, topic, 1})))
    fail(ErrorKind::io, "subscribe: link closed");
  std::unique_lock lk(impl_->mu);
  const bool got = impl_->cv.wait_for(lk, impl_->opt.handshake_timeout, [&] {
    return impl_->closed || impl_->subacks.count(id);
  });
  if (!got || impl_->closed) {
    impl_->handlers.erase(topic);
    fail(ErrorKind::protocol, "subscribe: no SUBACK for packet id " + std::to_string(id));
  }
  const uint8_t rc = impl_->subacks[id];
  impl_->subacks.erase(id);
  if (rc == 0x80) {
    impl_->handlers.erase(topic);
    fail(ErrorKind::protocol, "subscription to '" + topic + "' refused");
  }
}

void Client::publish_qos0(const std::string& topic, std::span<const uint8_t> payload) {
  PublishPacket p;
  p.topic = topic;
  p.payload.assign(payload.begin(), payload.end());
  p.qos = 0;
  if (!impl_->send(make_publish(p))) fail(ErrorKind::io, "publish: link closed");
}

void Client::publish_qos1(const std::string& topic, std::span<const uint8_t> payload) {
  PublishPacket p;
  p.topic = topic;
  p.payload.assign(payload.begin(), payload.end());
  p.qos = 1;
  {
    std::lock_guard lk(impl_->mu);
    if (impl_->closed) fail(ErrorKind::state, "publish: connection closed");
    p.packet_id = impl_->alloc_id();
    impl_->pending_pub.insert(p.packet_id);
  }
  for (int attempt = 1; attempt <= impl_->opt.max_attempts; ++attempt) {
    p.dup = attempt > 1;
    if (!impl_->send(make_publish(p))) {
      std::lock_guard lk(impl_->mu);
      impl_->pending_pub.erase(p.packet_id);
      fail(ErrorKind::io, "publish: link closed (packet id " + std::to_string(p.packet_id) + ")");
    }
    std::unique_lock lk(impl_->mu);
    impl_->cv.wait_for(lk, impl_->opt.retransmit_interval, [&] {
      return impl_->closed || impl_->acked_pub.count(p.packet_id);
    });
    if (impl_->acked_pub.erase(p.packet_id)) return;
    if (impl_->closed) {
      std::string ids;
      for (uint16_t id : impl_->pending_pub) ids += (ids.empty() ? "" : ",") + std::to_string(id);
      fail(ErrorKind::protocol, "connection lost; unacknowledged ids: " + ids);
    }
  }
  {
    std::lock_guard lk(impl_->mu);
    impl_->pending_pub.erase(p.packet_id);
  }
  fail(ErrorKind::protocol, "publish not acknowledged (packet id " + std::to_string(p.packet_id) +
                                ") after " + std::to_string(impl_->opt.max_attempts) + " attempts");
}

void Client::ping() {
  uint64_t before;
  {
    std::lock_guard lk(impl_->mu);
    if (impl_->closed) fail(ErrorKind::state, "ping: connection closed");
    before = impl_->pings_answered;
  }
  if (!impl_->send(make_pingreq())) fail(ErrorKind::io, "ping: link closed");
  std::unique_lock lk(impl_->mu);
  const bool got = impl_->cv.wait_for(lk, impl_->opt.handshake_timeout, [&] {
    return impl_->closed || impl_->pings_answered > before;
  });
  if (!got || impl_->closed) fail(ErrorKind::protocol, "ping: no PINGRESP");
}

void Client::disconnect() {
  bool was_closed;
  {
    std::lock_guard lk(impl_->mu);
    was_closed = impl_->closed;
  }
  if (!was_closed) impl_->send(make_disconnect());
  impl_->link->close();
}

bool Client::connected() const {
  std::lock_guard lk(impl_->mu);
  return !impl_->closed;
}

std::vector<uint16_t> Client::unacked_ids() const {
  std::lock_guard lk(impl_->mu);
  return {impl_->pending_pub.begin(), impl_->pending_pub.end()};
}

}  // namespace amqc
