#include "amqc/broker.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace amqc {

namespace {
using Clock = std::chrono::steady_clock;
}

struct Broker::Impl {
  struct Session {
    std::string client_id;
    std::unique_ptr<Link> link;
    std::mutex write_mu;
    std::thread thread;
    bool connected = false;  // CONNECT seen

    // Outbound QoS-1 state (guarded by Impl::mu).
    uint16_t next_id = 1;
    struct InFlight {
      Frame dup_frame;  // retransmit copy, DUP set
      Clock::time_point due;
      int attempts = 1;
    };
    std::unordered_map<uint16_t, InFlight> inflight;

    // Recently PUBACKed inbound ids, to swallow publisher retransmits whose
    // PUBACK we lost (guarded by Impl::mu).
    std::deque<uint16_t> acked_order;
    std::unordered_set<uint16_t> acked;

    std::unordered_set<std::string> subs;
  };

  BrokerOptions opt;
  mutable std::mutex mu;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions;       // by client id
  std::unordered_map<std::string, std::vector<std::weak_ptr<Session>>> subs;  // topic -> sessions
  std::vector<std::shared_ptr<Session>> zombies;  // awaiting join
  BrokerStats stats;
  std::atomic<bool> stopping{false};

  std::unique_ptr<TcpListener> listener;
  std::thread accept_thread;
  std::thread timer_thread;
  std::condition_variable timer_cv;
  std::mutex timer_mu;

  std::vector<std::shared_ptr<Session>> pending;  // sessions pre-CONNECT
  std::condition_variable zombie_cv;

  explicit Impl(BrokerOptions o) : opt(std::move(o)) {
    timer_thread = std::thread([this] { timer_loop(); });
  }

  void log(const std::string& msg) {
    if (opt.log) opt.log(msg);
  }

  // All writes funnel through here so the drop hook sees every frame.
  bool send(Session& s, const Frame& f) {
    if (opt.drop_outgoing && opt.drop_outgoing(f)) {
      std::lock_guard lk(mu);
      ++stats.dropped_frames;
      return true;  // pretend the bytes left and got lost
    }
    std::lock_guard wl(s.write_mu);
    return write_frame(*s.link, f);
  }

  void serve(std::shared_ptr<Session> sess) {
    try {
      session_loop(*sess);
    } catch (const Error& e) {
      {
        std::lock_guard lk(mu);
        ++stats.malformed;
      }
      log("session '" + sess->client_id + "' closed: " + e.what());
    } catch (const std::exception& e) {
      log("session '" + sess->client_id + "' closed: " + e.what());
    }
    sess->link->close();
    detach(sess);
  }

  void session_loop(Session& s) {
    Frame f;
    // Handshake first.
    if (!read_frame(*s.link, f)) return;
    if (f.type != PacketType::connect)
      fail(ErrorKind::protocol, "expected CONNECT, got " + std::string(packet_type_name(f.type)));
    ConnectPacket c = parse_connect(f);
    if (c.client_id.empty() || c.client_id.size() > 64) {
      send(s, make_connack({false, 2}));  // identifier rejected
      fail(ErrorKind::protocol, "client id length " + std::to_string(c.client_id.size()) +
                                    " outside 1..64");
    }
    adopt(s, c.client_id);
    send(s, make_connack({false, 0}));

    while (read_frame(*s.link, f)) {
      switch (f.type) {
        case PacketType::publish:
          handle_publish(s, parse_publish(f));
          break;
        case PacketType::puback: {
          const PubackPacket p = parse_puback(f);
          std::lock_guard lk(mu);
          s.inflight.erase(p.packet_id);
          break;
        }
        case PacketType::subscribe:
          handle_subscribe(s, parse_subscribe(f));
          break;
        case PacketType::pingreq:
          send(s, make_pingresp());
          break;
        case PacketType::disconnect:
          return;
        case PacketType::connect:
          fail(ErrorKind::protocol, "duplicate CONNECT");
        default:
          fail(ErrorKind::protocol,
               std::string("unexpected ") + packet_type_name(f.type) + " from client");
      }
    }
  }

  // Registers the session under its client id, taking over an existing one.
  void adopt(Session& s, const std::string& client_id) {
    std::shared_ptr<Session> self;
    std::shared_ptr<Session> old;
    {
      std::lock_guard lk(mu);
      ++stats.connects;
      for (auto it = pending.begin(); it != pending.end(); ++it) {
        if (it->get() == &s) {
          self = *it;
          pending.erase(it);
          break;
        }
      }
      if (!self) fail(ErrorKind::state, "session not in pending list");
      auto found = sessions.find(client_id);
      if (found != sessions.end()) {
        old = found->second;
        log("takeover of client id '" + client_id + "'");
      }
      s.client_id = client_id;
      s.connected = true;
      sessions[client_id] = self;
    }
    if (old) old->link->close();  // its thread will detach itself
  }

  void detach(const std::shared_ptr<Session>& sess) {
    std::lock_guard lk(mu);
    for (const auto& t : sess->subs) {
      auto it = subs.find(t);
      if (it == subs.end()) continue;
      auto& v = it->second;
      std::erase_if(v, [&](const std::weak_ptr<Session>& w) {
        auto sp = w.lock();
        return !sp || sp == sess;
      });
      if (v.empty()) subs.erase(it);
    }
    auto it = sessions.find(sess->client_id);
    if (it != sessions.end() && it->second == sess) sessions.erase(it);
    std::erase_if(pending, [&](const auto& p) { return p == sess; });
    zombies.push_back(sess);
    zombie_cv.notify_all();
  }

  void handle_subscribe(Session& s, const SubscribePacket& p) {
    std::shared_ptr<Session> self;
    {
      std::lock_guard lk(mu);
      self = sessions.count(s.client_id) ? sessions[s.client_id] : nullptr;
      if (self && self.get() == &s) {
        s.subs.insert(p.topic);
        auto& v = subs[p.topic];
        const bool present = std::any_of(v.begin(), v.end(), [&](const auto& w) {
          return w.lock().get() == &s;
        });
        if (!present) v.push_back(self);
      }
    }
    send(s, make_suback({p.packet_id, p.qos}));
  }

  void handle_publish(Session& s, const PublishPacket& p) {
    bool duplicate = false;
    if (p.qos == 1) {
      std::lock_guard lk(mu);
      ++stats.publishes;
      if (p.dup && s.acked.count(p.packet_id)) {
        duplicate = true;
      } else {
        s.acked.insert(p.packet_id);
        s.acked_order.push_back(p.packet_id);
        if (s.acked_order.size() > 64) {
          s.acked.erase(s.acked_order.front());
          s.acked_order.pop_front();
        }
      }
    } else {
      std::lock_guard lk(mu);
      ++stats.publishes;
    }

    if (p.qos == 1) send(s, make_puback({p.packet_id}));
    if (duplicate) return;  // already forwarded once

    // Snapshot targets, then write outside the registry lock. Forwarding runs
    // on the publisher's thread, so per-publisher order is preserved.
    struct Target {
      std::shared_ptr<Session> sess;
      Frame frame;
    };
    std::vector<Target> targets;
    {
      std::lock_guard lk(mu);
      auto it = subs.find(p.topic);
      if (it != subs.end()) {
        for (auto& w : it->second) {
          auto sub = w.lock();
          if (!sub || !sub->connected) continue;
          PublishPacket out;
          out.topic = p.topic;
          out.payload = p.payload;
          out.qos = p.qos;
          out.dup = false;
          if (p.qos == 1) {
            uint16_t id = sub->next_id;
            while (id == 0 || sub->inflight.count(id)) {
              ++id;
              if (id == 0) ++id;
            }
            sub->next_id = static_cast<uint16_t>(id + 1);
            if (sub->next_id == 0) sub->next_id = 1;
            out.packet_id = id;
            PublishPacket dup = out;
            dup.dup = true;
            sub->inflight[id] = Session::InFlight{make_publish(dup),
                                                  Clock::now() + opt.retransmit_interval, 1};
          }
          ++stats.forwarded;
          targets.push_back({std::move(sub), make_publish(out)});
        }
      }
    }
    for (auto& t : targets) send(*t.sess, t.frame);
  }

  void timer_loop() {
    std::unique_lock tlk(timer_mu);
    while (!stopping.load()) {
      timer_cv.wait_for(tlk, opt.retransmit_interval / 4);
      if (stopping.load()) break;
      struct Resend {
        std::shared_ptr<Session> sess;
        Frame frame;
      };
      std::vector<Resend> due;
      {
        std::lock_guard lk(mu);
        const auto now = Clock::now();
        for (auto& [id, sess] : sessions) {
          for (auto it = sess->inflight.begin(); it != sess->inflight.end();) {
            if (it->second.due > now) {
              ++it;
              continue;
            }
            if (it->second.attempts >= opt.max_retransmits) {
              ++stats.expired;
              it = sess->inflight.erase(it);
              continue;
            }
            ++it->second.attempts;
            it->second.due = now + opt.retransmit_interval;
            ++stats.retransmits;
            due.push_back({sess, it->second.dup_frame});
            ++it;
          }
        }
      }
      for (auto& r : due) send(*r.sess, r.frame);
    }
  }

  void start_session(std::unique_ptr<Link> link) {
    auto sess = std::make_shared<Session>();
    sess->link = std::move(link);
    {
      std::lock_guard lk(mu);
      if (stopping.load()) {
        sess->link->close();
        return;
      }
      pending.push_back(sess);
    }
    sess->thread = std::thread([this, sess] { serve(sess); });
  }

  void stop() {
    if (stopping.exchange(true)) {
      // Second caller: sessions are already being torn down; just wait below.
    }
    timer_cv.notify_all();
    if (listener) listener->close();
    std::vector<std::shared_ptr<Session>> all;
    {
      std::lock_guard lk(mu);
      for (auto& [id, s] : sessions) all.push_back(s);
      for (auto& s : pending) all.push_back(s);
    }
    for (auto& s : all) s->link->close();
    if (accept_thread.joinable()) accept_thread.join();
    if (timer_thread.joinable()) timer_thread.join();
    // Sessions detach themselves into `zombies`; collect them all.
    std::unique_lock lk(mu);
    zombie_cv.wait(lk, [&] { return sessions.empty() && pending.empty(); });
    auto dead = std::move(zombies);
    zombies.clear();
    lk.unlock();
    for (auto& z : dead)
      if (z->thread.joinable()) z->thread.join();
  }

  ~Impl() { stop(); }
};

Broker::Broker(BrokerOptions opt) : impl_(std::make_unique<Impl>(std::move(opt))) {}

Broker::~Broker() { stop(); }

void Broker::start_tcp(uint16_t port) {
  if (impl_->listener) fail(ErrorKind::state, "broker already listening");
  impl_->listener = std::make_unique<TcpListener>(port);
  impl_->accept_thread = std::thread([this] {
    while (auto link = impl_->listener->accept()) impl_->start_session(std::move(link));
  });
}

uint16_t Broker::port() const {
  if (!impl_->listener) fail(ErrorKind::state, "broker is not listening");
  return impl_->listener->port();
}

std::unique_ptr<Link> Broker::connect_local() {
  auto [a, b] = make_pipe();
  impl_->start_session(std::move(a));
  return std::move(b);
}

void Broker::stop() { impl_->stop(); }

BrokerStats Broker::stats() const {
  std::lock_guard lk(impl_->mu);
  return impl_->stats;
}

}  // namespace amqc
