#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "pettrace/bytes.hpp"
#include "pettrace/rng.hpp"

namespace pet::transport {

// One in-flight message. `endpoint` is the channel's connection handle used
// to route replies back; it exists only inside the transport layer and is
// never part of the payload the server handler sees.
struct Delivery {
  std::uint64_t at = 0;
  std::uint64_t prio = 0;  // mix channels randomize this to detach arrival order from send order
  std::uint64_t seq = 0;   // assigned by the queue, final tiebreak
  bool to_server = true;
  std::uint32_t endpoint = 0;
  Bytes payload;
};

class EventQueue {
 public:
  void push(Delivery d);
  std::optional<std::uint64_t> next_time() const;
  // All deliveries scheduled exactly at t, in (at, prio, seq) order.
  std::vector<Delivery> pop_at(std::uint64_t t);
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }

 private:
  struct Cmp {
    bool operator()(const Delivery& a, const Delivery& b) const {
      if (a.at != b.at) return a.at < b.at;
      if (a.prio != b.prio) return a.prio < b.prio;
      return a.seq < b.seq;
    }
  };
  std::multiset<Delivery, Cmp> items_;
  std::uint64_t next_seq_ = 0;
};

// Fixed-delay pipe that models an anonymizing forwarder: the server sees the
// payload and nothing about who sent it; replies travel back over the same
// connection handle.
class ProxyChannel {
 public:
  ProxyChannel(EventQueue* queue, std::uint64_t delay_sec)
      : queue_(queue), delay_(delay_sec) {}

  void to_server(std::uint64_t now, Bytes payload, std::uint32_t reply_endpoint);
  void to_device(std::uint64_t now, std::uint32_t endpoint, Bytes payload);

 private:
  EventQueue* queue_;
  std::uint64_t delay_;
};

// Batch mixer for uploads: every message gets an independent uniform delay
// in [min, max] and a random priority, so server arrival order carries no
// information about submission order.
class MixChannel {
 public:
  MixChannel(EventQueue* queue, std::uint64_t delay_min, std::uint64_t delay_max, Rng rng)
      : queue_(queue), delay_min_(delay_min), delay_max_(delay_max), rng_(rng) {}

  void submit(std::uint64_t now, Bytes payload, std::uint32_t reply_endpoint);

 private:
  EventQueue* queue_;
  std::uint64_t delay_min_;
  std::uint64_t delay_max_;
  Rng rng_;
};

}  // namespace pet::transport
