#include "pettrace/transport.hpp"

namespace pet::transport {

void EventQueue::push(Delivery d) {
  d.seq = next_seq_++;
  items_.insert(std::move(d));
}

std::optional<std::uint64_t> EventQueue::next_time() const {
  if (items_.empty()) return std::nullopt;
  return items_.begin()->at;
}

std::vector<Delivery> EventQueue::pop_at(std::uint64_t t) {
  std::vector<Delivery> out;
  while (!items_.empty() && items_.begin()->at == t) {
    out.push_back(*items_.begin());
    items_.erase(items_.begin());
  }
  return out;
}

void ProxyChannel::to_server(std::uint64_t now, Bytes payload, std::uint32_t reply_endpoint) {
  Delivery d;
  d.at = now + delay_;
  d.prio = 0;
  d.to_server = true;
  d.endpoint = reply_endpoint;
  d.payload = std::move(payload);
  queue_->push(std::move(d));
}

void ProxyChannel::to_device(std::uint64_t now, std::uint32_t endpoint, Bytes payload) {
  Delivery d;
  d.at = now + delay_;
  d.prio = 0;
  d.to_server = false;
  d.endpoint = endpoint;
  d.payload = std::move(payload);
  queue_->push(std::move(d));
}

void MixChannel::submit(std::uint64_t now, Bytes payload, std::uint32_t reply_endpoint) {
  Delivery d;
  d.at = now + delay_min_ + rng_.uniform(delay_max_ - delay_min_ + 1);
  d.prio = rng_.next_u64();
  d.to_server = true;
  d.endpoint = reply_endpoint;
  d.payload = std::move(payload);
  queue_->push(std::move(d));
}

}  // namespace pet::transport
