#include "pettrace/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace pet::sim {

namespace {

constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

std::uint64_t ceil_to(std::uint64_t t, std::uint64_t step) { return (t + step - 1) / step * step; }

}  // namespace

Simulation::Simulation(ContactTrace trace, ProtocolConfig cfg, std::uint64_t seed, SimOptions opt)
    : trace_(std::move(trace)),
      cfg_(std::move(cfg)),
      opt_(opt),
      group_(crypto::GroupParams::curve25519()) {
  cfg_.validate();
  validate_trace(trace_);
  ble_fragment_ = cfg_.ble_variant == "fragment";
  horizon_ = static_cast<std::uint64_t>(trace_.horizon_days) * 86400;

  // One master stream; every component forks its own. The fork order here is
  // part of the reproducibility contract.
  Rng master(seed);
  addr_salt_ = master.next_u64();
  Rng server_rng = master.fork(1);
  Rng mix_rng = master.fork(2);
  server_ = std::make_unique<server::Server>(cfg_, server_rng);
  proxy_ = std::make_unique<transport::ProxyChannel>(&queue_, cfg_.proxy_delay_sec);
  mix_ = std::make_unique<transport::MixChannel>(&queue_, cfg_.mix_delay_min_sec,
                                                 cfg_.mix_delay_max_sec, mix_rng);

  std::uint32_t n = trace_.population;
  devices_.reserve(n);
  issuance_rngs_.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    devices_.emplace_back(group_, cfg_, master.fork(0x10000 + i));
    issuance_rngs_.push_back(master.fork(0x2000000 + i));
  }
  caches_.resize(n);
  diagnosed_.assign(n, false);
  first_notified_day_.assign(n, -1);
  pending_request_epoch_.assign(n, 0);
  stateless_scores_.assign(n, 0);
  stateless_requests_.assign(n, 0);
  ebid_history_.resize(n);
}

void Simulation::add_injection(const InjectionRule& rule) {
  if (rule.source >= trace_.population || rule.target >= trace_.population)
    throw std::invalid_argument("injection rule references an unknown device");
  if (rule.source == rule.target)
    throw std::invalid_argument("injection source and target must differ");
  injections_.push_back(rule);
}

ble::DeviceAddr Simulation::device_addr(std::uint32_t i, std::uint64_t epoch) const {
  ByteWriter w;
  w.u64(addr_salt_);
  w.u32(i);
  w.u64(epoch);
  auto digest = crypto::sha256(w.bytes());
  ble::DeviceAddr addr{};
  std::copy_n(digest.begin(), addr.size(), addr.begin());
  return addr;
}

void Simulation::for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn) {
  // Parallel execution only pays off for wide phases; interleaving cannot
  // change results because every index touches disjoint state.
  if (!opt_.parallel || n < 512) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  unsigned workers = opt_.threads ? opt_.threads : std::thread::hardware_concurrency();
  workers = std::clamp(workers, 1u, 64u);
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> threads;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk;
    if (lo >= n) break;
    std::size_t hi = std::min(n, lo + chunk);
    threads.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  if (error) std::rethrow_exception(error);
}

void Simulation::register_devices() {
  std::size_t n = devices_.size();
  const auto& authority = server_->authority_key(server::TokenClass::Registration);
  std::vector<blindsig::AuthToken> tokens(n);
  for_each_index(n, [&](std::size_t i) {
    tokens[i] = blindsig::issue_token(authority, issuance_rngs_[i]);
  });
  for (std::size_t i = 0; i < n; ++i) {
    auto rep = server_->handle_register({wire::AuthTokenWire::from(tokens[i])}, 0);
    if (rep.status != wire::Status::Ok) throw std::runtime_error("registration failed");
    devices_[i].set_registration(rep.id, rep.ek);
  }
}

ScenarioReport Simulation::run() {
  if (ran_) throw std::logic_error("a Simulation can only run once");
  ran_ = true;
  if (opt_.mode == Mode::Stateful) register_devices();
  std::uint64_t t = 0;
  for (;;) {
    process_time(t);
    std::uint64_t next = next_time_after(t);
    if (next > horizon_) break;
    t = next;
  }
  ScenarioReport rep;
  finish_report(rep);
  return rep;
}

void Simulation::process_time(std::uint64_t t) {
  do_rotation(t);
  do_trace_events(t);
  do_beacons(t);
  do_ticks(t);
  drain_deliveries(t);
}

void Simulation::do_rotation(std::uint64_t t) {
  if (t % cfg_.epoch_duration_sec != 0) return;
  std::uint64_t epoch = t / cfg_.epoch_duration_sec;
  if (epoch > 0) {
    for_each_index(devices_.size(), [&](std::size_t i) {
      devices_[i].on_epoch_start(epoch, t);
      caches_[i].clear();
    });
  }
  if (t > 0 && t % 86400 == 0) {
    auto today = static_cast<std::uint32_t>(t / 86400);
    server_->gc(today);
    for (std::uint32_t i = 0; i < devices_.size(); ++i) {
      if (diagnosed_[i]) upload_pending(i, t);
    }
    if (opt_.mode == Mode::Stateless) send_stateless_round(t);
  }
  if (opt_.mode == Mode::Stateful) send_esr_round(t);
}

void Simulation::send_esr_round(std::uint64_t t) {
  std::size_t n = devices_.size();
  std::vector<std::optional<agent::Device::EsrRequest>> reqs(n);
  for_each_index(n, [&](std::size_t i) { reqs[i] = devices_[i].build_esr_request(t); });
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!reqs[i]) continue;
    if (reqs[i]->msg.tokens.size() != cfg_.request_padding_tokens) padding_ok_ = false;
    note_requested_tokens(i, reqs[i]->real_tokens);
    pending_request_epoch_[i] = reqs[i]->epoch;
    proxy_->to_server(t, wire::encode(reqs[i]->msg), i);
  }
}

void Simulation::send_stateless_round(std::uint64_t t) {
  auto today = static_cast<std::uint32_t>(t / 86400);
  std::uint32_t from_day = today > cfg_.retention_days ? today - cfg_.retention_days : 0;
  // Key creation order is part of the deterministic run.
  for (std::uint32_t d = from_day; d <= today; ++d) server_->day_key(d);
  for (std::uint32_t i = 0; i < devices_.size(); ++i) {
    std::map<std::uint32_t, std::vector<crypto::PetToken>> by_day;
    for (const auto& r : devices_[i].request_records()) {
      if (r.day >= from_day && r.day <= today) by_day[r.day].push_back(r.token);
    }
    for (std::uint32_t d = from_day; d <= today; ++d) {
      auto token = blindsig::issue_token(server_->day_key(d), issuance_rngs_[i]);
      wire::StatelessEsr q;
      q.day = d;
      q.auth = wire::AuthTokenWire::from(token);
      if (auto it = by_day.find(d); it != by_day.end()) q.tokens = std::move(it->second);
      note_requested_tokens(i, q.tokens);
      stateless_requests_[i]++;
      proxy_->to_server(t, wire::encode(q), i);
    }
  }
}

void Simulation::upload_pending(std::uint32_t dev, std::uint64_t t) {
  auto& d = devices_[dev];
  std::size_t count = d.pending_upload_count();
  if (count == 0) return;
  const auto& authority = server_->authority_key(server::TokenClass::Diagnosis);
  std::vector<blindsig::AuthToken> tokens;
  tokens.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    tokens.push_back(blindsig::issue_token(authority, issuance_rngs_[dev]));
  }
  auto msgs = d.build_upload_batch(tokens);
  if (opt_.control_upload_request_list) {
    // Deliberately wrong protocol: push the request-side twin of each record.
    std::map<crypto::PetToken, std::size_t> index;
    auto uploads = d.upload_records();
    auto requests = d.request_records();
    for (std::size_t i = 0; i < uploads.size(); ++i) index.emplace(uploads[i].token, i);
    for (auto& m : msgs) {
      auto it = index.find(m.token);
      if (it != index.end()) m.token = requests[it->second].token;
    }
  }
  for (const auto& m : msgs) {
    note_uploaded_token(dev, m.token);
    mix_->submit(t, wire::encode(m), dev);
  }
}

void Simulation::do_trace_events(std::uint64_t t) {
  while (trace_pos_ < trace_.events.size() && trace_.events[trace_pos_].time == t) {
    const auto& ev = trace_.events[trace_pos_++];
    switch (ev.kind) {
      case TraceEventKind::ContactStart:
        active_contacts_.insert(std::minmax(ev.a, ev.b));
        break;
      case TraceEventKind::ContactEnd:
        active_contacts_.erase(std::minmax(ev.a, ev.b));
        break;
      case TraceEventKind::Diagnose:
        diagnosed_[ev.a] = true;
        upload_pending(ev.a, t);
        break;
      case TraceEventKind::TestResult: {
        if (opt_.mode == Mode::Stateful && devices_[ev.a].registered()) {
          auto token = blindsig::issue_token(
              server_->authority_key(server::TokenClass::TestResult), issuance_rngs_[ev.a]);
          wire::TestResult msg;
          msg.id = devices_[ev.a].reg_id();
          msg.ek = devices_[ev.a].entry_key();
          msg.positive = ev.positive ? 1 : 0;
          msg.auth = wire::AuthTokenWire::from(token);
          proxy_->to_server(t, wire::encode(msg), ev.a);
        }
        if (!ev.positive) devices_[ev.a].acknowledge_negative_test();
        break;
      }
    }
  }
}

void Simulation::deliver_beacon(std::uint32_t receiver, const crypto::Ebid& ebid,
                                const ble::DeviceAddr& addr, std::uint64_t t) {
  std::uint64_t epoch = t / cfg_.epoch_duration_sec;
  auto seg = ble::segment_ebid(ebid);
  std::optional<crypto::Ebid> complete;
  if (!ble_fragment_) {
    auto adv = ble::build_adv(seg.low, wire::kVersion, 0);
    auto parsed_adv = ble::parse_adv(adv);
    if (parsed_adv.ok()) {
      caches_[receiver].observe(addr, ble::HalfKind::Low, parsed_adv.value->id_low, epoch);
    }
    auto rsp = ble::build_scan_rsp(seg.high);
    auto parsed_rsp = ble::parse_scan_rsp(rsp);
    if (parsed_rsp.ok()) {
      complete = caches_[receiver].observe(addr, ble::HalfKind::High, *parsed_rsp.value, epoch);
    }
  } else {
    for (const auto& frag : ble::build_fragments(ebid, wire::kVersion, 0)) {
      auto parsed = ble::parse_fragment(frag);
      if (!parsed.ok()) continue;
      auto kind = parsed.value->index == 0 ? ble::HalfKind::Low : ble::HalfKind::High;
      auto got = caches_[receiver].observe(addr, kind, parsed.value->half, epoch);
      if (got) complete = got;
    }
  }
  if (complete) devices_[receiver].on_observation(*complete, t);
}

void Simulation::do_beacons(std::uint64_t t) {
  if (t % cfg_.beacon_interval_sec != 0) return;
  if (active_contacts_.empty() && injections_.empty()) return;
  std::uint64_t epoch = t / cfg_.epoch_duration_sec;

  struct Tx {
    std::uint32_t receiver;
    crypto::Ebid ebid;
    ble::DeviceAddr addr;
  };
  std::vector<Tx> txs;
  for (const auto& [a, b] : active_contacts_) {
    // Both identities materialize here, on the sequential path, so the
    // parallel receive step below reads only copied values.
    const auto& ida = devices_[a].identity();
    const auto& idb = devices_[b].identity();
    ebid_history_[a][epoch] = ida.ebid;
    ebid_history_[b][epoch] = idb.ebid;
    txs.push_back({b, ida.ebid, device_addr(a, epoch)});
    txs.push_back({a, idb.ebid, device_addr(b, epoch)});
  }
  for (const auto& rule : injections_) {
    if (t < rule.from_time || t >= rule.until_time) continue;
    crypto::Ebid ebid;
    if (rule.epoch_lag == 0) {
      ebid = devices_[rule.source].identity().ebid;
      ebid_history_[rule.source][epoch] = ebid;
    } else {
      if (epoch < rule.epoch_lag) continue;
      const auto& hist = ebid_history_[rule.source];
      auto it = hist.find(epoch - rule.epoch_lag);
      if (it == hist.end()) continue;  // nothing was broadcast back then
      ebid = it->second;
    }
    txs.push_back({rule.target, ebid, rule.addr});
  }
  if (txs.empty()) return;
  beacons_delivered_ += txs.size();

  // Group by receiver; a receiver's deliveries stay in construction order.
  std::map<std::uint32_t, std::vector<const Tx*>> groups;
  for (const auto& tx : txs) groups[tx.receiver].push_back(&tx);
  std::vector<std::pair<const std::uint32_t, std::vector<const Tx*>>*> group_list;
  group_list.reserve(groups.size());
  for (auto& g : groups) group_list.push_back(&g);
  for_each_index(group_list.size(), [&](std::size_t gi) {
    for (const Tx* tx : group_list[gi]->second) {
      deliver_beacon(tx->receiver, tx->ebid, tx->addr, t);
    }
  });
  for (const auto& g : group_list) maybe_active_.insert(g->first);
}

void Simulation::do_ticks(std::uint64_t t) {
  if (maybe_active_.empty()) return;
  std::vector<std::uint32_t> ids(maybe_active_.begin(), maybe_active_.end());
  for_each_index(ids.size(), [&](std::size_t i) { devices_[ids[i]].tick(t); });
  for (std::uint32_t id : ids) {
    if (devices_[id].active_count() == 0) maybe_active_.erase(id);
  }
}

void Simulation::drain_deliveries(std::uint64_t t) {
  while (queue_.next_time() && *queue_.next_time() == t) {
    for (auto& d : queue_.pop_at(t)) {
      messages_delivered_++;
      auto msg = wire::decode(d.payload);
      if (!msg) continue;
      if (d.to_server) {
        auto reply = server_->handle(*msg, t);
        if (reply) proxy_->to_device(t, d.endpoint, wire::encode(*reply));
      } else {
        handle_device_delivery(d.endpoint, *msg, t);
      }
    }
  }
}

void Simulation::handle_device_delivery(std::uint32_t dev, const wire::Message& msg,
                                        std::uint64_t t) {
  if (const auto* rep = std::get_if<wire::EsrRep>(&msg)) {
    auto outcome = devices_[dev].on_esr_reply(rep->status, pending_request_epoch_[dev]);
    if (outcome.first_notice && first_notified_day_[dev] < 0) {
      first_notified_day_[dev] = static_cast<std::int64_t>(t / 86400);
    }
    return;
  }
  if (const auto* rep = std::get_if<wire::StatelessRep>(&msg)) {
    if (rep->status == wire::Status::Ok) {
      stateless_scores_[dev] += rep->score;
      if (first_notified_day_[dev] < 0 &&
          static_cast<double>(stateless_scores_[dev]) > cfg_.risk_threshold) {
        first_notified_day_[dev] = static_cast<std::int64_t>(t / 86400);
      }
    }
    return;
  }
  // UploadAck and stray kinds need no device action.
}

void Simulation::note_requested_tokens(std::uint32_t dev,
                                       std::span<const crypto::PetToken> real) {
  for (const auto& token : real) {
    auto [it, inserted] = real_token_owner_.emplace(token, dev);
    if (!inserted && it->second != dev) token_shared_ = true;
    if (upload_token_owner_.contains({token, dev})) token_overlap_ = true;
  }
}

void Simulation::note_uploaded_token(std::uint32_t dev, const crypto::PetToken& token) {
  upload_token_owner_.insert({token, dev});
  if (auto it = real_token_owner_.find(token);
      it != real_token_owner_.end() && it->second == dev) {
    token_overlap_ = true;
  }
}

std::optional<std::uint64_t> Simulation::next_beacon_slot(std::uint64_t t) const {
  std::uint64_t interval = cfg_.beacon_interval_sec;
  std::uint64_t slot = (t / interval + 1) * interval;
  if (!active_contacts_.empty()) return slot;
  std::uint64_t best = kNever;
  for (const auto& rule : injections_) {
    if (rule.until_time <= slot) continue;
    std::uint64_t candidate = slot < rule.from_time ? ceil_to(rule.from_time, interval) : slot;
    if (candidate < rule.until_time) best = std::min(best, candidate);
  }
  if (best == kNever) return std::nullopt;
  return best;
}

std::uint64_t Simulation::next_time_after(std::uint64_t t) const {
  std::uint64_t best = (t / cfg_.epoch_duration_sec + 1) * cfg_.epoch_duration_sec;
  if (trace_pos_ < trace_.events.size()) best = std::min(best, trace_.events[trace_pos_].time);
  if (auto nb = next_beacon_slot(t)) best = std::min(best, *nb);
  if (auto nq = queue_.next_time()) best = std::min(best, *nq);
  return best;
}

void Simulation::finish_report(ScenarioReport& rep) {
  std::size_t n = devices_.size();
  rep.devices.resize(n);
  bool conservation = true;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& r = rep.devices[i];
    const auto& c = devices_[i].counters();
    r.device = i;
    r.requests = opt_.mode == Mode::Stateful ? c.requests_sent : stateless_requests_[i];
    r.at_risk_replies = c.replies_at_risk;
    r.rate_limited = c.replies_rate_limited;
    r.finalized = c.finalized;
    r.uploads = c.uploads_built;
    r.request_list_size = devices_[i].request_records().size();
    r.upload_list_size = devices_[i].upload_records().size();
    r.first_notified_day = first_notified_day_[i];
    if (opt_.mode == Mode::Stateful) {
      r.notified = devices_[i].notified();
      if (devices_[i].registered()) {
        // Observer privilege: the harness knows the device's key, so it can
        // read the server-held score for reporting. The server itself never
        // retains this ability.
        auto it = server_->idtable().find(devices_[i].reg_id());
        if (it != server_->idtable().end()) {
          auto plain = crypto::decrypt_entry(devices_[i].entry_key(), it->second);
          if (plain) {
            auto entry = server::IdEntry::deserialize(*plain);
            if (entry) r.risk_score = static_cast<std::uint64_t>(std::llround(entry->risk_score));
          }
        }
      }
    } else {
      r.notified = static_cast<double>(stateless_scores_[i]) > cfg_.risk_threshold;
      r.risk_score = stateless_scores_[i];
    }
    if (c.finalized != c.request_added || c.finalized != c.upload_added ||
        r.request_list_size != r.upload_list_size) {
      conservation = false;
    }
  }

  const auto& sc = server_->counters();
  rep.uploads_accepted = sc.uploads_accepted;
  rep.esr_served = sc.esr_served;
  rep.stateless_served = sc.stateless_served;
  rep.matched_tuples = sc.matched_tuples;
  rep.removed_tuples = sc.removed_tuples;
  rep.expired_tuples = sc.expired_tuples;
  rep.elist_final = server_->elist_size();
  rep.beacons_delivered = beacons_delivered_;
  rep.messages_delivered = messages_delivered_;

  rep.audits.unlinkability = padding_ok_ && !token_overlap_ && !token_shared_;
  rep.audits.key_custody = server_->key_custody().retained() == 0;
  rep.audits.match_once =
      sc.matched_tuples == sc.removed_tuples &&
      sc.uploads_accepted == rep.elist_final + sc.removed_tuples + sc.expired_tuples;
  rep.audits.conservation = conservation;
}

std::string ScenarioReport::to_table() const {
  std::ostringstream out;
  out << "#devices\n";
  out << "device notified first_day requests at_risk rate_limited finalized uploads"
         " request_list upload_list risk_score\n";
  for (const auto& d : devices) {
    out << d.device << ' ' << (d.notified ? 1 : 0) << ' ' << d.first_notified_day << ' '
        << d.requests << ' ' << d.at_risk_replies << ' ' << d.rate_limited << ' ' << d.finalized
        << ' ' << d.uploads << ' ' << d.request_list_size << ' ' << d.upload_list_size << ' '
        << d.risk_score << '\n';
  }
  out << "#counters\n";
  out << "uploads_accepted " << uploads_accepted << '\n';
  out << "esr_served " << esr_served << '\n';
  out << "stateless_served " << stateless_served << '\n';
  out << "matched_tuples " << matched_tuples << '\n';
  out << "removed_tuples " << removed_tuples << '\n';
  out << "expired_tuples " << expired_tuples << '\n';
  out << "elist_final " << elist_final << '\n';
  out << "beacons_delivered " << beacons_delivered << '\n';
  out << "messages_delivered " << messages_delivered << '\n';
  out << "#audits\n";
  out << "unlinkability " << (audits.unlinkability ? "PASS" : "FAIL") << '\n';
  out << "key_custody " << (audits.key_custody ? "PASS" : "FAIL") << '\n';
  out << "match_once " << (audits.match_once ? "PASS" : "FAIL") << '\n';
  out << "conservation " << (audits.conservation ? "PASS" : "FAIL") << '\n';
  out << "#verdict " << (audits.all() ? "PASS" : "FAIL") << '\n';
  return out.str();
}

std::string ScenarioReport::to_summary() const {
  std::size_t notified = 0;
  for (const auto& d : devices) {
    if (d.notified) notified++;
  }
  std::ostringstream out;
  out << "devices: " << devices.size() << ", notified: " << notified << '\n';
  out << "uploads accepted: " << uploads_accepted << ", exposure tuples matched: " << matched_tuples
      << ", left in store: " << elist_final << '\n';
  out << "requests served: " << esr_served + stateless_served
      << ", beacons delivered: " << beacons_delivered << '\n';
  out << "audits: " << (audits.all() ? "all PASS" : "FAILURES PRESENT") << '\n';
  return out.str();
}

}  // namespace pet::sim
