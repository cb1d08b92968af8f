#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pettrace/ble.hpp"
#include "pettrace/config.hpp"
#include "pettrace/device.hpp"
#include "pettrace/server.hpp"
#include "pettrace/trace.hpp"
#include "pettrace/transport.hpp"

namespace pet::sim {

enum class Mode : std::uint8_t { Stateful = 0, Stateless = 1 };

// Attacker-controlled radio: during [from_time, until_time) every beacon
// slot delivers `source`'s broadcast to `target` under the attacker's own
// transmitter address. epoch_lag 0 relays the live broadcast, lag k replays
// the broadcast captured k epochs earlier (if one was on the air then).
struct InjectionRule {
  std::uint64_t from_time = 0;
  std::uint64_t until_time = 0;
  std::uint32_t source = 0;
  std::uint32_t target = 0;
  std::uint32_t epoch_lag = 0;
  ble::DeviceAddr addr{};
};

struct SimOptions {
  Mode mode = Mode::Stateful;
  bool parallel = false;
  unsigned threads = 0;  // 0 = hardware concurrency
  // Negative control for the unlinkability audit: diagnosed devices upload
  // their request-side tokens instead of the upload-side ones. A correct
  // audit must flag such a run.
  bool control_upload_request_list = false;
};

struct DeviceReport {
  std::uint32_t device = 0;
  bool notified = false;
  std::int64_t first_notified_day = -1;
  std::uint64_t requests = 0;
  std::uint64_t at_risk_replies = 0;
  std::uint64_t rate_limited = 0;
  std::uint64_t finalized = 0;
  std::uint64_t uploads = 0;
  std::uint64_t request_list_size = 0;
  std::uint64_t upload_list_size = 0;
  std::uint64_t risk_score = 0;  // server-held score (stateful) or local aggregate (stateless)
};

struct AuditReport {
  bool unlinkability = false;
  bool key_custody = false;
  bool match_once = false;
  bool conservation = false;
  bool all() const { return unlinkability && key_custody && match_once && conservation; }
};

struct ScenarioReport {
  std::vector<DeviceReport> devices;
  AuditReport audits;
  std::uint64_t uploads_accepted = 0;
  std::uint64_t esr_served = 0;
  std::uint64_t stateless_served = 0;
  std::uint64_t matched_tuples = 0;
  std::uint64_t removed_tuples = 0;
  std::uint64_t expired_tuples = 0;
  std::uint64_t elist_final = 0;
  std::uint64_t beacons_delivered = 0;
  std::uint64_t messages_delivered = 0;

  // Deterministic machine block: identical runs produce identical bytes.
  std::string to_table() const;
  std::string to_summary() const;
};

// Discrete-event driver: virtual clock, synchronized epochs, explicit
// channels. Every source of randomness forks from the single seed and each
// device draws only from its own stream, so running phases in parallel
// cannot change any outcome.
class Simulation {
 public:
  Simulation(ContactTrace trace, ProtocolConfig cfg, std::uint64_t seed, SimOptions opt = {});

  void add_injection(const InjectionRule& rule);
  ScenarioReport run();

  server::Server& server() { return *server_; }
  agent::Device& device(std::uint32_t i) { return devices_[i]; }
  ble::DeviceAddr device_addr(std::uint32_t i, std::uint64_t epoch) const;

 private:
  void register_devices();
  void process_time(std::uint64_t t);
  void do_rotation(std::uint64_t t);
  void do_trace_events(std::uint64_t t);
  void do_beacons(std::uint64_t t);
  void do_ticks(std::uint64_t t);
  void drain_deliveries(std::uint64_t t);
  void send_esr_round(std::uint64_t t);
  void send_stateless_round(std::uint64_t t);
  void upload_pending(std::uint32_t dev, std::uint64_t t);
  void deliver_beacon(std::uint32_t receiver, const crypto::Ebid& ebid,
                      const ble::DeviceAddr& addr, std::uint64_t t);
  void handle_device_delivery(std::uint32_t dev, const wire::Message& msg, std::uint64_t t);
  void note_requested_tokens(std::uint32_t dev, std::span<const crypto::PetToken> real);
  void note_uploaded_token(std::uint32_t dev, const crypto::PetToken& token);
  std::optional<std::uint64_t> next_beacon_slot(std::uint64_t t) const;
  std::uint64_t next_time_after(std::uint64_t t) const;
  void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn);
  void finish_report(ScenarioReport& rep);

  ContactTrace trace_;
  ProtocolConfig cfg_;
  SimOptions opt_;
  crypto::GroupParams group_;
  std::uint64_t addr_salt_ = 0;
  bool ble_fragment_ = false;
  std::uint64_t horizon_ = 0;

  std::unique_ptr<server::Server> server_;
  std::vector<agent::Device> devices_;
  std::vector<Rng> issuance_rngs_;  // client-side token issuance, one stream per device
  std::vector<ble::ReassemblyCache> caches_;
  std::vector<bool> diagnosed_;
  std::vector<std::int64_t> first_notified_day_;
  std::vector<std::uint64_t> pending_request_epoch_;
  std::vector<std::uint64_t> stateless_scores_;
  std::vector<std::uint64_t> stateless_requests_;
  std::vector<std::map<std::uint64_t, crypto::Ebid>> ebid_history_;
  std::set<std::pair<std::uint32_t, std::uint32_t>> active_contacts_;
  std::set<std::uint32_t> maybe_active_;  // devices that may hold open encounters
  std::vector<InjectionRule> injections_;

  transport::EventQueue queue_;
  std::unique_ptr<transport::ProxyChannel> proxy_;
  std::unique_ptr<transport::MixChannel> mix_;

  std::size_t trace_pos_ = 0;
  std::uint64_t beacons_delivered_ = 0;
  std::uint64_t messages_delivered_ = 0;

  // Streaming audit state. Bogus padding tokens never exist outside one
  // request, so the cross-stream checks track real tokens; padding is
  // checked for exact size instead. A request token equal to some OTHER
  // device's uploaded token is the matching signal, not a leak; the audited
  // property is that no device's own request and upload streams intersect,
  // which is what keeps its queries unlinkable to its uploads.
  bool padding_ok_ = true;
  bool token_overlap_ = false;  // some device both requested and uploaded a token
  bool token_shared_ = false;   // same real token requested by two devices
  std::map<crypto::PetToken, std::uint32_t> real_token_owner_;
  std::set<std::pair<crypto::PetToken, std::uint32_t>> upload_token_owner_;

  bool ran_ = false;
};

}  // namespace pet::sim
