#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "pettrace/blindsig.hpp"
#include "pettrace/config.hpp"
#include "pettrace/crypto.hpp"
#include "pettrace/rng.hpp"
#include "pettrace/wire.hpp"

namespace pet::agent {

// One kept encounter: the token it produced, the day it started, how long it
// lasted. Request-side and upload-side lists use the same record shape; the
// uploaded flag is only meaningful on the upload side.
struct EncounterRecord {
  crypto::PetToken token;
  std::uint32_t day = 0;
  std::uint32_t duration_sec = 0;
  bool uploaded = false;

  bool operator==(const EncounterRecord&) const = default;
};

struct DeviceCounters {
  std::uint64_t finalized = 0;        // encounters kept
  std::uint64_t request_added = 0;    // records appended to the request list
  std::uint64_t upload_added = 0;     // records appended to the upload list
  std::uint64_t discarded_short = 0;  // below min_encounter_sec
  std::uint64_t dropped_crypto = 0;   // invalid peer EBID or self echo
  std::uint64_t observations = 0;
  std::uint64_t requests_sent = 0;
  std::uint64_t replies_ok = 0;
  std::uint64_t replies_at_risk = 0;
  std::uint64_t replies_rate_limited = 0;
  std::uint64_t replies_auth_failure = 0;
  std::uint64_t uploads_built = 0;
};

// State machine of one handset. Owns its RNG (passed in at construction, no
// global randomness) and its current ephemeral identity. Not thread-safe;
// one device belongs to one simulation thread at a time.
class Device {
 public:
  Device(crypto::GroupParams group, ProtocolConfig cfg, Rng rng);

  // Registration outcome from the server. Without it the device still scans
  // and records encounters but never issues requests.
  void set_registration(std::uint64_t id, const crypto::EntryKey& ek);
  bool registered() const { return id_.has_value(); }
  std::uint64_t reg_id() const;
  const crypto::EntryKey& entry_key() const { return ek_; }

  // Epoch rollover: finalizes every active encounter against the outgoing
  // identity, wipes the old secret, schedules a fresh identity, and purges
  // records that fell out of the retention window. epoch must increase.
  void on_epoch_start(std::uint64_t epoch, std::uint64_t now);

  // Current identity; generated on first use within the epoch so idle
  // devices never pay for key generation.
  const crypto::EphemeralIdentity& identity() const;
  std::uint64_t current_epoch() const { return epoch_; }

  // A fully reassembled peer EBID seen at `now`. Opens a new encounter,
  // extends a live one, or closes a stale one first when the peer was silent
  // longer than peer_loss_timeout_sec.
  void on_observation(const crypto::Ebid& peer, std::uint64_t now);

  // Periodic maintenance: closes encounters whose peer went silent.
  void tick(std::uint64_t now);

  // Explicit close, used by rollover/timeout paths and exposed for tests.
  // Derives the token pair and appends one record to each list when the
  // encounter lasted long enough.
  void finalize_encounter(const crypto::Ebid& peer, std::uint64_t start, std::uint64_t last_seen);

  struct EsrRequest {
    wire::EsrReq msg;
    std::vector<crypto::PetToken> real_tokens;  // ground truth for audits, never sent
    std::uint64_t epoch = 0;
  };

  // Returns a request when the device is registered, no reply is pending,
  // and the local budget allows one. The token list is padded with random
  // tokens to exactly request_padding_tokens entries and shuffled.
  std::optional<EsrRequest> build_esr_request(std::uint64_t now);

  struct ReplyOutcome {
    bool first_notice = false;
  };
  ReplyOutcome on_esr_reply(wire::Status status, std::uint64_t request_epoch);

  // Pairs every not-yet-uploaded record with an auth token, marks it
  // uploaded, and returns the messages in shuffled order. Throws
  // std::invalid_argument when fewer tokens than records are supplied.
  std::vector<wire::Upload> build_upload_batch(std::span<const blindsig::AuthToken> tokens);
  std::size_t pending_upload_count() const;

  // A negative lab result clears the local at-risk state.
  void acknowledge_negative_test() { notified_ = false; }

  std::span<const EncounterRecord> request_records() const { return request_list_; }
  std::span<const EncounterRecord> upload_records() const { return upload_list_; }
  std::size_t active_count() const { return actives_.size(); }
  bool notified() const { return notified_; }
  const DeviceCounters& counters() const { return counters_; }

  // Versioned binary snapshot of the full device state, including the RNG,
  // so a restored device continues byte-identically.
  Bytes snapshot() const;
  static Device restore(std::span<const std::uint8_t> data, crypto::GroupParams group,
                        ProtocolConfig cfg);

 private:
  struct Active {
    std::uint64_t start = 0;
    std::uint64_t last_seen = 0;
  };

  void purge_expired(std::uint32_t today);
  void materialize_identity() const;

  crypto::GroupParams group_;
  ProtocolConfig cfg_;
  mutable Rng rng_;
  std::optional<std::uint64_t> id_;
  crypto::EntryKey ek_{};
  std::uint64_t epoch_ = 0;
  mutable std::optional<crypto::EphemeralIdentity> identity_;
  std::map<crypto::Ebid, Active> actives_;
  std::vector<EncounterRecord> request_list_;
  std::vector<EncounterRecord> upload_list_;
  bool notified_ = false;
  std::uint64_t sre_local_ = 0;
  bool request_pending_ = false;
  DeviceCounters counters_;
};

}  // namespace pet::agent
