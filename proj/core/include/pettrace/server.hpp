#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "pettrace/blindsig.hpp"
#include "pettrace/config.hpp"
#include "pettrace/crypto.hpp"
#include "pettrace/risk.hpp"
#include "pettrace/rng.hpp"
#include "pettrace/wire.hpp"

namespace pet::server {

// Token classes with independent signing keys. A token proves "issued for
// this purpose" and nothing else.
enum class TokenClass : std::uint8_t { Registration = 0, Diagnosis = 1, TestResult = 2 };

// What the server did with decryption keys handed to it. Keys are used for
// one operation and dropped; retained() must stay zero after every call.
struct KeyCustody {
  std::uint64_t received = 0;
  std::uint64_t released = 0;
  std::uint64_t retained() const { return received - released; }
};

struct ExposedTuple {
  crypto::PetToken token;
  std::uint32_t day = 0;
  std::uint32_t duration_sec = 0;

  bool operator==(const ExposedTuple&) const = default;
};

// Plaintext payload of one registered entry. Only ever readable under the
// device-held key; the server works on it transiently and re-encrypts with
// a fresh nonce after every touch.
struct IdEntry {
  std::uint8_t notified = 0;
  std::uint32_t notified_day = 0;  // day the flag was set, drives auto-reset
  std::uint64_t sre_epoch = 0;     // epoch of the last served request
  std::vector<risk::ExposureEntry> exposures;
  double risk_score = 0.0;

  Bytes serialize() const;
  static std::optional<IdEntry> deserialize(std::span<const std::uint8_t> data);
};

// Flat store of uploaded exposure tuples. Matching removes what it returns,
// so a tuple can contribute to at most one request ever.
class ExposedList {
 public:
  void add(const ExposedTuple& t) { tuples_.push_back(t); }
  std::vector<ExposedTuple> match_and_remove(std::span<const crypto::PetToken> tokens);
  std::size_t drop_older_than(std::uint32_t day_cutoff);  // removes tuples with day < cutoff
  std::size_t size() const { return tuples_.size(); }
  std::span<const ExposedTuple> view() const { return tuples_; }

 private:
  std::vector<ExposedTuple> tuples_;
};

// Every accepted token nonce R, partitioned by the day it was spent so old
// partitions can be dropped together with the keys that signed them.
class SpentTokenLedger {
 public:
  bool try_consume(const std::array<std::uint8_t, 32>& r, std::uint32_t window);
  std::size_t drop_older_than(std::uint32_t window_cutoff);
  std::size_t size() const { return all_.size(); }
  const std::map<std::uint32_t, std::vector<std::array<std::uint8_t, 32>>>& partitions() const {
    return by_window_;
  }

 private:
  std::set<std::array<std::uint8_t, 32>> all_;
  std::map<std::uint32_t, std::vector<std::array<std::uint8_t, 32>>> by_window_;
};

struct ServerCounters {
  std::uint64_t registrations = 0;
  std::uint64_t uploads_accepted = 0;
  std::uint64_t esr_served = 0;         // requests that passed auth, incl. rate-limited
  std::uint64_t at_risk_replies = 0;
  std::uint64_t rate_limited_replies = 0;
  std::uint64_t auth_failures = 0;
  std::uint64_t matched_tuples = 0;
  std::uint64_t removed_tuples = 0;   // removed because they matched
  std::uint64_t expired_tuples = 0;   // removed by gc
  std::uint64_t stateless_served = 0;
};

// Backend state and request handlers. The handler signatures take only the
// message plus the current time; transport-level sender information never
// reaches this class.
class Server {
 public:
  Server(ProtocolConfig cfg, Rng rng);

  // Signing keys. The simulation plays the token authority with the same
  // keys; a real deployment would split this role out.
  const blindsig::KeyPair& authority_key(TokenClass c) const;
  const blindsig::KeyPair& day_key(std::uint32_t day);  // created on first use

  wire::RegisterOk handle_register(const wire::Register& msg, std::uint32_t today);
  wire::UploadAck handle_upload(const wire::Upload& msg, std::uint32_t today);
  wire::EsrRep handle_esr(const wire::EsrReq& msg, std::uint64_t epoch_now);
  wire::UploadAck handle_test_result(const wire::TestResult& msg, std::uint32_t today);
  wire::StatelessRep handle_stateless(const wire::StatelessEsr& msg, std::uint32_t today);

  // Dispatch by message kind; nullopt for kinds a server never accepts.
  std::optional<wire::Message> handle(const wire::Message& msg, std::uint64_t now_sec);

  // Daily maintenance: drops exposure tuples and ledger partitions that no
  // request could legitimately touch any more.
  void gc(std::uint32_t today);

  const KeyCustody& key_custody() const { return custody_; }
  const ServerCounters& counters() const { return counters_; }
  std::size_t idtable_size() const { return idtable_.size(); }
  std::size_t elist_size() const { return elist_.size(); }
  std::span<const ExposedTuple> elist_view() const { return elist_.view(); }

  // Stored ciphertexts as an attacker with a disk image would see them.
  const std::map<std::uint64_t, Bytes>& idtable() const { return idtable_; }

  // Versioned binary snapshot of everything the server persists.
  Bytes snapshot() const;
  static Server restore(std::span<const std::uint8_t> data, ProtocolConfig cfg);

 private:
  struct SkipKeygen {};
  Server(ProtocolConfig cfg, Rng rng, SkipKeygen);

  bool consume_class_token(TokenClass c, const wire::AuthTokenWire& auth, std::uint32_t window);

  ProtocolConfig cfg_;
  Rng rng_;
  std::unique_ptr<risk::Scorer> scorer_;
  std::map<TokenClass, blindsig::KeyPair> class_keys_;
  std::map<std::uint32_t, blindsig::KeyPair> day_keys_;
  std::map<std::uint64_t, Bytes> idtable_;
  ExposedList elist_;
  SpentTokenLedger ledger_;
  KeyCustody custody_;
  ServerCounters counters_;
};

}  // namespace pet::server
