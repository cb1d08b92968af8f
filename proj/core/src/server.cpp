#include "pettrace/server.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace pet::server {

Bytes IdEntry::serialize() const {
  ByteWriter w;
  w.u8(1);  // entry format version
  w.u8(notified);
  w.u32(notified_day);
  w.u64(sre_epoch);
  w.count(exposures.size());
  for (const auto& e : exposures) {
    w.u32(e.day);
    w.u32(e.duration_sec);
    w.blob(e.meta);
  }
  w.f64(risk_score);
  return w.take();
}

std::optional<IdEntry> IdEntry::deserialize(std::span<const std::uint8_t> data) {
  try {
    ByteReader r(data);
    if (r.u8() != 1) return std::nullopt;
    IdEntry e;
    e.notified = r.u8();
    e.notified_day = r.u32();
    e.sre_epoch = r.u64();
    std::size_t n = r.count();
    if (n > 1u << 24) return std::nullopt;
    e.exposures.resize(n);
    for (auto& x : e.exposures) {
      x.day = r.u32();
      x.duration_sec = r.u32();
      x.meta = r.blob();
    }
    e.risk_score = r.f64();
    r.expect_done();
    return e;
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

std::vector<ExposedTuple> ExposedList::match_and_remove(
    std::span<const crypto::PetToken> tokens) {
  std::set<crypto::PetToken> wanted(tokens.begin(), tokens.end());
  std::vector<ExposedTuple> matched;
  auto keep = tuples_.begin();
  for (auto& t : tuples_) {
    if (wanted.contains(t.token)) {
      matched.push_back(t);
    } else {
      *keep++ = std::move(t);
    }
  }
  tuples_.erase(keep, tuples_.end());
  return matched;
}

std::size_t ExposedList::drop_older_than(std::uint32_t day_cutoff) {
  std::size_t before = tuples_.size();
  std::erase_if(tuples_, [&](const ExposedTuple& t) { return t.day < day_cutoff; });
  return before - tuples_.size();
}

bool SpentTokenLedger::try_consume(const std::array<std::uint8_t, 32>& r, std::uint32_t window) {
  if (all_.contains(r)) return false;
  all_.insert(r);
  by_window_[window].push_back(r);
  return true;
}

std::size_t SpentTokenLedger::drop_older_than(std::uint32_t window_cutoff) {
  std::size_t dropped = 0;
  for (auto it = by_window_.begin(); it != by_window_.end() && it->first < window_cutoff;) {
    for (const auto& r : it->second) dropped += all_.erase(r);
    it = by_window_.erase(it);
  }
  return dropped;
}

Server::Server(ProtocolConfig cfg, Rng rng)
    : Server(std::move(cfg), rng, SkipKeygen{}) {
  for (auto c : {TokenClass::Registration, TokenClass::Diagnosis, TokenClass::TestResult}) {
    class_keys_.emplace(c, blindsig::generate_keypair(cfg_.rsa_modulus_bits, rng_));
  }
}

Server::Server(ProtocolConfig cfg, Rng rng, SkipKeygen)
    : cfg_(std::move(cfg)), rng_(rng), scorer_(risk::make_scorer(cfg_.scorer)) {}

const blindsig::KeyPair& Server::authority_key(TokenClass c) const { return class_keys_.at(c); }

const blindsig::KeyPair& Server::day_key(std::uint32_t day) {
  auto it = day_keys_.find(day);
  if (it == day_keys_.end()) {
    it = day_keys_.emplace(day, blindsig::generate_keypair(cfg_.rsa_modulus_bits, rng_)).first;
  }
  return it->second;
}

bool Server::consume_class_token(TokenClass c, const wire::AuthTokenWire& auth,
                                 std::uint32_t window) {
  if (!blindsig::verify_token(auth.to_token(), class_keys_.at(c).pub)) return false;
  return ledger_.try_consume(auth.r, window);
}

wire::RegisterOk Server::handle_register(const wire::Register& msg, std::uint32_t today) {
  if (!consume_class_token(TokenClass::Registration, msg.auth, today)) {
    counters_.auth_failures++;
    return {wire::Status::AuthFailure, 0, {}};
  }
  std::uint64_t id = rng_.next_u64();
  while (idtable_.contains(id)) id = rng_.next_u64();
  crypto::EntryKey ek = crypto::gen_entry_key(rng_);
  custody_.received++;  // the key exists server-side from here
  IdEntry fresh;
  idtable_[id] = crypto::encrypt_entry(ek, fresh.serialize(), rng_);
  custody_.released++;  // and is forgotten as soon as the entry is sealed
  counters_.registrations++;
  return {wire::Status::Ok, id, ek};
}

wire::UploadAck Server::handle_upload(const wire::Upload& msg, std::uint32_t today) {
  if (!consume_class_token(TokenClass::Diagnosis, msg.auth, today)) {
    counters_.auth_failures++;
    return {wire::Status::AuthFailure};
  }
  elist_.add({msg.token, msg.day, msg.duration_sec});
  counters_.uploads_accepted++;
  return {wire::Status::Ok};
}

wire::EsrRep Server::handle_esr(const wire::EsrReq& msg, std::uint64_t epoch_now) {
  auto it = idtable_.find(msg.id);
  if (it == idtable_.end()) {
    counters_.auth_failures++;
    return {wire::Status::AuthFailure};
  }
  custody_.received++;
  auto plain = crypto::decrypt_entry(msg.ek, it->second);
  if (!plain) {
    custody_.released++;
    counters_.auth_failures++;
    return {wire::Status::AuthFailure};
  }
  auto entry = IdEntry::deserialize(*plain);
  if (!entry) {
    custody_.released++;
    counters_.auth_failures++;
    return {wire::Status::AuthFailure};
  }
  counters_.esr_served++;
  auto today = static_cast<std::uint32_t>(epoch_now * cfg_.epoch_duration_sec / 86400);

  // The at-risk flag expires on its own so one notification does not mark
  // the entry forever.
  if (entry->notified && today - entry->notified_day >= cfg_.notified_reset_days) {
    entry->notified = 0;
  }

  wire::Status status;
  if (epoch_now - entry->sre_epoch < cfg_.esr_min_epochs()) {
    counters_.rate_limited_replies++;
    status = wire::Status::RateLimited;
  } else if (entry->notified) {
    entry->sre_epoch = epoch_now;
    counters_.at_risk_replies++;
    status = wire::Status::AtRisk;
  } else {
    auto matched = elist_.match_and_remove(msg.tokens);
    counters_.matched_tuples += matched.size();
    counters_.removed_tuples += matched.size();
    for (const auto& m : matched) {
      entry->exposures.push_back({m.day, m.duration_sec, {}});
    }
    entry->risk_score = scorer_->score(entry->exposures, today, cfg_.retention_days);
    entry->sre_epoch = epoch_now;

    std::size_t in_window = 0;
    for (const auto& e : entry->exposures) {
      if (e.day <= today && today - e.day <= cfg_.retention_days) in_window++;
    }
    bool decision = risk::decide(entry->risk_score, cfg_.risk_threshold) &&
                    in_window >= cfg_.min_exposed_count;
    bool notify = risk::probabilistic_notify(decision, cfg_.notify_probability, rng_);
    if (notify) {
      entry->notified = 1;
      entry->notified_day = today;
      counters_.at_risk_replies++;
      status = wire::Status::AtRisk;
    } else {
      status = wire::Status::Ok;
    }
  }
  // Fresh nonce on every write: two snapshots of the table never reveal
  // whether an entry changed meaningfully.
  it->second = crypto::encrypt_entry(msg.ek, entry->serialize(), rng_);
  custody_.released++;
  return {status};
}

wire::UploadAck Server::handle_test_result(const wire::TestResult& msg, std::uint32_t today) {
  if (!consume_class_token(TokenClass::TestResult, msg.auth, today)) {
    counters_.auth_failures++;
    return {wire::Status::AuthFailure};
  }
  auto it = idtable_.find(msg.id);
  if (it == idtable_.end()) {
    counters_.auth_failures++;
    return {wire::Status::AuthFailure};
  }
  custody_.received++;
  auto plain = crypto::decrypt_entry(msg.ek, it->second);
  auto entry = plain ? IdEntry::deserialize(*plain) : std::optional<IdEntry>{};
  if (!entry) {
    custody_.released++;
    counters_.auth_failures++;
    return {wire::Status::AuthFailure};
  }
  if (!msg.positive) {
    entry->notified = 0;
    entry->notified_day = 0;
  }
  it->second = crypto::encrypt_entry(msg.ek, entry->serialize(), rng_);
  custody_.released++;
  return {wire::Status::Ok};
}

wire::StatelessRep Server::handle_stateless(const wire::StatelessEsr& msg, std::uint32_t today) {
  if (!blindsig::verify_token(msg.auth.to_token(), day_key(msg.day).pub) ||
      !ledger_.try_consume(msg.auth.r, msg.day)) {
    counters_.auth_failures++;
    return {wire::Status::AuthFailure, 0};
  }
  counters_.stateless_served++;
  auto matched = elist_.match_and_remove(msg.tokens);
  counters_.matched_tuples += matched.size();
  counters_.removed_tuples += matched.size();
  std::vector<risk::ExposureEntry> entries;
  entries.reserve(matched.size());
  for (const auto& m : matched) entries.push_back({m.day, m.duration_sec, {}});
  double day_score = scorer_->score(entries, today, cfg_.retention_days);
  return {wire::Status::Ok, static_cast<std::uint64_t>(std::llround(day_score))};
}

std::optional<wire::Message> Server::handle(const wire::Message& msg, std::uint64_t now_sec) {
  auto today = static_cast<std::uint32_t>(now_sec / 86400);
  std::uint64_t epoch_now = now_sec / cfg_.epoch_duration_sec;
  if (const auto* m = std::get_if<wire::Register>(&msg)) return handle_register(*m, today);
  if (const auto* m = std::get_if<wire::Upload>(&msg)) return handle_upload(*m, today);
  if (const auto* m = std::get_if<wire::EsrReq>(&msg)) return handle_esr(*m, epoch_now);
  if (const auto* m = std::get_if<wire::TestResult>(&msg)) return handle_test_result(*m, today);
  if (const auto* m = std::get_if<wire::StatelessEsr>(&msg)) return handle_stateless(*m, today);
  return std::nullopt;
}

void Server::gc(std::uint32_t today) {
  // Keep one day of slack past the retention window so a tuple uploaded
  // late on its last eligible day can still be matched.
  std::uint32_t horizon = cfg_.retention_days + 1;
  std::uint32_t cutoff = today > horizon ? today - horizon : 0;
  counters_.expired_tuples += elist_.drop_older_than(cutoff);
  ledger_.drop_older_than(cutoff);
}

Bytes Server::snapshot() const {
  ByteWriter w;
  w.u8(1);  // snapshot format version
  w.u64(rng_.state());
  auto put_key = [&w](const blindsig::KeyPair& kp) {
    Bytes n = blindsig::mpz_to_bytes(kp.pub.n);
    Bytes e = blindsig::mpz_to_bytes(kp.pub.e);
    Bytes d = blindsig::mpz_to_bytes(kp.d);
    w.blob(n);
    w.blob(e);
    w.blob(d);
  };
  w.count(class_keys_.size());
  for (const auto& [c, kp] : class_keys_) {
    w.u8(static_cast<std::uint8_t>(c));
    put_key(kp);
  }
  w.count(day_keys_.size());
  for (const auto& [day, kp] : day_keys_) {
    w.u32(day);
    put_key(kp);
  }
  w.count(idtable_.size());
  for (const auto& [id, blob] : idtable_) {
    w.u64(id);
    w.blob(blob);
  }
  w.count(elist_.view().size());
  for (const auto& t : elist_.view()) {
    w.raw(t.token.bytes);
    w.u32(t.day);
    w.u32(t.duration_sec);
  }
  // The spent-token ledger must survive restarts or replayed tokens would be
  // accepted again.
  w.count(ledger_.partitions().size());
  for (const auto& [window, rs] : ledger_.partitions()) {
    w.u32(window);
    w.count(rs.size());
    for (const auto& r : rs) w.raw(r);
  }
  w.u64(custody_.received);
  w.u64(custody_.released);
  w.u64(counters_.registrations);
  w.u64(counters_.uploads_accepted);
  w.u64(counters_.esr_served);
  w.u64(counters_.at_risk_replies);
  w.u64(counters_.rate_limited_replies);
  w.u64(counters_.auth_failures);
  w.u64(counters_.matched_tuples);
  w.u64(counters_.removed_tuples);
  w.u64(counters_.expired_tuples);
  w.u64(counters_.stateless_served);
  return w.take();
}

Server Server::restore(std::span<const std::uint8_t> data, ProtocolConfig cfg) {
  ByteReader r(data);
  if (r.u8() != 1) throw DecodeError("unsupported server snapshot version");
  std::uint64_t rng_state = r.u64();
  Server s(std::move(cfg), Rng::from_state(rng_state), SkipKeygen{});
  auto get_key = [&r]() {
    blindsig::KeyPair kp;
    kp.pub.n = blindsig::mpz_from_bytes(r.blob());
    kp.pub.e = blindsig::mpz_from_bytes(r.blob());
    kp.d = blindsig::mpz_from_bytes(r.blob());
    return kp;
  };
  s.class_keys_.clear();
  std::size_t n_class = r.count();
  for (std::size_t i = 0; i < n_class; ++i) {
    auto c = static_cast<TokenClass>(r.u8());
    s.class_keys_.emplace(c, get_key());
  }
  std::size_t n_day = r.count();
  for (std::size_t i = 0; i < n_day; ++i) {
    std::uint32_t day = r.u32();
    s.day_keys_.emplace(day, get_key());
  }
  std::size_t n_id = r.count();
  for (std::size_t i = 0; i < n_id; ++i) {
    std::uint64_t id = r.u64();
    s.idtable_[id] = r.blob();
  }
  std::size_t n_tuples = r.count();
  for (std::size_t i = 0; i < n_tuples; ++i) {
    ExposedTuple t;
    t.token.bytes = r.fixed<32>();
    t.day = r.u32();
    t.duration_sec = r.u32();
    s.elist_.add(t);
  }
  std::size_t n_windows = r.count();
  for (std::size_t i = 0; i < n_windows; ++i) {
    std::uint32_t window = r.u32();
    std::size_t n_spent = r.count();
    for (std::size_t j = 0; j < n_spent; ++j) s.ledger_.try_consume(r.fixed<32>(), window);
  }
  s.custody_.received = r.u64();
  s.custody_.released = r.u64();
  s.counters_.registrations = r.u64();
  s.counters_.uploads_accepted = r.u64();
  s.counters_.esr_served = r.u64();
  s.counters_.at_risk_replies = r.u64();
  s.counters_.rate_limited_replies = r.u64();
  s.counters_.auth_failures = r.u64();
  s.counters_.matched_tuples = r.u64();
  s.counters_.removed_tuples = r.u64();
  s.counters_.expired_tuples = r.u64();
  s.counters_.stateless_served = r.u64();
  r.expect_done();
  return s;
}

}  // namespace pet::server
