#include "pettrace/device.hpp"

#include <algorithm>
#include <stdexcept>

namespace pet::agent {

Device::Device(crypto::GroupParams group, ProtocolConfig cfg, Rng rng)
    : group_(group), cfg_(std::move(cfg)), rng_(rng) {}

std::uint64_t Device::reg_id() const {
  if (!id_) throw std::logic_error("device is not registered");
  return *id_;
}

void Device::set_registration(std::uint64_t id, const crypto::EntryKey& ek) {
  id_ = id;
  ek_ = ek;
}

void Device::materialize_identity() const {
  if (!identity_ || identity_->epoch != epoch_) {
    identity_ = crypto::gen_identity(group_, rng_, epoch_);
  }
}

const crypto::EphemeralIdentity& Device::identity() const {
  materialize_identity();
  return *identity_;
}

void Device::on_epoch_start(std::uint64_t epoch, std::uint64_t now) {
  if (epoch <= epoch_) throw std::invalid_argument("epoch must increase");
  // Close every live encounter against the identity that is rotating out.
  // finalize_encounter materializes that identity on demand, so this works
  // even for devices that only listened during the epoch.
  for (const auto& [peer, active] : actives_) {
    finalize_encounter(peer, active.start, active.last_seen);
  }
  actives_.clear();
  if (identity_) identity_->erase_secret();
  identity_.reset();  // next identity() call generates the new key pair
  epoch_ = epoch;
  purge_expired(static_cast<std::uint32_t>(now / 86400));
}

void Device::purge_expired(std::uint32_t today) {
  auto expired = [&](const EncounterRecord& r) { return today - r.day > cfg_.retention_days; };
  std::erase_if(request_list_, expired);
  std::erase_if(upload_list_, expired);
}

void Device::on_observation(const crypto::Ebid& peer, std::uint64_t now) {
  counters_.observations++;
  if (identity_ && peer == identity_->ebid) {
    counters_.dropped_crypto++;  // echo of our own broadcast
    return;
  }
  auto it = actives_.find(peer);
  if (it != actives_.end()) {
    if (now - it->second.last_seen > cfg_.peer_loss_timeout_sec) {
      // The peer vanished and came back within one epoch: close the old
      // encounter and start a new one.
      finalize_encounter(peer, it->second.start, it->second.last_seen);
      it->second = Active{now, now};
    } else {
      it->second.last_seen = now;
    }
    return;
  }
  actives_.emplace(peer, Active{now, now});
}

void Device::tick(std::uint64_t now) {
  for (auto it = actives_.begin(); it != actives_.end();) {
    if (now - it->second.last_seen > cfg_.peer_loss_timeout_sec) {
      finalize_encounter(it->first, it->second.start, it->second.last_seen);
      it = actives_.erase(it);
    } else {
      ++it;
    }
  }
}

void Device::finalize_encounter(const crypto::Ebid& peer, std::uint64_t start,
                                std::uint64_t last_seen) {
  auto duration = static_cast<std::uint32_t>(last_seen - start);
  if (duration < cfg_.min_encounter_sec) {
    counters_.discarded_short++;
    return;
  }
  materialize_identity();
  if (peer == identity_->ebid) {
    counters_.dropped_crypto++;
    return;
  }
  auto shared = crypto::dh_shared(group_, identity_->secret, peer);
  if (!shared) {
    counters_.dropped_crypto++;
    return;
  }
  auto [pet1, pet2] = crypto::derive_pet_pair(*shared);
  auto roles = crypto::assign_roles(identity_->ebid, peer, pet1, pet2);
  auto day = static_cast<std::uint32_t>(start / 86400);
  request_list_.push_back({roles.request_token, day, duration, false});
  counters_.request_added++;
  upload_list_.push_back({roles.upload_token, day, duration, false});
  counters_.upload_added++;
  counters_.finalized++;
}

std::optional<Device::EsrRequest> Device::build_esr_request(std::uint64_t now) {
  if (!id_ || request_pending_) return std::nullopt;
  std::uint64_t epoch_now = now / cfg_.epoch_duration_sec;
  if (epoch_now - sre_local_ < cfg_.esr_min_epochs()) return std::nullopt;

  EsrRequest req;
  req.epoch = epoch_now;
  req.msg.id = *id_;
  req.msg.ek = ek_;

  // Newest records win the budget when there are more than fit.
  std::vector<const EncounterRecord*> chosen;
  chosen.reserve(request_list_.size());
  for (const auto& r : request_list_) chosen.push_back(&r);
  std::stable_sort(chosen.begin(), chosen.end(),
                   [](const auto* a, const auto* b) { return a->day > b->day; });
  if (chosen.size() > cfg_.request_padding_tokens) chosen.resize(cfg_.request_padding_tokens);

  for (const auto* r : chosen) {
    req.msg.tokens.push_back(r->token);
    req.real_tokens.push_back(r->token);
  }
  while (req.msg.tokens.size() < cfg_.request_padding_tokens) {
    req.msg.tokens.push_back(crypto::PetToken{rng_.bytes32()});
  }
  rng_.shuffle(req.msg.tokens.begin(), req.msg.tokens.end());

  request_pending_ = true;
  counters_.requests_sent++;
  return req;
}

Device::ReplyOutcome Device::on_esr_reply(wire::Status status, std::uint64_t request_epoch) {
  request_pending_ = false;
  switch (status) {
    case wire::Status::Ok:
      counters_.replies_ok++;
      sre_local_ = request_epoch;
      return {};
    case wire::Status::AtRisk: {
      counters_.replies_at_risk++;
      sre_local_ = request_epoch;
      bool first = !notified_;
      notified_ = true;
      return {first};
    }
    case wire::Status::RateLimited:
      counters_.replies_rate_limited++;
      return {};
    case wire::Status::AuthFailure:
      counters_.replies_auth_failure++;
      return {};
  }
  return {};
}

std::size_t Device::pending_upload_count() const {
  return static_cast<std::size_t>(
      std::count_if(upload_list_.begin(), upload_list_.end(),
                    [](const EncounterRecord& r) { return !r.uploaded; }));
}

std::vector<wire::Upload> Device::build_upload_batch(std::span<const blindsig::AuthToken> tokens) {
  std::vector<EncounterRecord*> pending;
  for (auto& r : upload_list_) {
    if (!r.uploaded) pending.push_back(&r);
  }
  if (tokens.size() < pending.size())
    throw std::invalid_argument("not enough auth tokens for the upload batch");
  std::vector<wire::Upload> out;
  out.reserve(pending.size());
  for (std::size_t i = 0; i < pending.size(); ++i) {
    pending[i]->uploaded = true;
    out.push_back(wire::Upload{pending[i]->token, pending[i]->day, pending[i]->duration_sec,
                               wire::AuthTokenWire::from(tokens[i])});
    counters_.uploads_built++;
  }
  rng_.shuffle(out.begin(), out.end());
  return out;
}

Bytes Device::snapshot() const {
  ByteWriter w;
  w.u8(1);  // snapshot format version
  w.u64(rng_.state());
  w.u8(id_ ? 1 : 0);
  w.u64(id_.value_or(0));
  w.raw(ek_);
  w.u64(epoch_);
  w.u8(identity_ ? 1 : 0);
  if (identity_) {
    w.raw(identity_->secret);
    w.raw(identity_->ebid);
    w.u64(identity_->epoch);
  }
  w.u8(notified_ ? 1 : 0);
  w.u64(sre_local_);
  w.u8(request_pending_ ? 1 : 0);
  w.count(actives_.size());
  for (const auto& [peer, a] : actives_) {
    w.raw(peer);
    w.u64(a.start);
    w.u64(a.last_seen);
  }
  auto put_list = [&w](const std::vector<EncounterRecord>& list) {
    w.count(list.size());
    for (const auto& r : list) {
      w.raw(r.token.bytes);
      w.u32(r.day);
      w.u32(r.duration_sec);
      w.u8(r.uploaded ? 1 : 0);
    }
  };
  put_list(request_list_);
  put_list(upload_list_);
  w.u64(counters_.finalized);
  w.u64(counters_.request_added);
  w.u64(counters_.upload_added);
  w.u64(counters_.discarded_short);
  w.u64(counters_.dropped_crypto);
  w.u64(counters_.observations);
  w.u64(counters_.requests_sent);
  w.u64(counters_.replies_ok);
  w.u64(counters_.replies_at_risk);
  w.u64(counters_.replies_rate_limited);
  w.u64(counters_.replies_auth_failure);
  w.u64(counters_.uploads_built);
  return w.take();
}

Device Device::restore(std::span<const std::uint8_t> data, crypto::GroupParams group,
                       ProtocolConfig cfg) {
  ByteReader r(data);
  if (r.u8() != 1) throw DecodeError("unsupported device snapshot version");
  Device d(group, std::move(cfg), Rng::from_state(r.u64()));
  bool has_id = r.u8() != 0;
  std::uint64_t id = r.u64();
  if (has_id) d.id_ = id;
  d.ek_ = r.fixed<32>();
  d.epoch_ = r.u64();
  if (r.u8() != 0) {
    crypto::EphemeralIdentity ident;
    ident.secret = r.fixed<32>();
    ident.ebid = r.fixed<32>();
    ident.epoch = r.u64();
    d.identity_ = ident;
  }
  d.notified_ = r.u8() != 0;
  d.sre_local_ = r.u64();
  d.request_pending_ = r.u8() != 0;
  std::size_t n_active = r.count();
  for (std::size_t i = 0; i < n_active; ++i) {
    crypto::Ebid peer = r.fixed<32>();
    Active a;
    a.start = r.u64();
    a.last_seen = r.u64();
    d.actives_.emplace(peer, a);
  }
  auto get_list = [&r](std::vector<EncounterRecord>& list) {
    std::size_t n = r.count();
    list.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      EncounterRecord rec;
      rec.token.bytes = r.fixed<32>();
      rec.day = r.u32();
      rec.duration_sec = r.u32();
      rec.uploaded = r.u8() != 0;
      list.push_back(rec);
    }
  };
  get_list(d.request_list_);
  get_list(d.upload_list_);
  d.counters_.finalized = r.u64();
  d.counters_.request_added = r.u64();
  d.counters_.upload_added = r.u64();
  d.counters_.discarded_short = r.u64();
  d.counters_.dropped_crypto = r.u64();
  d.counters_.observations = r.u64();
  d.counters_.requests_sent = r.u64();
  d.counters_.replies_ok = r.u64();
  d.counters_.replies_at_risk = r.u64();
  d.counters_.replies_rate_limited = r.u64();
  d.counters_.replies_auth_failure = r.u64();
  d.counters_.uploads_built = r.u64();
  r.expect_done();
  return d;
}

}  // namespace pet::agent
