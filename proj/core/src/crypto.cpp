#include "pettrace/crypto.hpp"

#include <sodium.h>

#include <mutex>
#include <stdexcept>

namespace pet::crypto {

namespace {

void ensure_sodium() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
  });
}

std::uint64_t toy_modpow(std::uint64_t base, std::uint64_t exp, std::uint64_t mod) {
  // mod fits in 32 bits, so products stay below 2^64.
  std::uint64_t result = 1 % mod;
  base %= mod;
  while (exp > 0) {
    if (exp & 1) result = result * base % mod;
    base = base * base % mod;
    exp >>= 1;
  }
  return result;
}

std::uint64_t toy_secret_value(const std::array<std::uint8_t, 32>& secret) {
  std::uint64_t v = 0;
  for (int i = 24; i < 32; ++i) v = v << 8 | secret[i];
  return v;
}

Ebid toy_encode(std::uint64_t value) {
  Ebid out{};
  for (int i = 0; i < 4; ++i) out[31 - i] = static_cast<std::uint8_t>(value >> (8 * i));
  return out;
}

std::optional<std::uint64_t> toy_decode(const Ebid& ebid, std::uint64_t p) {
  for (int i = 0; i < 28; ++i) {
    if (ebid[i] != 0) return std::nullopt;
  }
  std::uint64_t v = 0;
  for (int i = 28; i < 32; ++i) v = v << 8 | ebid[i];
  if (v == 0 || v >= p) return std::nullopt;
  return v;
}

}  // namespace

GroupParams GroupParams::toy_mod_p(std::uint64_t p, std::uint64_t g) {
  if (p < 3 || p > 0xFFFFFFFFull) throw std::invalid_argument("toy modulus must fit in 32 bits");
  if (g < 2 || g >= p) throw std::invalid_argument("toy generator out of range");
  return {GroupMode::ToyModP, p, g};
}

void EphemeralIdentity::erase_secret() {
  ensure_sodium();
  sodium_memzero(secret.data(), secret.size());
}

EphemeralIdentity gen_identity(const GroupParams& group, Rng& rng, std::uint64_t epoch) {
  return identity_from_secret(group, rng.bytes32(), epoch);
}

EphemeralIdentity identity_from_secret(const GroupParams& group,
                                       const std::array<std::uint8_t, 32>& secret,
                                       std::uint64_t epoch) {
  ensure_sodium();
  EphemeralIdentity id;
  id.secret = secret;
  id.epoch = epoch;
  switch (group.mode) {
    case GroupMode::Curve25519:
      crypto_scalarmult_base(id.ebid.data(), id.secret.data());
      break;
    case GroupMode::ToyModP: {
      std::uint64_t x = toy_secret_value(secret) % (group.modulus - 1);
      id.ebid = toy_encode(toy_modpow(group.generator, x, group.modulus));
      break;
    }
  }
  return id;
}

std::optional<SharedSecret> dh_shared(const GroupParams& group,
                                      const std::array<std::uint8_t, 32>& secret,
                                      const Ebid& peer_ebid) {
  ensure_sodium();
  switch (group.mode) {
    case GroupMode::Curve25519: {
      SharedSecret out(32);
      // Returns -1 when the output is all zero, i.e. the peer point is of
      // low order. Such EBIDs are rejected rather than used.
      if (crypto_scalarmult(out.data(), secret.data(), peer_ebid.data()) != 0) return std::nullopt;
      return out;
    }
    case GroupMode::ToyModP: {
      auto peer = toy_decode(peer_ebid, group.modulus);
      if (!peer) return std::nullopt;
      std::uint64_t x = toy_secret_value(secret) % (group.modulus - 1);
      std::uint64_t s = toy_modpow(*peer, x, group.modulus);
      SharedSecret out(4);
      for (int i = 0; i < 4; ++i) out[3 - i] = static_cast<std::uint8_t>(s >> (8 * i));
      return out;
    }
  }
  return std::nullopt;
}

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data) {
  ensure_sodium();
  std::array<std::uint8_t, 32> out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

std::pair<PetToken, PetToken> derive_pet_pair(std::span<const std::uint8_t> shared) {
  if (shared.empty()) throw std::invalid_argument("shared secret must not be empty");
  Bytes buf;
  buf.reserve(shared.size() + 1);
  buf.push_back(0x31);
  buf.insert(buf.end(), shared.begin(), shared.end());
  PetToken pet1{sha256(buf)};
  buf[0] = 0x32;
  PetToken pet2{sha256(buf)};
  return {pet1, pet2};
}

RolePets assign_roles(const Ebid& mine, const Ebid& peer, const PetToken& pet1, const PetToken& pet2) {
  if (mine == peer) throw std::invalid_argument("EBIDs must differ for role assignment");
  if (mine > peer) return {pet1, pet2};
  return {pet2, pet1};
}

EntryKey gen_entry_key(Rng& rng) { return rng.bytes32(); }

Bytes encrypt_entry(const EntryKey& key, std::span<const std::uint8_t> plaintext, Rng& rng) {
  ensure_sodium();
  static_assert(crypto_secretbox_KEYBYTES == 32);
  Bytes out(crypto_secretbox_NONCEBYTES + plaintext.size() + crypto_secretbox_MACBYTES);
  rng.fill(std::span(out.data(), crypto_secretbox_NONCEBYTES));
  crypto_secretbox_easy(out.data() + crypto_secretbox_NONCEBYTES, plaintext.data(), plaintext.size(),
                        out.data(), key.data());
  return out;
}

std::optional<Bytes> decrypt_entry(const EntryKey& key, std::span<const std::uint8_t> ciphertext) {
  ensure_sodium();
  if (ciphertext.size() < crypto_secretbox_NONCEBYTES + crypto_secretbox_MACBYTES) return std::nullopt;
  Bytes out(ciphertext.size() - crypto_secretbox_NONCEBYTES - crypto_secretbox_MACBYTES);
  if (crypto_secretbox_open_easy(out.data(), ciphertext.data() + crypto_secretbox_NONCEBYTES,
                                 ciphertext.size() - crypto_secretbox_NONCEBYTES, ciphertext.data(),
                                 key.data()) != 0) {
    return std::nullopt;
  }
  return out;
}

}  // namespace pet::crypto
