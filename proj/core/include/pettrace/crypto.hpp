#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>

#include "pettrace/bytes.hpp"
#include "pettrace/rng.hpp"

namespace pet::crypto {

// Group backing the per-epoch key agreement. Curve25519 is the real mode;
// ToyModP is a small multiplicative group kept only for transparent test
// vectors and must never be selected by a protocol configuration.
enum class GroupMode : std::uint8_t { Curve25519 = 0, ToyModP = 1 };

struct GroupParams {
  GroupMode mode = GroupMode::Curve25519;
  std::uint64_t modulus = 0;    // ToyModP only, must fit in 32 bits
  std::uint64_t generator = 0;  // ToyModP only

  static GroupParams curve25519() { return {GroupMode::Curve25519, 0, 0}; }
  static GroupParams toy_mod_p(std::uint64_t p, std::uint64_t g);
};

using Ebid = std::array<std::uint8_t, 32>;

// Encoded shared secret: 32 bytes for Curve25519, 4 bytes big-endian for
// ToyModP. PET derivation consumes this encoding as-is.
using SharedSecret = Bytes;

struct PetToken {
  std::array<std::uint8_t, 32> bytes{};
  auto operator<=>(const PetToken&) const = default;
};

struct EphemeralIdentity {
  std::array<std::uint8_t, 32> secret{};
  Ebid ebid{};
  std::uint64_t epoch = 0;

  void erase_secret();
};

// Fresh identity for the given epoch. All randomness comes from the caller's
// generator.
EphemeralIdentity gen_identity(const GroupParams& group, Rng& rng, std::uint64_t epoch);

// Deterministic variant for tests: derives the public EBID from a fixed
// secret. For ToyModP the secret is the value in the last 8 bytes, big-endian.
EphemeralIdentity identity_from_secret(const GroupParams& group,
                                       const std::array<std::uint8_t, 32>& secret,
                                       std::uint64_t epoch);

// Diffie-Hellman step. Returns nullopt when the peer EBID is not a valid
// group element (all-zero / low-order point on Curve25519; zero or out-of-
// range value for ToyModP).
std::optional<SharedSecret> dh_shared(const GroupParams& group,
                                      const std::array<std::uint8_t, 32>& secret,
                                      const Ebid& peer_ebid);

// Both tokens of an encounter. pet1 = H('1' || shared), pet2 = H('2' || shared).
std::pair<PetToken, PetToken> derive_pet_pair(std::span<const std::uint8_t> shared);

struct RolePets {
  PetToken request_token;  // goes into the local request list
  PetToken upload_token;   // goes into the local upload list
};

// Deterministic role split: the party whose EBID is lexicographically greater
// keeps pet1 for requests and pet2 for uploads; the other party swaps them.
// Throws std::invalid_argument when the EBIDs are equal.
RolePets assign_roles(const Ebid& mine, const Ebid& peer, const PetToken& pet1, const PetToken& pet2);

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);

// Authenticated encryption for server-held entries. The key never leaves the
// device except inside a request. Ciphertext layout: 24-byte random nonce
// followed by the secretbox output (payload + 16-byte tag).
using EntryKey = std::array<std::uint8_t, 32>;

EntryKey gen_entry_key(Rng& rng);
Bytes encrypt_entry(const EntryKey& key, std::span<const std::uint8_t> plaintext, Rng& rng);
std::optional<Bytes> decrypt_entry(const EntryKey& key, std::span<const std::uint8_t> ciphertext);

}  // namespace pet::crypto
